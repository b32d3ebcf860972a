#pragma once

// Harnack machinery for positive harmonic functions: the ball envelope, the
// gradient bound, the boundary-distance constant of a Lipschitz graph, and
// the chain bounds comparing values at two heights over the same base point.
// The chain walks balls of radius (3/4)c*a centered at heights a that shrink
// by the factor (1 - c/2) per step, so every per-step Harnack quotient is
// evaluated at the fixed radius ratio 2/3.

#include <cmath>
#include <stdexcept>

namespace rvl {

struct invalid_radii : std::invalid_argument {
  invalid_radii() : std::invalid_argument("harnack: need 0 <= r < R") {}
};
struct invalid_heights : std::invalid_argument {
  invalid_heights() : std::invalid_argument("harnack: need 0 < y1 <= y2") {}
};

struct harnack_envelope_t {
  double lo, hi;
};

// Bounds on u(x) given u at the center of a ball of radius R on which u is
// nonnegative harmonic, with ||x - center|| = r.
inline harnack_envelope_t harnack_envelope(double u0, double r, double R, int d) {
  if (!(r >= 0 && r < R)) throw invalid_radii();
  double q = r / R;
  double lo = (1 - q) / std::pow(1 + q, d - 1) * u0;
  double hi = (1 + q) / std::pow(1 - q, d - 1) * u0;
  return {lo, hi};
}

// ||grad u(x)|| <= d^{3/2} u(x) / dist(x, boundary).
inline double gradient_bound(double u, double dist, int d) {
  if (!(dist > 0)) throw std::domain_error("gradient_bound: dist > 0");
  return std::pow(double(d), 1.5) * u / dist;
}

// Distance constant of an L-Lipschitz graph: y >= d(x_y, S) >= c_S * y.
inline double lipschitz_distance_constant(double L) {
  return 1.0 / std::sqrt(L * L + 1.0);
}

// Chain constants.  Per-step quotients at radius ratio 2/3:
//   step_lo = (1/3)(5/3)^{1-d} < 1,  step_hi = (5/3) 3^{d-1} > 1,
// and N chain steps bounded through log(y1/y2)/log(1 - c/2) give
//   C_lo (y1/y2)^{a_lo} <= u_{y2}(x)/u_{y1}(x) <= C_hi (y2/y1)^{a_hi}
// with C_lo = 1/step_hi, C_hi = 1/step_lo,
//      a_lo = -ln(step_hi)/ln(1-c/2), a_hi = ln(step_lo)/ln(1-c/2).
struct chain_constants {
  int d;
  double c;        // distance constant c_S
  double shrink;   // per-step height factor, default 1 - c/2
  double step_lo, step_hi;
  double C_lo, C_hi;
  double a_lo, a_hi;
};

inline chain_constants make_chain_constants(int d, double c_S, double shrink_override = 0) {
  if (!(c_S > 0 && c_S <= 1)) throw std::invalid_argument("chain: c_S in (0,1]");
  chain_constants cc;
  cc.d = d;
  cc.c = c_S;
  cc.shrink = shrink_override > 0 ? shrink_override : 1 - c_S / 2;
  if (!(cc.shrink > 0 && cc.shrink < 1)) throw std::invalid_argument("chain: shrink in (0,1)");
  cc.step_lo = (1.0 / 3.0) * std::pow(5.0 / 3.0, 1 - d);
  cc.step_hi = (5.0 / 3.0) * std::pow(3.0, d - 1);
  cc.C_lo = 1.0 / cc.step_hi;
  cc.C_hi = 1.0 / cc.step_lo;
  double lsh = std::log(cc.shrink);
  cc.a_lo = -std::log(cc.step_hi) / lsh;
  cc.a_hi = std::log(cc.step_lo) / lsh;
  return cc;
}

struct chain_bounds_t {
  double lo, hi;  // bounds on u_{y2}(x) / u_{y1}(x)
  int steps;      // chain length N
};

inline chain_bounds_t chain_quotient_bounds(const chain_constants& cc, double y1, double y2) {
  if (!(y1 > 0 && y1 <= y2)) throw invalid_heights();
  chain_bounds_t b;
  b.lo = cc.C_lo * std::pow(y1 / y2, cc.a_lo);
  b.hi = cc.C_hi * std::pow(y2 / y1, cc.a_hi);
  b.steps = y1 == y2 ? 0 : int(std::ceil(std::log(y1 / y2) / std::log(cc.shrink)));
  return b;
}

}  // namespace rvl
