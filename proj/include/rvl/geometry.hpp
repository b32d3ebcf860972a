#pragma once

// Near-half-space geometry.  The domain is the open epigraph of a compactly
// supported piecewise-linear Lipschitz function Phi over R^{D-1}: Phi lives
// on a regular grid inside the support ball B(0, r), r < 1, and vanishes
// identically outside.  Everything downstream needs only two queries, both
// exact for PL surfaces: distance to the boundary and nearest boundary point.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rvl {

template <int D>
using vecd = std::array<double, D>;

template <std::size_t D>
inline double dot(const std::array<double, D>& a, const std::array<double, D>& b) {
  double s = 0;
  for (std::size_t i = 0; i < D; ++i) s += a[i] * b[i];
  return s;
}
template <std::size_t D>
inline double norm(const std::array<double, D>& a) { return std::sqrt(dot(a, a)); }
template <std::size_t D>
inline std::array<double, D> sub(const std::array<double, D>& a, const std::array<double, D>& b) {
  std::array<double, D> r;
  for (std::size_t i = 0; i < D; ++i) r[i] = a[i] - b[i];
  return r;
}
template <std::size_t D>  // t*x + y
inline std::array<double, D> axpy(double t, const std::array<double, D>& x,
                                  const std::array<double, D>& y) {
  std::array<double, D> r;
  for (std::size_t i = 0; i < D; ++i) r[i] = t * x[i] + y[i];
  return r;
}

struct lipschitz_violation : std::invalid_argument {
  explicit lipschitz_violation(double measured, double declared)
      : std::invalid_argument("graph: measured Lipschitz constant " + std::to_string(measured) +
                              " exceeds declared " + std::to_string(declared)) {}
};
struct support_violation : std::invalid_argument {
  support_violation() : std::invalid_argument("graph: nonzero value outside the support ball") {}
};
struct outside_domain : std::domain_error {
  outside_domain() : std::domain_error("point not strictly above the boundary graph") {}
};

template <int D>
struct lipschitz_graph;

// ---------------------------------------------------------------- D == 2 --
// Boundary is a polyline over knots xs[0..n-1] spanning [-r, r], flat zero
// rays on both sides.

template <>
struct lipschitz_graph<2> {
  std::vector<double> xs;    // strictly increasing, xs.front() = -r, xs.back() = r
  std::vector<double> vals;  // Phi at knots; zero at (and outside) radius r
  double L = 0;              // declared Lipschitz constant
  double measured_L = 0;
  double r = 0.5;

  bool flat() const { return measured_L == 0; }

  double phi(double x) const {
    if (x <= xs.front() || x >= xs.back()) return 0;
    std::size_t hi = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin();
    std::size_t lo = hi - 1;
    double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return vals[lo] + t * (vals[hi] - vals[lo]);
  }

  vecd<2> lift(const vecd<2>& base, double y) const { return {base[0], base[1] + y}; }
};

inline lipschitz_graph<2> build_graph(std::vector<double> xs, std::vector<double> vals,
                                      double L_declared, double r) {
  if (xs.size() != vals.size() || xs.size() < 2) throw std::invalid_argument("graph: bad grid");
  if (!(r > 0 && r < 1)) throw std::invalid_argument("graph: need r in (0,1)");
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    if (!(xs[i] < xs[i + 1])) throw std::invalid_argument("graph: grid not increasing");
  if (std::abs(xs.front() + r) > 1e-12 || std::abs(xs.back() - r) > 1e-12)
    throw std::invalid_argument("graph: grid must span [-r, r]");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(vals[i])) throw std::invalid_argument("graph: non-finite value");
    if (std::abs(xs[i]) >= r - 1e-15 && vals[i] != 0) throw support_violation();
  }
  double m = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j)
      m = std::max(m, std::abs(vals[j] - vals[i]) / (xs[j] - xs[i]));
  if (m > L_declared * (1 + 1e-12) + 1e-15) throw lipschitz_violation(m, L_declared);
  lipschitz_graph<2> g;
  g.xs = std::move(xs);
  g.vals = std::move(vals);
  g.L = L_declared;
  g.measured_L = m;
  g.r = r;
  return g;
}

namespace detail {

// Distance from p to the segment (ax,ay)-(bx,by); also reports the foot.
inline double seg_dist(double px, double py, double ax, double ay, double bx, double by,
                       double& fx, double& fy) {
  double dx = bx - ax, dy = by - ay;
  double t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy);
  t = t < 0 ? 0 : (t > 1 ? 1 : t);
  fx = ax + t * dx;
  fy = ay + t * dy;
  return std::hypot(px - fx, py - fy);
}

}  // namespace detail

struct nearest_point2 {
  double dist;
  vecd<2> point;
};

// Exact distance to the PL surface: nearest polyline segment plus the two
// flat exterior rays.  The scan expands from the knot interval under p and
// stops as soon as the horizontal gap alone exceeds the best distance, so
// flat regions and far starts cost O(log n).
inline nearest_point2 nearest_boundary(const lipschitz_graph<2>& g, const vecd<2>& p) {
  double px = p[0], py = p[1];
  nearest_point2 best;
  // Flat rays [r, inf) and (-inf, -r] at height zero.
  if (px >= g.xs.back()) {
    best = {std::abs(py), {px, 0}};
  } else if (px <= g.xs.front()) {
    best = {std::abs(py), {px, 0}};
  } else {
    double dr = px <= g.xs.back() ? std::hypot(px - g.xs.back(), py) : std::abs(py);
    double dl = px >= g.xs.front() ? std::hypot(px - g.xs.front(), py) : std::abs(py);
    best = dr < dl ? nearest_point2{dr, {g.xs.back(), 0.0}} : nearest_point2{dl, {g.xs.front(), 0.0}};
  }
  if (g.flat()) {
    // Interior of the support span is also at height zero.
    if (px > g.xs.front() && px < g.xs.back() && std::abs(py) < best.dist)
      best = {std::abs(py), {px, 0}};
    return best;
  }
  const auto& xs = g.xs;
  std::size_t n = xs.size();
  std::size_t i0 = std::upper_bound(xs.begin(), xs.end(), px) - xs.begin();
  i0 = i0 == 0 ? 0 : i0 - 1;
  if (i0 >= n - 1) i0 = n - 2;
  auto try_seg = [&](std::size_t s) {
    double fx, fy;
    double d = detail::seg_dist(px, py, xs[s], g.vals[s], xs[s + 1], g.vals[s + 1], fx, fy);
    if (d < best.dist) best = {d, {fx, fy}};
  };
  try_seg(i0);
  for (std::size_t k = 1;; ++k) {
    bool more = false;
    if (i0 + k <= n - 2 && xs[i0 + k] - px < best.dist) { try_seg(i0 + k); more = true; }
    if (i0 >= k && px - xs[i0 - k + 1] < best.dist) { try_seg(i0 - k); more = true; }
    if (!more) break;
  }
  return best;
}

inline double distance_to_boundary(const lipschitz_graph<2>& g, const vecd<2>& p) {
  if (!(p[1] > g.phi(p[0]))) throw outside_domain();
  return nearest_boundary(g, p).dist;
}

// ---------------------------------------------------------------- D == 3 --
// Boundary over a square grid on [-r, r]^2, each cell split into the two
// triangles along the (low,low)-(high,high) diagonal; flat zero outside.

template <>
struct lipschitz_graph<3> {
  std::vector<double> gx;    // grid, both axes, spanning [-r, r]
  std::vector<double> vals;  // row-major [ix * gx.size() + iy]
  double L = 0;
  double measured_L = 0;
  double r = 0.5;

  double at(std::size_t ix, std::size_t iy) const { return vals[ix * gx.size() + iy]; }
  bool flat() const { return measured_L == 0; }

  double phi(double x0, double x1) const {
    const auto& g = gx;
    if (x0 <= g.front() || x0 >= g.back() || x1 <= g.front() || x1 >= g.back()) return 0;
    std::size_t ix = std::upper_bound(g.begin(), g.end(), x0) - g.begin() - 1;
    std::size_t iy = std::upper_bound(g.begin(), g.end(), x1) - g.begin() - 1;
    double hx = g[ix + 1] - g[ix], hy = g[iy + 1] - g[iy];
    double u = (x0 - g[ix]) / hx, v = (x1 - g[iy]) / hy;
    double f00 = at(ix, iy), f10 = at(ix + 1, iy), f01 = at(ix, iy + 1), f11 = at(ix + 1, iy + 1);
    // PL on the two triangles of the cell, not bilinear.
    if (u >= v) return f00 + u * (f10 - f00) + v * (f11 - f10);
    return f00 + u * (f11 - f01) + v * (f01 - f00);
  }

  vecd<3> lift(const vecd<3>& base, double y) const { return {base[0], base[1], base[2] + y}; }
};

inline lipschitz_graph<3> build_graph3(std::vector<double> grid, std::vector<double> vals,
                                       double L_declared, double r) {
  std::size_t n = grid.size();
  if (n < 2 || vals.size() != n * n) throw std::invalid_argument("graph: bad grid");
  if (!(r > 0 && r < 1)) throw std::invalid_argument("graph: need r in (0,1)");
  if (std::abs(grid.front() + r) > 1e-12 || std::abs(grid.back() - r) > 1e-12)
    throw std::invalid_argument("graph: grid must span [-r, r]");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double v = vals[i * n + j];
      if (!std::isfinite(v)) throw std::invalid_argument("graph: non-finite value");
      if (std::hypot(grid[i], grid[j]) >= r - 1e-15 && v != 0) throw support_violation();
    }
  double m = 0;
  for (std::size_t a = 0; a < n * n; ++a)
    for (std::size_t b = a + 1; b < n * n; ++b) {
      double dx = grid[a / n] - grid[b / n], dy = grid[a % n] - grid[b % n];
      m = std::max(m, std::abs(vals[a] - vals[b]) / std::hypot(dx, dy));
    }
  if (m > L_declared * (1 + 1e-12) + 1e-15) throw lipschitz_violation(m, L_declared);
  lipschitz_graph<3> g;
  g.gx = std::move(grid);
  g.vals = std::move(vals);
  g.L = L_declared;
  g.measured_L = m;
  g.r = r;
  return g;
}

namespace detail {

// Distance from p to triangle (a,b,c) in 3-d, with the closest point.
// Standard Voronoi-region case analysis; exact up to rounding.
inline double tri_dist(const vecd<3>& p, const vecd<3>& a, const vecd<3>& b, const vecd<3>& c,
                       vecd<3>& foot) {
  vecd<3> ab = sub<3>(b, a), ac = sub<3>(c, a), ap = sub<3>(p, a);
  double d1 = dot<3>(ab, ap), d2 = dot<3>(ac, ap);
  if (d1 <= 0 && d2 <= 0) { foot = a; return norm<3>(sub<3>(p, foot)); }
  vecd<3> bp = sub<3>(p, b);
  double d3 = dot<3>(ab, bp), d4 = dot<3>(ac, bp);
  if (d3 >= 0 && d4 <= d3) { foot = b; return norm<3>(sub<3>(p, foot)); }
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    double t = d1 / (d1 - d3);
    foot = axpy<3>(t, ab, a);
    return norm<3>(sub<3>(p, foot));
  }
  vecd<3> cp = sub<3>(p, c);
  double d5 = dot<3>(ab, cp), d6 = dot<3>(ac, cp);
  if (d6 >= 0 && d5 <= d6) { foot = c; return norm<3>(sub<3>(p, foot)); }
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    double t = d2 / (d2 - d6);
    foot = axpy<3>(t, ac, a);
    return norm<3>(sub<3>(p, foot));
  }
  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && d4 - d3 >= 0 && d5 - d6 >= 0) {
    double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    foot = axpy<3>(t, sub<3>(c, b), b);
    return norm<3>(sub<3>(p, foot));
  }
  double denom = 1.0 / (va + vb + vc);
  double u = vb * denom, v = vc * denom;
  foot = axpy<3>(u, ab, axpy<3>(v, ac, a));
  return norm<3>(sub<3>(p, foot));
}

}  // namespace detail

struct nearest_point3 {
  double dist;
  vecd<3> point;
};

inline nearest_point3 nearest_boundary(const lipschitz_graph<3>& g, const vecd<3>& p) {
  double px = p[0], py = p[1], pz = p[2];
  double rho = std::hypot(px, py);
  nearest_point3 best;
  if (rho >= g.r) {
    // (px,py) lies in the zero region; the vertical drop is on the surface.
    best = {std::abs(pz), {px, py, 0}};
  } else {
    // Valid candidate on the support circle where the height is zero.
    double ux = rho == 0 ? 1.0 : px / rho, uy = rho == 0 ? 0.0 : py / rho;
    best = {std::hypot(g.r - rho, pz), {g.r * ux, g.r * uy, 0}};
  }
  if (g.flat()) {
    if (std::abs(pz) < best.dist) best = {std::abs(pz), {px, py, 0}};
    return best;
  }
  const auto& gr = g.gx;
  std::size_t n = gr.size();
  auto cell_of = [&](double x) {
    std::size_t i = std::upper_bound(gr.begin(), gr.end(), x) - gr.begin();
    i = i == 0 ? 0 : i - 1;
    return i >= n - 1 ? n - 2 : i;
  };
  std::size_t ix0 = cell_of(px), iy0 = cell_of(py);
  auto try_cell = [&](std::size_t ix, std::size_t iy) {
    vecd<3> v00{gr[ix], gr[iy], g.at(ix, iy)}, v10{gr[ix + 1], gr[iy], g.at(ix + 1, iy)};
    vecd<3> v01{gr[ix], gr[iy + 1], g.at(ix, iy + 1)}, v11{gr[ix + 1], gr[iy + 1], g.at(ix + 1, iy + 1)};
    vecd<3> f;
    double d = detail::tri_dist(p, v00, v10, v11, f);
    if (d < best.dist) best = {d, f};
    d = detail::tri_dist(p, v00, v11, v01, f);
    if (d < best.dist) best = {d, f};
  };
  try_cell(ix0, iy0);
  for (std::size_t ring = 1; ring < n; ++ring) {
    // Minimal horizontal distance from p to any cell of this ring; gaps
    // grow with the ring index, so stopping at the first miss is safe.
    double gap = 1e300;
    if (ring <= ix0) gap = std::min(gap, px - gr[ix0 - ring + 1]);
    if (ix0 + ring <= n - 2) gap = std::min(gap, gr[ix0 + ring] - px);
    if (ring <= iy0) gap = std::min(gap, py - gr[iy0 - ring + 1]);
    if (iy0 + ring <= n - 2) gap = std::min(gap, gr[iy0 + ring] - py);
    if (gap >= best.dist) break;
    bool any = false;
    for (std::size_t ix = ix0 >= ring ? ix0 - ring : 0; ix <= std::min(ix0 + ring, n - 2); ++ix)
      for (std::size_t iy = iy0 >= ring ? iy0 - ring : 0; iy <= std::min(iy0 + ring, n - 2); ++iy) {
        if (std::max(ix > ix0 ? ix - ix0 : ix0 - ix, iy > iy0 ? iy - iy0 : iy0 - iy) != ring) continue;
        try_cell(ix, iy);
        any = true;
      }
    if (!any) break;
  }
  return best;
}

inline double distance_to_boundary(const lipschitz_graph<3>& g, const vecd<3>& p) {
  if (!(p[2] > g.phi(p[0], p[1]))) throw outside_domain();
  return nearest_boundary(g, p).dist;
}

// -------------------------------------------------------------- builders --

inline lipschitz_graph<2> flat_graph2(double r = 0.5) {
  return build_graph({-r, r}, {0, 0}, 0.0, r);
}

// Apex of the given height at the origin, linear to zero at |x| = r.
inline lipschitz_graph<2> tent_graph2(double height, double r = 0.5, std::size_t knots = 65) {
  std::vector<double> xs(knots), vs(knots);
  for (std::size_t i = 0; i < knots; ++i) {
    xs[i] = -r + 2 * r * double(i) / double(knots - 1);
    vs[i] = height * (1 - std::abs(xs[i]) / r);
    if (std::abs(std::abs(xs[i]) - r) < 1e-15) vs[i] = 0;
  }
  return build_graph(std::move(xs), std::move(vs), height / r, r);
}

// Random PL profile with Lipschitz constant <= L: clamped increments with a
// taper to zero at the support edge.  Deterministic in the seed.
inline lipschitz_graph<2> random_pl_graph2(double L, double r, std::size_t knots, std::uint64_t seed) {
  std::vector<double> xs(knots), vs(knots, 0.0);
  double h = 2 * r / double(knots - 1);
  std::uint64_t s = seed ? seed : 0x9e3779b97f4a7c15ull;
  auto next = [&] {
    s ^= s << 13; s ^= s >> 7; s ^= s << 17;
    return double(s >> 11) / double(1ull << 53) * 2 - 1;
  };
  for (std::size_t i = 0; i < knots; ++i) xs[i] = -r + h * double(i);
  for (std::size_t i = 1; i < knots; ++i) vs[i] = vs[i - 1] + 0.8 * L * h * next();
  for (std::size_t i = 0; i < knots; ++i) {
    double taper = std::min(1.0, std::min(xs[i] + r, r - xs[i]) / (0.2 * r));
    vs[i] *= std::max(0.0, taper);
  }
  // Re-clamp increments so the taper cannot have raised a slope above L.
  for (int pass = 0; pass < 4; ++pass)
    for (std::size_t i = 1; i < knots; ++i) {
      double lo = vs[i - 1] - 0.95 * L * h, hi = vs[i - 1] + 0.95 * L * h;
      vs[i] = std::min(std::max(vs[i], lo), hi);
    }
  vs.front() = vs.back() = 0;
  for (std::size_t i = knots; i-- > 1;) {
    double lo = vs[i] - 0.95 * L * h, hi = vs[i] + 0.95 * L * h;
    vs[i - 1] = std::min(std::max(vs[i - 1], lo), hi);
  }
  vs.front() = vs.back() = 0;
  return build_graph(std::move(xs), std::move(vs), L, r);
}

inline lipschitz_graph<3> flat_graph3(double r = 0.5) {
  return build_graph3({-r, 0, r}, std::vector<double>(9, 0.0), 0.0, r);
}

inline lipschitz_graph<3> tent_graph3(double height, double r = 0.5, std::size_t knots = 17) {
  std::vector<double> g(knots);
  for (std::size_t i = 0; i < knots; ++i) g[i] = -r + 2 * r * double(i) / double(knots - 1);
  std::vector<double> v(knots * knots, 0.0);
  for (std::size_t i = 0; i < knots; ++i)
    for (std::size_t j = 0; j < knots; ++j) {
      double rho = std::hypot(g[i], g[j]);
      v[i * knots + j] = rho >= r ? 0 : height * (1 - rho / r);
    }
  return build_graph3(std::move(g), std::move(v), height / r + 1e-9, r);
}

}  // namespace rvl
