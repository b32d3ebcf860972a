#pragma once

// Closed-form exit laws for the flat half space.  Brownian motion started
// at p > 0 above the flat boundary exits with the Poisson-kernel law: a
// Cauchy distribution in d = 2 and its solid-angle analogue in d = 3.
// These formulas are the ground truth the Monte Carlo sampler is tested
// against, and double as exact cell weights and exact positive harmonic
// fields (harmonic extensions of boundary indicators) on flat domains.

#include <cmath>
#include <stdexcept>

#include "geometry.hpp"

namespace rvl {

// ------------------------------------------------------------------ d = 2 --

// P(exit coordinate <= t) from (px, py), py > 0.
inline double cauchy_cdf(double px, double py, double t) {
  return 0.5 + std::atan((t - px) / py) / M_PI;
}

// Exit probability through the boundary interval [a, b].
inline double interval_mass(double px, double py, double a, double b) {
  if (!(py > 0)) throw std::domain_error("interval_mass: need py > 0");
  return (std::atan((b - px) / py) - std::atan((a - px) / py)) / M_PI;
}

// Exit probability outside [-R, R].
inline double tail_mass(double px, double py, double R) {
  return cauchy_cdf(px, py, -R) + 1 - cauchy_cdf(px, py, R);
}

// Gradient of interval_mass with respect to the start point.  The same
// function read as u(p) = interval_mass(p) is the harmonic extension of the
// indicator of [a, b], so this is an exact harmonic gradient.
inline vecd<2> interval_mass_gradient(double px, double py, double a, double b) {
  double da = (a - px) * (a - px) + py * py;
  double db = (b - px) * (b - px) + py * py;
  return {(py / da - py / db) / M_PI, ((a - px) / da - (b - px) / db) / M_PI};
}

// ------------------------------------------------------------------ d = 3 --

// Exit probability through the boundary rectangle [a0,b0] x [a1,b1] from
// (px, py, pz), pz > 0: the subtended solid angle over 2*pi, evaluated by
// the signed corner sum.
inline double rect_mass(double px, double py, double pz, double a0, double b0, double a1,
                        double b1) {
  if (!(pz > 0)) throw std::domain_error("rect_mass: need pz > 0");
  auto corner = [&](double cx, double cy) {
    double X = cx - px, Y = cy - py;
    return std::atan2(X * Y, pz * std::sqrt(X * X + Y * Y + pz * pz));
  };
  return (corner(b0, b1) - corner(b0, a1) - corner(a0, b1) + corner(a0, a1)) / (2 * M_PI);
}

inline double square_tail_mass(double px, double py, double pz, double R) {
  return 1 - rect_mass(px, py, pz, -R, R, -R, R);
}

}  // namespace rvl
