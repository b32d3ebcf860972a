#pragma once

// Positive harmonic test fields on a graph domain, with values and gradients.
// Flat-boundary fields are closed form (Cauchy kernel integrals of constant,
// coordinate, indicator, and piecewise-linear boundary data); general graphs
// get a Monte Carlo field backed by walk-on-spheres with per-point caching.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rvl/geometry.hpp"
#include "rvl/halfspace.hpp"
#include "rvl/wos.hpp"

namespace rvl {

// Below this magnitude a gradient is treated as zero when normalizing.
inline constexpr double kGradientFloor = 1e-10;

struct step_too_large : std::invalid_argument {
  step_too_large() : std::invalid_argument("fd step must stay below half the boundary distance") {}
};

template <int D>
struct harmonic_field {
  virtual ~harmonic_field() = default;
  virtual double value(const vecd<D>& p) const = 0;
  virtual vecd<D> gradient(const vecd<D>& p) const = 0;
  virtual const char* kind() const = 0;
};

template <int D>
using field_ptr = std::shared_ptr<const harmonic_field<D>>;

// Central differences, default step min(1e-3, dist/4).  dist guards the
// stencil against leaving the domain.
template <std::size_t D, class F>
std::array<double, D> fd_gradient(F&& f, const std::array<double, D>& p, double dist,
                                  double h = 0) {
  if (h <= 0) h = std::min(1e-3, dist / 4);
  if (!(h > 0) || h >= dist / 2) throw step_too_large();
  std::array<double, D> g{};
  for (std::size_t a = 0; a < D; ++a) {
    std::array<double, D> hi = p, lo = p;
    hi[a] += h;
    lo[a] -= h;
    g[a] = (f(hi) - f(lo)) / (2 * h);
  }
  return g;
}

// grad/||grad|| with the zero floor.
template <std::size_t D>
std::array<double, D> unit_or_zero(const std::array<double, D>& g,
                                   double floor = kGradientFloor) {
  double n = norm(g);
  std::array<double, D> s{};
  if (n <= floor) return s;
  for (std::size_t a = 0; a < D; ++a) s[a] = g[a] / n;
  return s;
}

struct constant_field2 final : harmonic_field<2> {
  double c;
  explicit constant_field2(double c_) : c(c_) {
    if (!(c >= 0)) throw std::invalid_argument("constant field: c >= 0");
  }
  double value(const vecd<2>&) const override { return c; }
  vecd<2> gradient(const vecd<2>&) const override { return {0, 0}; }
  const char* kind() const override { return "constant"; }
};

// u(p) = p_d.  Harmonic on any domain; positive above a nonnegative graph.
struct coordinate_field2 final : harmonic_field<2> {
  double value(const vecd<2>& p) const override { return p[1]; }
  vecd<2> gradient(const vecd<2>&) const override { return {0, 1}; }
  const char* kind() const override { return "coordinate"; }
};

// Flat boundary: harmonic extension of the indicator of [a, b].
struct interval_field2 final : harmonic_field<2> {
  double a, b;
  interval_field2(double a_, double b_) : a(a_), b(b_) {
    if (!(a < b)) throw std::invalid_argument("interval field: a < b");
  }
  double value(const vecd<2>& p) const override { return interval_mass(p[0], p[1], a, b); }
  vecd<2> gradient(const vecd<2>& p) const override {
    return interval_mass_gradient(p[0], p[1], a, b);
  }
  const char* kind() const override { return "interval"; }
};

// Flat boundary: harmonic extension of piecewise-linear data given by knots
// (x_i, v_i), v >= 0, zero outside [x_0, x_last].  Closed form per segment:
// with data c0 + c1 t on [a, b],
//   contribution = c0 M + c1 (px M + (py / 2pi) ln(Db / Da)),
// where M is the interval mass and Da, Db are squared distances to the
// segment endpoints.
struct hat_field2 final : harmonic_field<2> {
  std::vector<double> xs, vs;
  hat_field2(std::vector<double> xs_, std::vector<double> vs_)
      : xs(std::move(xs_)), vs(std::move(vs_)) {
    if (xs.size() < 2 || xs.size() != vs.size())
      throw std::invalid_argument("hat field: need matching knots, >= 2");
    for (size_t i = 0; i + 1 < xs.size(); ++i)
      if (!(xs[i] < xs[i + 1])) throw std::invalid_argument("hat field: knots must increase");
    for (double v : vs)
      if (!(v >= 0)) throw std::invalid_argument("hat field: data must be >= 0");
  }

  double boundary(double t) const {
    if (t <= xs.front() || t >= xs.back()) {
      if (t == xs.front()) return vs.front();
      if (t == xs.back()) return vs.back();
      return 0;
    }
    size_t k = size_t(std::upper_bound(xs.begin(), xs.end(), t) - xs.begin()) - 1;
    double w = (t - xs[k]) / (xs[k + 1] - xs[k]);
    return vs[k] + w * (vs[k + 1] - vs[k]);
  }

  double value(const vecd<2>& p) const override {
    double px = p[0], py = p[1], out = 0;
    for (size_t k = 0; k + 1 < xs.size(); ++k) {
      double a = xs[k], b = xs[k + 1];
      double c1 = (vs[k + 1] - vs[k]) / (b - a);
      double c0 = vs[k] - c1 * a;
      double M = interval_mass(px, py, a, b);
      double Da = (a - px) * (a - px) + py * py;
      double Db = (b - px) * (b - px) + py * py;
      double T = px * M + (py / (2 * pi())) * std::log(Db / Da);
      out += c0 * M + c1 * T;
    }
    return out;
  }

  vecd<2> gradient(const vecd<2>& p) const override {
    double px = p[0], py = p[1];
    vecd<2> g{0, 0};
    for (size_t k = 0; k + 1 < xs.size(); ++k) {
      double a = xs[k], b = xs[k + 1];
      double c1 = (vs[k + 1] - vs[k]) / (b - a);
      double c0 = vs[k] - c1 * a;
      double M = interval_mass(px, py, a, b);
      auto gM = interval_mass_gradient(px, py, a, b);
      double Da = (a - px) * (a - px) + py * py;
      double Db = (b - px) * (b - px) + py * py;
      double L = std::log(Db / Da);
      double dLdx = -2 * (b - px) / Db + 2 * (a - px) / Da;
      double dLdy = 2 * py / Db - 2 * py / Da;
      double dTdx = M + px * gM[0] + (py / (2 * pi())) * dLdx;
      double dTdy = px * gM[1] + L / (2 * pi()) + (py / (2 * pi())) * dLdy;
      g[0] += c0 * gM[0] + c1 * dTdx;
      g[1] += c0 * gM[1] + c1 * dTdy;
    }
    return g;
  }
  const char* kind() const override { return "hat"; }

 private:
  static double pi() { return 3.14159265358979323846; }
};

// Nonnegative combination of fields.
struct combination_field2 final : harmonic_field<2> {
  std::vector<std::pair<double, field_ptr<2>>> parts;
  explicit combination_field2(std::vector<std::pair<double, field_ptr<2>>> parts_)
      : parts(std::move(parts_)) {
    for (auto& pr : parts)
      if (!(pr.first >= 0) || !pr.second)
        throw std::invalid_argument("combination field: weights >= 0, parts non-null");
  }
  double value(const vecd<2>& p) const override {
    double s = 0;
    for (auto& pr : parts) s += pr.first * pr.second->value(p);
    return s;
  }
  vecd<2> gradient(const vecd<2>& p) const override {
    vecd<2> g{0, 0};
    for (auto& pr : parts) {
      auto gp = pr.second->gradient(p);
      g[0] += pr.first * gp[0];
      g[1] += pr.first * gp[1];
    }
    return g;
  }
  const char* kind() const override { return "combination"; }
};

// Monte Carlo field on a general graph: harmonic extension of boundary data
// g(base x-coordinate), value and gradient by walk-on-spheres.  Estimates are
// cached per exact point so repeated sweeps reuse the same draws; caching
// also keeps results a pure function of (seed, query points).
struct mc_field2 final : harmonic_field<2> {
  const lipschitz_graph<2>* g;
  std::function<double(double)> data;
  uint64_t seed;
  uint64_t value_walks, gradient_walks;
  wos_config cfg;

  mc_field2(const lipschitz_graph<2>& graph, std::function<double(double)> data_, uint64_t seed_,
            uint64_t value_walks_ = 20000, uint64_t gradient_walks_ = 20000,
            wos_config cfg_ = {})
      : g(&graph), data(std::move(data_)), seed(seed_), value_walks(value_walks_),
        gradient_walks(gradient_walks_), cfg(cfg_) {}

  double value(const vecd<2>& p) const override {
    auto key = point_key(p);
    auto it = vcache_.find(key);
    if (it != vcache_.end()) return it->second;
    double v = wos_value(*g, p, value_walks, mix(seed, 0x76616c75u, key), data, cfg);
    vcache_.emplace(key, v);
    return v;
  }

  vecd<2> gradient(const vecd<2>& p) const override {
    auto key = point_key(p);
    auto it = gcache_.find(key);
    if (it != gcache_.end()) return it->second;
    auto gr = wos_gradient(*g, p, gradient_walks, mix(seed, 0x67726164u, key), data, cfg);
    gcache_.emplace(key, gr);
    return gr;
  }
  const char* kind() const override { return "mc"; }

 private:
  using key_t = std::pair<uint64_t, uint64_t>;
  static key_t point_key(const vecd<2>& p) {
    uint64_t a, b;
    std::memcpy(&a, &p[0], 8);
    std::memcpy(&b, &p[1], 8);
    return {a, b};
  }
  static uint64_t mix(uint64_t s, uint64_t tag, key_t k) {
    return splitmix64(s ^ splitmix64(tag ^ splitmix64(k.first ^ splitmix64(k.second))));
  }
  mutable std::map<key_t, double> vcache_;
  mutable std::map<key_t, vecd<2>> gcache_;
};

// A centered unit hat bump of half-width w: data 1 at x = c, zero outside
// [c - w, c + w].
inline field_ptr<2> make_bump(double c, double w) {
  return std::make_shared<hat_field2>(std::vector<double>{c - w, c, c + w},
                                      std::vector<double>{0, 1, 0});
}

}  // namespace rvl
