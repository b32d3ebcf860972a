#pragma once

// Walk-on-spheres sampling of harmonic measure.  From x, repeatedly jump to
// a uniform point on the largest ball centered at the current position that
// stays inside the domain; once within the absorption shell, project to the
// nearest boundary point.  The exit point is then distributed (up to the
// shell bias) by the harmonic measure of the domain seen from x.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "geometry.hpp"
#include "rng.hpp"

namespace rvl {

struct max_steps_exceeded : std::runtime_error {
  max_steps_exceeded() : std::runtime_error("walk did not reach the boundary shell") {}
};

struct wos_config {
  double shell = 1e-4;      // absorption distance, in absolute units
  int max_steps = 200000;
};

template <int D>
struct wos_exit {
  vecd<D> point;  // on the boundary graph
  int steps;
};

template <int D>
wos_exit<D> wos_sample(const lipschitz_graph<D>& g, vecd<D> x, const wos_config& cfg,
                       std::mt19937_64& rng) {
  for (int step = 0; step < cfg.max_steps; ++step) {
    auto nb = nearest_boundary(g, x);
    if (nb.dist <= cfg.shell) return {nb.point, step};
    vecd<D> dir = unit_sphere_dir<D>(rng);
    for (int i = 0; i < D; ++i) x[i] += nb.dist * dir[i];
  }
  throw max_steps_exceeded();
}

// Histogram of exit base coordinates over contiguous cells [breaks[j], breaks[j+1]).
// Exits beyond the break range land in the tail count.  Deterministic in
// (root_seed, walk index); walk i uses its own generator.
struct measure_estimate {
  std::vector<double> mass;  // per cell, sums with tail to 1
  double tail = 0;
  std::vector<double> se;    // binomial standard error per cell
  std::uint64_t walks = 0;
  double mean_steps = 0;
};

inline measure_estimate estimate_harmonic_measure(const lipschitz_graph<2>& g, const vecd<2>& x,
                                                  const std::vector<double>& breaks,
                                                  std::uint64_t walks, std::uint64_t root_seed,
                                                  const wos_config& cfg = {}) {
  if (breaks.size() < 2) throw std::invalid_argument("measure: need at least one cell");
  std::vector<std::uint64_t> counts(breaks.size() - 1, 0);
  std::uint64_t tail = 0;
  double steps_total = 0;
  for (std::uint64_t i = 0; i < walks; ++i) {
    auto rng = walk_rng(root_seed, i);
    auto exit = wos_sample<2>(g, x, cfg, rng);
    double t = exit.point[0];
    steps_total += exit.steps;
    if (t < breaks.front() || t >= breaks.back()) {
      ++tail;
      continue;
    }
    std::size_t j = std::upper_bound(breaks.begin(), breaks.end(), t) - breaks.begin() - 1;
    if (j >= counts.size()) j = counts.size() - 1;
    ++counts[j];
  }
  measure_estimate out;
  out.walks = walks;
  out.mass.resize(counts.size());
  out.se.resize(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) {
    double p = double(counts[j]) / double(walks);
    out.mass[j] = p;
    out.se[j] = std::sqrt(p * (1 - p) / double(walks));
  }
  out.tail = double(tail) / double(walks);
  out.mean_steps = steps_total / double(walks);
  return out;
}

// Monte Carlo value of the harmonic extension of a boundary functional:
// u(x) = E[f(exit)].  f takes the exit base coordinate.
template <typename F>
double wos_value(const lipschitz_graph<2>& g, const vecd<2>& x, std::uint64_t walks,
                 std::uint64_t root_seed, F&& f, const wos_config& cfg = {}) {
  std::vector<double> vals(walks);
  for (std::uint64_t i = 0; i < walks; ++i) {
    auto rng = walk_rng(root_seed, i);
    vals[i] = f(wos_sample<2>(g, x, cfg, rng).point[0]);
  }
  return chunked_sum(vals) / double(walks);
}

// Gradient of the harmonic extension at c, estimated from the sphere mean:
// grad u(c) = (d / R^2) E[u(Z) (Z - c)] over Z uniform on the sphere of
// radius R inside the domain.  Each u(Z) is itself an unbiased continuation
// of the same walk, so the product is unbiased.  Antithetic pairing (Z and
// its reflection) cancels the leading variance term.
template <typename F>
vecd<2> wos_gradient(const lipschitz_graph<2>& g, const vecd<2>& c, std::uint64_t pairs,
                     std::uint64_t root_seed, F&& f, const wos_config& cfg = {}) {
  double R = nearest_boundary(g, c).dist * 0.95;
  if (!(R > 0)) throw std::domain_error("gradient: start too close to the boundary");
  std::vector<double> gx(pairs), gy(pairs);
  for (std::uint64_t i = 0; i < pairs; ++i) {
    auto rng = walk_rng(root_seed, i);
    vecd<2> dir = unit_sphere_dir<2>(rng);
    double contrib[2] = {0, 0};
    for (int s = 0; s < 2; ++s) {
      vecd<2> z{c[0] + R * dir[0], c[1] + R * dir[1]};
      double uz = f(wos_sample<2>(g, z, cfg, rng).point[0]);
      contrib[0] += uz * (z[0] - c[0]);
      contrib[1] += uz * (z[1] - c[1]);
      dir[0] = -dir[0];
      dir[1] = -dir[1];
    }
    gx[i] = contrib[0] / 2;
    gy[i] = contrib[1] / 2;
  }
  double scale = 2.0 / (R * R);  // d = 2
  return {scale * chunked_sum(gx) / double(pairs), scale * chunked_sum(gy) / double(pairs)};
}

}  // namespace rvl
