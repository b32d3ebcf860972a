#pragma once

// Boundary mesh for a graph domain: a uniform core of cells flanked by
// geometrically growing cells out to a truncation radius, with cell masses
// under the harmonic measure seen from the reference pole z0.  Masses come
// from the exact Cauchy law on a flat boundary, or from walk-on-spheres
// counts on a general graph.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rvl/geometry.hpp"
#include "rvl/halfspace.hpp"
#include "rvl/wos.hpp"

namespace rvl {

struct mesh_params {
  double h0 = 0.01;         // core cell width
  double core_half = 2.0;   // half-width of the uniform zone
  double growth = 1.05;     // width ratio between consecutive outer cells
  double R_trunc = 2400.0;  // truncation radius
};

inline mesh_params refine(const mesh_params& p) {
  return {p.h0 / 2, p.core_half, 1 + (p.growth - 1) / 2, p.R_trunc * 2};
}

// Cells with mass at or below this are excluded from kernel norms.
inline constexpr double kZeroWeightFloor = 1e-15;

struct boundary_mesh {
  mesh_params params;
  lipschitz_graph<2> graph;
  vecd<2> z0{0, 1};
  std::vector<double> breaks;   // cell edges along the base coordinate
  std::vector<double> t;        // cell centers along the base coordinate
  std::vector<vecd<2>> nodes;   // cell centers lifted onto the graph
  std::vector<double> w;        // harmonic-measure cell masses from z0
  std::vector<double> se;       // per-cell standard error (zero for oracle)
  double tail = 0;              // mass beyond the truncation radius
  std::string provenance;       // "oracle" or "mc"
  std::uint64_t seed = 0, walks = 0;

  std::size_t size() const { return t.size(); }
  bool live(std::size_t j) const { return w[j] > kZeroWeightFloor; }

  // Indices of cells whose center base coordinate lies within [-half, half].
  std::vector<std::size_t> core(double half = 1.0) const {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < t.size(); ++j)
      if (std::abs(t[j]) <= half) idx.push_back(j);
    return idx;
  }
};

inline std::vector<double> make_breaks(const mesh_params& p) {
  if (!(p.h0 > 0 && p.core_half > 0 && p.growth > 1 && p.R_trunc > p.core_half))
    throw std::invalid_argument("mesh: need h0 > 0, growth > 1, R_trunc > core_half");
  long n_core = std::lround(2 * p.core_half / p.h0);
  if (n_core < 2) throw std::invalid_argument("mesh: core must contain at least two cells");
  std::vector<double> right;  // edge positions beyond +core_half
  double pos = p.core_half, width = p.h0;
  while (pos < p.R_trunc) {
    width *= p.growth;
    pos += width;
    right.push_back(pos);
  }
  std::vector<double> breaks;
  breaks.reserve(2 * right.size() + std::size_t(n_core) + 1);
  for (std::size_t k = right.size(); k-- > 0;) breaks.push_back(-right[k]);
  for (long i = 0; i <= n_core; ++i)
    breaks.push_back(-p.core_half + double(i) * (2 * p.core_half / double(n_core)));
  for (double e : right) breaks.push_back(e);
  return breaks;
}

// kappa-style cell masses seen from an arbitrary interior point, exact flat
// law.  Shared by mesh construction and by measures like omega^{pole}.
inline std::vector<double> oracle_cell_masses(const std::vector<double>& breaks,
                                              const vecd<2>& pole) {
  std::vector<double> m(breaks.size() - 1);
  for (std::size_t j = 0; j + 1 < breaks.size(); ++j)
    m[j] = interval_mass(pole[0], pole[1], breaks[j], breaks[j + 1]);
  return m;
}

inline boundary_mesh build_mesh(const lipschitz_graph<2>& g, const mesh_params& p,
                                const std::string& provenance = "oracle",
                                std::uint64_t seed = 1, std::uint64_t walks = 200000,
                                const wos_config& cfg = {}) {
  boundary_mesh m;
  m.params = p;
  m.graph = g;
  m.breaks = make_breaks(p);
  std::size_t n = m.breaks.size() - 1;
  m.t.resize(n);
  m.nodes.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    m.t[j] = (m.breaks[j] + m.breaks[j + 1]) / 2;
    m.nodes[j] = {m.t[j], g.phi(m.t[j])};
  }
  m.provenance = provenance;
  if (provenance == "oracle") {
    if (!g.flat()) throw std::invalid_argument("mesh: oracle masses need a flat boundary");
    m.w = oracle_cell_masses(m.breaks, m.z0);
    m.se.assign(n, 0.0);
    double sum = 0;
    for (double v : m.w) sum += v;
    m.tail = 1 - sum;
  } else if (provenance == "mc") {
    auto est = estimate_harmonic_measure(g, m.z0, m.breaks, walks, seed, cfg);
    m.w = est.mass;
    m.se = est.se;
    m.tail = est.tail;
    m.seed = seed;
    m.walks = walks;
  } else {
    throw std::invalid_argument("mesh: provenance must be oracle or mc");
  }
  return m;
}

// Indices of cells whose lifted center lies in the closed ball B(c, r).
inline std::vector<std::size_t> surface_ball(const boundary_mesh& m, const vecd<2>& c,
                                             double r) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < m.size(); ++j)
    if (norm(sub(m.nodes[j], c)) <= r) idx.push_back(j);
  return idx;
}

}  // namespace rvl
