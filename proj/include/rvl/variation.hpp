// Vertical-variation functional, dual densities, the limit measure they
// generate, low-variation point search, and ball-mass scaling fits.
//
// V(x) integrates (K_y ||grad u at 2y||)(x) over y in [delta, 1].  On a flat
// boundary the kernel rows are exact, so V is a deterministic quadrature; on
// a general graph the rows come from walk sampling and V carries a recorded
// standard error.  The dual density gamma of a source measure kappa is the
// exact transpose action of a long product, and nu is its value at the
// smallest resolved height.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rvl/fitting.hpp"
#include "rvl/omega.hpp"
#include "rvl/wos.hpp"

namespace rvl {

struct grid_too_coarse : std::runtime_error {
  explicit grid_too_coarse(const std::string& w) : std::runtime_error(w) {}
};
struct non_positive_density : std::runtime_error {
  explicit non_positive_density(const std::string& w) : std::runtime_error(w) {}
};
struct not_cauchy : std::runtime_error {
  explicit not_cauchy(const std::string& w) : std::runtime_error(w) {}
};
struct empty_ball : std::runtime_error {
  explicit empty_ball(const std::string& w) : std::runtime_error(w) {}
};
struct insufficient_radii : std::runtime_error {
  explicit insufficient_radii(const std::string& w) : std::runtime_error(w) {}
};

// Doubling blocks [delta, 2 delta], ..., [1/2, 1], ascending.  The blocks for
// a smaller cut extend the blocks for a larger one, so partial sums give the
// profile at any intermediate cut for free.
inline std::vector<std::pair<double, double>> variation_blocks(double delta) {
  if (!(delta > 0 && delta < 0.25))
    throw std::invalid_argument("variation: need 0 < delta < 1/4");
  std::vector<std::pair<double, double>> blocks;
  double hi = 1.0;
  while (hi > delta + 1e-15) {
    double lo = std::max(delta, hi / 2);
    blocks.emplace_back(lo, hi);
    hi = lo;
  }
  std::reverse(blocks.begin(), blocks.end());
  return blocks;
}

struct variation_profile_result {
  double delta = 0;
  int per_block = 0;
  std::vector<std::pair<double, double>> blocks;
  std::vector<Eigen::VectorXd> block_v;  // per-block contribution to V
  Eigen::VectorXd V;                     // total at delta
  Eigen::VectorXd radial_var;            // integral of ||grad u|| along the lift
  Eigen::VectorXd lower;                 // integral of ||grad u at 3y||, the floor for V
  double min_slack = 0;                  // min over nodes of V - lower

  // Profile at a coarser cut: drop the blocks below it.
  Eigen::VectorXd v_at(double cut) const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(V.size());
    for (std::size_t b = 0; b < blocks.size(); ++b)
      if (blocks[b].first >= cut - 1e-12) s += block_v[b];
    return s;
  }
};

namespace detail {

inline variation_profile_result variation_pass(kernel_workspace& ws, double delta,
                                               int per_block) {
  const auto& m = ws.mesh();
  const auto n = Eigen::Index(m.size());
  variation_profile_result out;
  out.delta = delta;
  out.per_block = per_block;
  out.blocks = variation_blocks(delta);
  out.V = Eigen::VectorXd::Zero(n);
  out.radial_var = Eigen::VectorXd::Zero(n);
  out.lower = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g2(n), g1(n), g3(n);
  for (auto [lo, hi] : out.blocks) {
    Eigen::VectorXd bv = Eigen::VectorXd::Zero(n);
    const double h = (hi - lo) / per_block;
    for (int i = 0; i < per_block; ++i) {
      const double y = lo + (i + 0.5) * h;
      for (Eigen::Index j = 0; j < n; ++j) {
        g1[j] = norm(ws.field().gradient(m.graph.lift(m.nodes[std::size_t(j)], y)));
        g2[j] = norm(ws.field().gradient(m.graph.lift(m.nodes[std::size_t(j)], 2 * y)));
        g3[j] = norm(ws.field().gradient(m.graph.lift(m.nodes[std::size_t(j)], 3 * y)));
      }
      bv += h * ws.apply(ws.k(y), g2);
      out.radial_var += h * g1;
      out.lower += h * g3;
    }
    out.block_v.push_back(bv);
    out.V += bv;
  }
  out.min_slack = (out.V - out.lower).minCoeff();
  return out;
}

}  // namespace detail

// Exact-row profile over the whole mesh (flat boundary).  With check_halving
// the grid is doubled once and a relative change above 5% is rejected.
inline variation_profile_result variation_profile(kernel_workspace& ws, double delta,
                                                  int per_block = 4,
                                                  bool check_halving = false) {
  if (per_block < 1) throw std::invalid_argument("variation: per_block >= 1");
  variation_profile_result out = detail::variation_pass(ws, delta, per_block);
  if (check_halving) {
    variation_profile_result fine = detail::variation_pass(ws, delta, 2 * per_block);
    const double scale = std::max(fine.V.maxCoeff(), 1e-12);
    const double change = (out.V - fine.V).cwiseAbs().maxCoeff() / scale;
    if (change > 0.05)
      throw grid_too_coarse("variation grid: halving moved V by " + std::to_string(change));
  }
  return out;
}

// The same value through the composed kernel instead of the gradient trace:
// relative gap between applying the composed operator to the level-y trace
// and applying the plain kernel to the gradient-norm trace at 2y.
inline double b_route_gap(kernel_workspace& ws, double y) {
  const auto& m = ws.mesh();
  Eigen::VectorXd psi = level_trace(ws, y);
  Eigen::VectorXd g2(Eigen::Index(m.size()));
  for (std::size_t j = 0; j < m.size(); ++j)
    g2[Eigen::Index(j)] = norm(ws.field().gradient(m.graph.lift(m.nodes[j], 2 * y)));
  Eigen::VectorXd via_b = ws.apply(ws.b(y), psi);
  Eigen::VectorXd via_k = ws.apply(ws.k(y), g2);
  double num = 0, den = 0;
  for (std::size_t j : m.core()) {
    num = std::max(num, std::abs(via_b[Eigen::Index(j)] - via_k[Eigen::Index(j)]));
    den = std::max(den, std::abs(via_k[Eigen::Index(j)]));
  }
  if (!(den > 0)) throw std::domain_error("b_route_gap: vanishing comparison trace");
  return num / den;
}

// Sampled-row profile on selected nodes for a general boundary.  Kernel rows
// are walk estimates; gradient norms come from the field (cached when the
// field is itself walk-backed).  The recorded standard error covers the row
// sampling; field noise is the caller's budget.
struct mc_variation_opts {
  int per_block = 3;
  std::uint64_t row_walks = 2000;
  std::uint64_t seed = 1;
  wos_config cfg{};
};

struct mc_variation_result {
  std::vector<std::size_t> nodes;
  std::vector<double> V, se;
  double delta = 0;
};

inline mc_variation_result variation_profile_mc(const boundary_mesh& m,
                                                const harmonic_field<2>& u,
                                                const std::vector<std::size_t>& nodes,
                                                double delta,
                                                const mc_variation_opts& o = {}) {
  if (o.per_block < 1) throw std::invalid_argument("variation: per_block >= 1");
  if (nodes.empty()) throw std::invalid_argument("variation: no nodes selected");
  auto blocks = variation_blocks(delta);
  mc_variation_result out;
  out.nodes = nodes;
  out.delta = delta;
  out.V.assign(nodes.size(), 0.0);
  out.se.assign(nodes.size(), 0.0);
  std::vector<double> var(nodes.size(), 0.0);
  std::size_t yi = 0;
  for (auto [lo, hi] : blocks) {
    const double h = (hi - lo) / o.per_block;
    for (int i = 0; i < o.per_block; ++i, ++yi) {
      const double y = lo + (i + 0.5) * h;
      std::vector<double> g2(m.size(), -1.0);  // lazy per-cell gradient norms
      for (std::size_t xi = 0; xi < nodes.size(); ++xi) {
        auto est = estimate_harmonic_measure(
            m.graph, m.graph.lift(m.nodes[nodes[xi]], y), m.breaks, o.row_walks,
            splitmix64(o.seed ^ splitmix64(xi * 0x9e3779b9ull + yi)), o.cfg);
        double s = 0, v = 0;
        for (std::size_t j = 0; j < m.size(); ++j) {
          if (est.mass[j] <= 0 && est.se[j] <= 0) continue;
          if (g2[j] < 0) g2[j] = norm(u.gradient(m.graph.lift(m.nodes[j], 2 * y)));
          s += est.mass[j] * g2[j];
          v += est.se[j] * est.se[j] * g2[j] * g2[j];
        }
        out.V[xi] += h * s;
        var[xi] += h * h * v;
      }
    }
  }
  for (std::size_t xi = 0; xi < nodes.size(); ++xi) out.se[xi] = std::sqrt(var[xi]);
  return out;
}

// Spread per-node values into a full-length vector, NaN where unevaluated.
inline std::vector<double> scatter_values(std::size_t n, const std::vector<std::size_t>& idx,
                                          const std::vector<double>& vals) {
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = vals[i];
  return out;
}

// Low-variation point search: the node of a surface ball minimizing V,
// normalized by the field high above that node.  The transfer factor relates
// the field above the ball center to the field above the minimizer.
struct bourgain_report {
  vecd<2> center{};
  double radius = 0;
  std::vector<std::size_t> ball;
  std::size_t argmin = 0;
  double v_min = 0;
  double u_anchor = 0;
  double ratio = 0;
  double transfer_factor = 0;
};

template <class UEval>
bourgain_report bourgain_search(const boundary_mesh& m, const std::vector<double>& V,
                                const vecd<2>& center, double radius, double y_anchor,
                                UEval&& u_at) {
  if (V.size() != m.size()) throw std::invalid_argument("search: V is per mesh node");
  if (!(y_anchor > 0)) throw std::invalid_argument("search: y_anchor > 0");
  bourgain_report rep;
  rep.center = center;
  rep.radius = radius;
  rep.ball = surface_ball(m, center, radius);
  bool found = false;
  for (std::size_t j : rep.ball) {
    if (std::isnan(V[j])) continue;
    if (!found || V[j] < rep.v_min) {
      rep.v_min = V[j];
      rep.argmin = j;
      found = true;
    }
  }
  if (!found) throw empty_ball("search: no evaluated node in the ball");
  rep.u_anchor = u_at(m.graph.lift(m.nodes[rep.argmin], y_anchor));
  rep.ratio = rep.u_anchor > 0 ? rep.v_min / rep.u_anchor
                               : std::numeric_limits<double>::infinity();
  double u_center = u_at(m.graph.lift(center, y_anchor));
  rep.transfer_factor = rep.u_anchor > 0 ? u_center / rep.u_anchor
                                         : std::numeric_limits<double>::infinity();
  return rep;
}

// A nonnegative weight per mesh cell.  density, when present, is relative to
// the cell weights (the pole measure), so weight = density * w cellwise.
struct mesh_measure {
  std::vector<double> weight;
  std::vector<double> density;
  std::string provenance;
  double window_min = 0;  // smallest density over the certified window

  double mass() const { return std::accumulate(weight.begin(), weight.end(), 0.0); }
};

// Exit law of a pole on the mesh cells (exact on a flat boundary).
inline mesh_measure kappa_from_pole(const boundary_mesh& m, const vecd<2>& pole,
                                    bool normalize = true) {
  if (!m.graph.flat())
    throw std::invalid_argument("kappa: exact pole masses need a flat boundary");
  mesh_measure k;
  k.weight = oracle_cell_masses(m.breaks, pole);
  k.provenance = "pole";
  if (normalize) {
    double s = k.mass();
    if (!(s > 0)) throw std::domain_error("kappa: pole mass vanished on the mesh");
    for (double& v : k.weight) v /= s;
  }
  return k;
}

inline mesh_measure kappa_from_pole_mc(const boundary_mesh& m, const vecd<2>& pole,
                                       std::uint64_t walks, std::uint64_t seed,
                                       bool normalize = true, const wos_config& cfg = {}) {
  auto est = estimate_harmonic_measure(m.graph, pole, m.breaks, walks, seed, cfg);
  mesh_measure k;
  k.weight = est.mass;
  k.provenance = "pole_mc";
  if (normalize) {
    double s = k.mass();
    if (!(s > 0)) throw std::domain_error("kappa: pole mass vanished on the mesh");
    for (double& v : k.weight) v /= s;
  }
  return k;
}

inline mesh_measure kappa_point(const boundary_mesh& m, std::size_t node) {
  if (node >= m.size()) throw std::invalid_argument("kappa: node out of range");
  mesh_measure k;
  k.weight.assign(m.size(), 0.0);
  k.weight[node] = 1.0;
  k.provenance = "point";
  return k;
}

// Transpose action of a long product on a source measure: the density of the
// pushed-forward measure against the pole measure.  Positivity is enforced on
// the certified window (live cells in the inner half of the truncation); a
// violation there means the perturbation strength is too large.
inline mesh_measure gamma_density(const kernel_workspace& ws, const kernel_matrix& om,
                                  const mesh_measure& kappa) {
  const auto& m = ws.mesh();
  if (kappa.weight.size() != m.size())
    throw std::invalid_argument("gamma: kappa is per mesh cell");
  const auto n = Eigen::Index(m.size());
  Eigen::VectorXd kv(n);
  for (Eigen::Index i = 0; i < n; ++i) kv[i] = kappa.weight[std::size_t(i)];
  Eigen::VectorXd g = om.M.transpose() * kv;
  mesh_measure out;
  out.provenance = "gamma";
  out.density.resize(m.size());
  out.weight.resize(m.size());
  out.window_min = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m.size(); ++j) {
    out.density[j] = g[Eigen::Index(j)];
    out.weight[j] = g[Eigen::Index(j)] * m.w[j];
    if (ws.norm_col(j)) {
      out.window_min = std::min(out.window_min, out.density[j]);
      if (!(out.density[j] > 0))
        throw non_positive_density("gamma: density " + std::to_string(out.density[j]) +
                                   " at cell " + std::to_string(j));
    }
  }
  return out;
}

// Finite-sum duality: pairing the operator image with the source measure
// equals pairing the test vector with the dual density.  Exact up to
// rounding; returns the relative gap.
inline double duality_gap(const kernel_workspace& ws, const kernel_matrix& om,
                          const mesh_measure& kappa, const mesh_measure& gamma,
                          const Eigen::VectorXd& alpha) {
  const auto& m = ws.mesh();
  Eigen::VectorXd oa = ws.apply(om, alpha);
  double lhs = 0, rhs = 0;
  for (std::size_t j = 0; j < m.size(); ++j) {
    lhs += kappa.weight[j] * oa[Eigen::Index(j)];
    rhs += gamma.weight[j] * alpha[Eigen::Index(j)];
  }
  double scale = std::max(std::abs(lhs), std::abs(rhs));
  return scale > 0 ? std::abs(lhs - rhs) / scale : 0.0;
}

// Ten bounded test vectors: unit hats at five centers, two widths.
inline std::vector<Eigen::VectorXd> default_test_functions(const boundary_mesh& m) {
  std::vector<Eigen::VectorXd> out;
  for (double w : {0.5, 1.0})
    for (double c : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      Eigen::VectorXd a(Eigen::Index(m.size()));
      for (std::size_t j = 0; j < m.size(); ++j)
        a[Eigen::Index(j)] = std::max(0.0, 1.0 - std::abs(m.t[j] - c) / w);
      out.push_back(std::move(a));
    }
  return out;
}

// Dual densities down a decreasing height sequence; the measure at the last
// height stands in for the limit.  Test integrals must settle: the last
// consecutive gap of every test function is required to be below tol.
struct nu_report {
  std::vector<double> y_seq;
  std::vector<double> masses;
  std::vector<double> window_mins;
  std::vector<std::vector<double>> integrals;  // [height][test]
  std::vector<double> final_gaps;              // per test
  mesh_measure nu;
  bool cauchy = false;
};

inline nu_report nu_approx(kernel_workspace& ws, const mesh_measure& kappa, double eps,
                           const std::vector<double>& y_seq, int link_depth,
                           const std::vector<Eigen::VectorXd>& tests, double tol,
                           const quad_opts& q = {}) {
  if (y_seq.empty()) throw std::invalid_argument("nu: empty height sequence");
  for (std::size_t i = 0; i + 1 < y_seq.size(); ++i)
    if (!(y_seq[i] > y_seq[i + 1])) throw std::invalid_argument("nu: heights must decrease");
  if (!(y_seq.front() < 1 && y_seq.back() > 0))
    throw std::invalid_argument("nu: heights must lie in (0, 1)");
  if (tests.empty()) throw std::invalid_argument("nu: need test functions");

  std::vector<double> ladder{1.0};
  ladder.insert(ladder.end(), y_seq.begin(), y_seq.end());
  omega_chain_result chain = omega_chain(ws, ladder, eps, link_depth, q, true);

  nu_report rep;
  rep.y_seq = y_seq;
  for (std::size_t r = 0; r < chain.omegas.size(); ++r) {
    mesh_measure g = gamma_density(ws, chain.omegas[r], kappa);
    rep.masses.push_back(g.mass());
    rep.window_mins.push_back(g.window_min);
    std::vector<double> row;
    for (const auto& a : tests) {
      double s = 0;
      for (std::size_t j = 0; j < g.weight.size(); ++j)
        s += g.weight[j] * a[Eigen::Index(j)];
      row.push_back(s);
    }
    rep.integrals.push_back(std::move(row));
    if (r + 1 == chain.omegas.size()) {
      g.provenance = "nu";
      rep.nu = std::move(g);
    }
  }
  for (std::size_t t = 0; t < tests.size(); ++t) {
    double gap = 0;
    if (rep.integrals.size() >= 2) {
      auto last = rep.integrals.size() - 1;
      gap = std::abs(rep.integrals[last][t] - rep.integrals[last - 1][t]);
    }
    rep.final_gaps.push_back(gap);
    if (gap > tol)
      throw not_cauchy("nu: test integral " + std::to_string(t) + " still moving by " +
                       std::to_string(gap));
  }
  rep.cauchy = true;
  return rep;
}

// Both sides of the variation budget: the V-mass of nu against the source
// mass of the level-1 trace, and the dimensionless constant they fit.
struct budget_report {
  double eps = 0;
  double lhs = 0;       // integral of V against nu
  double rhs = 0;       // integral of the level-1 trace against kappa
  double ratio = 0;     // lhs / rhs; nearly flat in eps since both sides are
  double fitted_c = 0;  // eps * ratio, the smallest constant closing the bound
};

inline budget_report budget_check(kernel_workspace& ws, const mesh_measure& nu,
                                  const mesh_measure& kappa,
                                  const variation_profile_result& prof, double eps) {
  const auto& m = ws.mesh();
  if (nu.weight.size() != m.size() || kappa.weight.size() != m.size())
    throw std::invalid_argument("budget: measures are per mesh cell");
  budget_report rep;
  rep.eps = eps;
  for (std::size_t j = 0; j < m.size(); ++j) rep.lhs += nu.weight[j] * prof.V[Eigen::Index(j)];
  Eigen::VectorXd u1 = level_trace(ws, 1.0);
  for (std::size_t j = 0; j < m.size(); ++j) rep.rhs += kappa.weight[j] * u1[Eigen::Index(j)];
  if (!(rep.rhs > 0)) throw std::domain_error("budget: vanishing level-1 mass");
  rep.ratio = rep.lhs / rep.rhs;
  rep.fitted_c = eps * rep.ratio;
  return rep;
}

// Least-squares slope of log ball mass against log radius.  Radii are usable
// when the ball holds at least min_cells nodes and carries positive mass.
struct exponent_report {
  std::vector<double> radii, masses;  // usable pairs
  std::vector<double> skipped;        // radii dropped
  fit_line fit;
};

inline exponent_report scaling_exponent(const boundary_mesh& m, const mesh_measure& nu,
                                        const vecd<2>& center, const std::vector<double>& radii,
                                        std::size_t min_cells = 3) {
  if (nu.weight.size() != m.size())
    throw std::invalid_argument("exponent: measure is per mesh cell");
  exponent_report rep;
  for (double r : radii) {
    auto ball = surface_ball(m, center, r);
    double mass = 0;
    for (std::size_t j : ball) mass += nu.weight[j];
    if (ball.size() < min_cells || !(mass > 0)) {
      rep.skipped.push_back(r);
      continue;
    }
    rep.radii.push_back(r);
    rep.masses.push_back(mass);
  }
  if (rep.radii.size() < 4)
    throw insufficient_radii("exponent: only " + std::to_string(rep.radii.size()) +
                             " usable radii");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < rep.radii.size(); ++i) {
    lx.push_back(std::log(rep.radii[i]));
    ly.push_back(std::log(rep.masses[i]));
  }
  rep.fit = linfit(lx, ly);
  return rep;
}

}  // namespace rvl
