#pragma once
// Limits of the eps-perturbed smoothing products over refining partitions of
// a height segment.  A partition of [lo, hi] turns into a product of
// one-piece factors (smoothing kernel minus eps times the segment b-integral),
// lower pieces applied first.  Refining the partition drives the product to a
// limit object; this header builds the products, tracks their Cauchy
// increments, and packages the checks the limit must satisfy: row mass,
// window positivity, splice consistency across a shared breakpoint, trace
// stability at comparable heights, and the integral form of the height
// derivative.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rvl/kernels.hpp"
#include "rvl/partition.hpp"

namespace rvl {

struct no_convergence : std::runtime_error {
  explicit no_convergence(const std::string& what) : std::runtime_error(what) {}
};

struct nonpositive_trace : std::runtime_error {
  nonpositive_trace() : std::runtime_error("trace check: level values must be positive") {}
};

struct nonpositive_kernel : std::runtime_error {
  nonpositive_kernel() : std::runtime_error("envelope fit: product has a nonpositive window entry") {}
};

struct omega_config {
  double eps = 0.05;
  double tol = 5e-4;       // Cauchy threshold on successive-product increments
  int n_max = 7;           // deepest refinement level
  bool stop_early = false; // stop once an increment clears tol
  quad_opts quad{};
};

// Partition pieces as double intervals; consecutive pieces share an endpoint
// bit for bit because every break is converted exactly once.
using piece_list = std::vector<std::pair<double, double>>;

inline piece_list to_pieces(const partition& p) {
  std::vector<rational> rb = p.breaks();
  piece_list out;
  out.reserve(rb.size() - 1);
  double prev = rb.front().to_double();
  for (std::size_t i = 1; i < rb.size(); ++i) {
    double next = rb[i].to_double();
    out.emplace_back(prev, next);
    prev = next;
  }
  return out;
}

inline piece_list dyadic_pieces(double lo, double hi, int depth) {
  if (depth < 0 || depth > 30) throw std::invalid_argument("dyadic_pieces: depth out of range");
  if (!(lo < hi)) throw std::invalid_argument("dyadic_pieces: need lo < hi");
  std::int64_t parts = std::int64_t(1) << depth;
  piece_list out;
  out.reserve(std::size_t(parts));
  double prev = lo;
  for (std::int64_t k = 1; k <= parts; ++k) {
    double next = k == parts ? hi : lo + (hi - lo) * (double(k) / double(parts));
    out.emplace_back(prev, next);
    prev = next;
  }
  return out;
}

// Second refining sequence: left half bisected one level deeper than the
// right half.  Refining in n, weakly (3/2)-regular at every depth, and its
// interior breaks disagree with uniform bisection at equal depth, so
// agreement of the two limits is evidence the limit does not depend on the
// sequence.
inline partition lopsided_refinement(const segment& d, int n) {
  if (n < 0) throw std::invalid_argument("lopsided_refinement: n >= 0");
  if (n == 0) return partition({d});
  rational mid = d.m + d.length() / rational(2);
  partition left = make_dyadic(segment(d.m, mid), n);
  partition right = make_dyadic(segment(mid, d.M), n - 1);
  std::vector<segment> pieces = left.pieces;
  pieces.insert(pieces.end(), right.pieces.begin(), right.pieces.end());
  return partition(std::move(pieces));
}

// Product of one-piece factors over an ascending contiguous piece list,
// bottom piece innermost: the factor for an upper piece multiplies from the
// left, matching splice(lower-then-upper) composition.
inline kernel_matrix iterate_pi(kernel_workspace& ws, const piece_list& pieces, double eps,
                                const quad_opts& q = {}) {
  if (pieces.empty()) throw std::invalid_argument("iterate_pi: empty piece list");
  for (std::size_t k = 0; k + 1 < pieces.size(); ++k)
    if (pieces[k].second != pieces[k + 1].first)
      throw std::invalid_argument("iterate_pi: pieces must be ascending and contiguous");
  kernel_matrix P = ws.omega_tilde(pieces.front().first, pieces.front().second, eps, q);
  for (std::size_t k = 1; k < pieces.size(); ++k) {
    kernel_matrix f = ws.omega_tilde(pieces[k].first, pieces[k].second, eps, q);
    P = ws.compose(f, P);
  }
  return P;
}

// Deflated product: the eps-product minus the matching-depth zero-eps
// product, plus the directly assembled smoothing kernel at the segment
// length.  Composing many sub-cell-height factors drifts at mesh scale even
// with eps = 0; that drift is identical in both folds and cancels in the
// difference, so the result isolates the perturbation structure while the
// added-back direct kernel carries no composition error at all.
inline kernel_matrix iterate_pi_deflated(kernel_workspace& ws, const piece_list& pieces,
                                         double eps, const quad_opts& q = {}) {
  if (pieces.empty()) throw std::invalid_argument("iterate_pi: empty piece list");
  for (std::size_t k = 0; k + 1 < pieces.size(); ++k)
    if (pieces[k].second != pieces[k + 1].first)
      throw std::invalid_argument("iterate_pi: pieces must be ascending and contiguous");
  kernel_matrix P = ws.omega_tilde(pieces.front().first, pieces.front().second, eps, q);
  kernel_matrix Z = ws.k(pieces.front().second - pieces.front().first);
  for (std::size_t k = 1; k < pieces.size(); ++k) {
    P = ws.compose(ws.omega_tilde(pieces[k].first, pieces[k].second, eps, q), P);
    Z = ws.compose(ws.k(pieces[k].second - pieces[k].first), Z);
  }
  const double len = pieces.back().second - pieces.front().first;
  kernel_matrix out;
  out.height = len;
  out.M = ws.k(len).M + (P.M - Z.M);
  return out;
}

inline double window_min(const kernel_workspace& ws, const Eigen::MatrixXd& M,
                         const std::vector<std::size_t>& rows) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i : rows)
    for (std::size_t j = 0; j < ws.mesh().size(); ++j)
      if (ws.norm_col(j)) m = std::min(m, M(Eigen::Index(i), Eigen::Index(j)));
  return m;
}

struct omega_report {
  segment seg;
  double eps = 0;
  std::vector<int> depths;        // recorded levels, starting at 0
  std::vector<double> increments; // distance(product at depths[i+1], at depths[i])
  std::vector<double> ratios;     // increments[i] / increments[i-1]
  std::vector<double> row_dev;    // max core-row |mass - 1| per level
  std::vector<double> l1_norms;   // max core-row weighted-L1 norm per level
  double min_entry = 0;           // window min of the deepest product
  bool converged = false;         // last increment under tol
  kernel_matrix omega;            // deepest product
};

// Drive the product along one refining sequence of a segment.  Increments are
// measured in the reference-relative max norm over core rows and norm
// columns, reference being the plain smoothing kernel at the segment length.
inline omega_report omega_segment(kernel_workspace& ws, const segment& seg,
                                  const omega_config& cfg = {}, bool lopsided = false) {
  if (!(rational(0) < seg.m))
    throw std::domain_error("omega_segment: segment must sit above the boundary");
  omega_report rep;
  rep.seg = seg;
  rep.eps = cfg.eps;
  const double len = seg.length().to_double();
  const std::vector<std::size_t> core = ws.mesh().core();
  const kernel_matrix& ref = ws.k(len);
  kernel_matrix prev;
  for (int n = 0; n <= cfg.n_max; ++n) {
    partition part = lopsided ? lopsided_refinement(seg, n) : make_dyadic(seg, n);
    kernel_matrix cur = iterate_pi_deflated(ws, to_pieces(part), cfg.eps, cfg.quad);
    rep.depths.push_back(n);
    rep.row_dev.push_back(ws.core_row_residual(cur));
    rep.l1_norms.push_back(ws.l1_row_norm(cur.M, &core));
    if (n > 0) {
      double inc = ws.rel_max_norm(cur.M - prev.M, ref, &core);
      if (!rep.increments.empty() && rep.increments.back() > 0)
        rep.ratios.push_back(inc / rep.increments.back());
      rep.increments.push_back(inc);
    }
    prev = std::move(cur);
    if (!rep.increments.empty() && rep.increments.back() < cfg.tol && cfg.stop_early) break;
  }
  rep.converged = !rep.increments.empty() && rep.increments.back() < cfg.tol;
  rep.min_entry = window_min(ws, prev.M, core);
  rep.omega = std::move(prev);
  return rep;
}

inline const omega_report& require_converged(const omega_report& r) {
  if (!r.converged)
    throw no_convergence("product increments did not settle below tolerance by depth " +
                         std::to_string(r.depths.empty() ? 0 : r.depths.back()));
  return r;
}

// Run both refining sequences and compare their deepest products.
struct independence_report {
  omega_report bisection;
  omega_report lopsided;
  double discrepancy = 0;
  bool agree = false;
};

inline independence_report sequence_independence(kernel_workspace& ws, const segment& seg,
                                                 const omega_config& cfg = {}) {
  independence_report rep;
  rep.bisection = omega_segment(ws, seg, cfg, false);
  rep.lopsided = omega_segment(ws, seg, cfg, true);
  const std::vector<std::size_t> core = ws.mesh().core();
  const kernel_matrix& ref = ws.k(seg.length().to_double());
  rep.discrepancy =
      ws.rel_max_norm(rep.bisection.omega.M - rep.lopsided.omega.M, ref, &core);
  rep.agree = rep.bisection.converged && rep.lopsided.converged &&
              rep.discrepancy < 2 * cfg.tol;
  return rep;
}

// Splice check: the product over [a, c] against upper-after-lower across the
// shared break b.  The spliced matrix equals a product over the union
// partition, so the discrepancy measures sequence-tail error only.
struct splice_report {
  omega_report lower, upper, full;
  double discrepancy = 0;
  bool ok = false;
};

inline splice_report semigroup_splice(kernel_workspace& ws, const rational& a, const rational& b,
                                      const rational& c, const omega_config& cfg = {}) {
  splice_report rep;
  rep.lower = omega_segment(ws, segment(a, b), cfg);
  rep.upper = omega_segment(ws, segment(b, c), cfg);
  rep.full = omega_segment(ws, segment(a, c), cfg);
  kernel_matrix spliced = ws.compose(rep.upper.omega, rep.lower.omega);
  const std::vector<std::size_t> core = ws.mesh().core();
  const kernel_matrix& ref = ws.k((c - a).to_double());
  rep.discrepancy = ws.rel_max_norm(spliced.M - rep.full.omega.M, ref, &core);
  rep.ok = rep.lower.converged && rep.upper.converged && rep.full.converged &&
           rep.discrepancy < 2 * cfg.tol;
  return rep;
}

// Running products over [h, top] for a descending ladder of heights,
// extending downward one link at a time: the product over [h', top] is the
// product over [h, top] applied after the link product over [h', h].
struct omega_chain_result {
  double top = 0;
  std::vector<double> heights;        // lower ends, one per link
  std::vector<kernel_matrix> omegas;  // products over [heights[q], top]
};

inline omega_chain_result omega_chain(kernel_workspace& ws, const std::vector<double>& ladder,
                                      double eps, const std::vector<int>& depths,
                                      const quad_opts& q = {}, bool keep_all = true) {
  if (ladder.size() < 2) throw std::invalid_argument("omega_chain: need at least two rungs");
  if (depths.size() != ladder.size() - 1)
    throw std::invalid_argument("omega_chain: one depth per link");
  for (std::size_t i = 0; i + 1 < ladder.size(); ++i)
    if (!(ladder[i] > ladder[i + 1] && ladder[i + 1] > 0))
      throw std::invalid_argument("omega_chain: ladder must decrease and stay positive");
  omega_chain_result res;
  res.top = ladder.front();
  kernel_matrix P;
  for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
    kernel_matrix link =
        iterate_pi_deflated(ws, dyadic_pieces(ladder[i + 1], ladder[i], depths[i]), eps, q);
    P = i == 0 ? std::move(link) : ws.compose(P, link);
    res.heights.push_back(ladder[i + 1]);
    if (keep_all || i + 2 == ladder.size()) res.omegas.push_back(P);
  }
  return res;
}

inline omega_chain_result omega_chain(kernel_workspace& ws, const std::vector<double>& ladder,
                                      double eps, int depth, const quad_opts& q = {},
                                      bool keep_all = true) {
  return omega_chain(ws, ladder, eps,
                     std::vector<int>(ladder.empty() ? 0 : ladder.size() - 1, depth), q,
                     keep_all);
}

// Window minimum of the fixed-depth product across an eps grid; eps_hat is
// the largest grid value that keeps the window positive.
struct positivity_scan_result {
  std::vector<double> eps_grid;
  std::vector<double> min_entries;
  double eps_hat = 0;
};

inline positivity_scan_result positivity_scan(kernel_workspace& ws, const segment& seg,
                                              const std::vector<double>& eps_grid, int depth,
                                              const quad_opts& q = {}) {
  if (seg.length() < seg.m)
    throw std::domain_error("positivity_scan: window positivity needs |seg| >= m(seg)");
  piece_list pieces = to_pieces(make_dyadic(seg, depth));
  const std::vector<std::size_t> core = ws.mesh().core();
  positivity_scan_result res;
  res.eps_grid = eps_grid;
  for (double e : eps_grid) {
    kernel_matrix P = iterate_pi_deflated(ws, pieces, e, q);
    double m = window_min(ws, P.M, core);
    res.min_entries.push_back(m);
    if (m > 0) res.eps_hat = std::max(res.eps_hat, e);
  }
  return res;
}

// Values of the workspace field along the mesh nodes lifted by y.
inline Eigen::VectorXd level_trace(const kernel_workspace& ws, double y) {
  const auto& m = ws.mesh();
  Eigen::VectorXd psi(Eigen::Index(m.size()));
  for (std::size_t j = 0; j < m.size(); ++j)
    psi[Eigen::Index(j)] = ws.field().value(m.graph.lift(m.nodes[j], y));
  return psi;
}

// Trace stability: a level-y slice of a positive harmonic function barely
// moves under the product over a segment short relative to y.  Fits the
// smallest c with |P psi - psi| <= c (len / y) psi over core rows and checks
// the exponential envelopes with that same c.
struct phi_property_report {
  double y = 0;
  double seg_len = 0;
  double c_fit = 0;
  bool envelope_ok = false;
  double psi_min = 0;
};

inline phi_property_report phi_property(kernel_workspace& ws, const kernel_matrix& omega_seg,
                                        double seg_len, double y) {
  if (!(seg_len > 0 && y > 0)) throw std::invalid_argument("phi_property: positive scales");
  phi_property_report rep;
  rep.y = y;
  rep.seg_len = seg_len;
  Eigen::VectorXd psi = level_trace(ws, y);
  rep.psi_min = psi.minCoeff();
  if (!(rep.psi_min > 0)) throw nonpositive_trace();
  Eigen::VectorXd op = ws.apply(omega_seg, psi);
  const double x = seg_len / y;
  for (std::size_t i : ws.mesh().core()) {
    Eigen::Index ii(i);
    rep.c_fit = std::max(rep.c_fit, std::abs(op[ii] - psi[ii]) / psi[ii] / x);
  }
  const double lo_env = std::exp(-4 * rep.c_fit * x), hi_env = std::exp(2 * rep.c_fit * x);
  rep.envelope_ok = true;
  for (std::size_t i : ws.mesh().core()) {
    Eigen::Index ii(i);
    double slack = 1e-12 * psi[ii];
    if (op[ii] < lo_env * psi[ii] - slack || op[ii] > hi_env * psi[ii] + slack)
      rep.envelope_ok = false;
  }
  return rep;
}

// Quotient of the two long products [eta, top] and [y, top] applied to the
// same level-y trace; trace stability over [eta, y] keeps it near 1.
struct nested_comparison_report {
  double c_max = 0;
  double c_min = 0;
};

inline nested_comparison_report nested_height_comparison(kernel_workspace& ws, double eta,
                                                         double y, double top, double eps,
                                                         int link_depth,
                                                         const quad_opts& q = {}) {
  if (!(0 < eta && eta < y && y < top))
    throw std::invalid_argument("nested_height_comparison: need 0 < eta < y < top");
  omega_chain_result ch = omega_chain(ws, {top, y, eta}, eps, link_depth, q);
  Eigen::VectorXd psi = level_trace(ws, y);
  if (!(psi.minCoeff() > 0)) throw nonpositive_trace();
  Eigen::VectorXd shallow = ws.apply(ch.omegas[0], psi);
  Eigen::VectorXd deep = ws.apply(ch.omegas[1], psi);
  nested_comparison_report rep;
  rep.c_min = std::numeric_limits<double>::infinity();
  for (std::size_t i : ws.mesh().core()) {
    Eigen::Index ii(i);
    if (!(shallow[ii] > 0)) throw nonpositive_kernel();
    double r = deep[ii] / shallow[ii];
    rep.c_max = std::max(rep.c_max, r);
    rep.c_min = std::min(rep.c_min, r);
  }
  return rep;
}

// Entrywise exponents of the product over [y, top] against the plain
// smoothing kernel at height top - y: omega = y^{-L} k with
// L = log(omega / k) / log(1 / y).  The envelope holds with any
// c_plus >= max L (upper) and c_minus >= -min L (lower).
struct envelope_fit {
  double y = 0;
  double c_plus = 0;
  double c_minus = 0;
};

inline envelope_fit omega_vs_k(kernel_workspace& ws, const kernel_matrix& omega_y, double y,
                               double top = 1.0) {
  if (!(0 < y && y < top && y < 1)) throw std::invalid_argument("omega_vs_k: need 0 < y < min(top, 1)");
  const kernel_matrix& kk = ws.k(top - y);
  const double denom_log = std::log(1.0 / y);
  double Lmax = -std::numeric_limits<double>::infinity();
  double Lmin = std::numeric_limits<double>::infinity();
  for (std::size_t i : ws.mesh().core()) {
    for (std::size_t j = 0; j < ws.mesh().size(); ++j) {
      if (!ws.norm_col(j)) continue;
      double o = omega_y.M(Eigen::Index(i), Eigen::Index(j));
      double kv = kk.M(Eigen::Index(i), Eigen::Index(j));
      if (!(kv > 0)) throw zero_weight_cell(j);
      if (!(o > 0)) throw nonpositive_kernel();
      double L = std::log(o / kv) / denom_log;
      Lmax = std::max(Lmax, L);
      Lmin = std::min(Lmin, L);
    }
  }
  envelope_fit rep;
  rep.y = y;
  rep.c_plus = Lmax;
  rep.c_minus = -Lmin;
  return rep;
}

// Integral form of the height derivative: with f(y) the product over [y, top]
// applied to the level-y trace, the increment f(y2) - f(y1) should equal the
// integral over [y1, y2] of eps times the product applied to the b-image of
// the trace.  Both sides are built from one chained family, so the residual
// isolates quadrature error plus the family's own derivative defect.
struct ode_report {
  double y1 = 0, y2 = 0, eps = 0;
  double scale = 0;       // max core endpoint |f|
  double residual = 0;    // max core |f(y2) - f(y1) - integral| / scale
  double step_excess = 0; // max core per-step Lipschitz defect / scale
};

inline ode_report ode_check(kernel_workspace& ws, double y1, double y2, double eps, int n_steps,
                            int base_depth, int link_depth, double top = 1.0,
                            const quad_opts& q = {}) {
  if (!(0 < y1 && y1 < y2 && y2 < top)) throw std::invalid_argument("ode_check: need 0 < y1 < y2 < top");
  if (n_steps < 2) throw std::invalid_argument("ode_check: need at least two steps");
  std::vector<double> ladder{top};
  for (int r = 0; r <= n_steps; ++r)
    ladder.push_back(r == n_steps ? y1 : y2 - (y2 - y1) * (double(r) / double(n_steps)));
  std::vector<int> depths{base_depth};
  depths.insert(depths.end(), std::size_t(n_steps), link_depth);
  omega_chain_result ch = omega_chain(ws, ladder, eps, depths, q);

  const std::size_t n = ws.mesh().size();
  std::vector<Eigen::VectorXd> f(std::size_t(n_steps) + 1), g(std::size_t(n_steps) + 1);
  for (int r = 0; r <= n_steps; ++r) {
    double t = ch.heights[std::size_t(r)];
    Eigen::VectorXd psi = level_trace(ws, t);
    const kernel_matrix& om = ch.omegas[std::size_t(r)];
    f[std::size_t(r)] = ws.apply(om, psi);
    g[std::size_t(r)] = eps * ws.apply(om, ws.apply(ws.b(t), psi));
  }
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(Eigen::Index(n));
  const double h = (y2 - y1) / n_steps;
  for (int r = 0; r <= n_steps; ++r)
    integral += (r == 0 || r == n_steps ? 0.5 : 1.0) * h * g[std::size_t(r)];

  ode_report rep;
  rep.y1 = y1;
  rep.y2 = y2;
  rep.eps = eps;
  const auto core = ws.mesh().core();
  for (std::size_t i : core) {
    Eigen::Index ii(i);
    rep.scale = std::max(rep.scale, std::max(std::abs(f.front()[ii]), std::abs(f.back()[ii])));
  }
  if (!(rep.scale > 0)) throw std::domain_error("ode_check: trace produced a zero scale");
  for (std::size_t i : core) {
    Eigen::Index ii(i);
    double lhs = f.front()[ii] - f.back()[ii]; // f at y2 minus f at y1
    rep.residual = std::max(rep.residual, std::abs(lhs - integral[ii]) / rep.scale);
    for (int r = 0; r + 1 <= n_steps; ++r) {
      double df = std::abs(f[std::size_t(r)][ii] - f[std::size_t(r) + 1][ii]);
      double bound = h * std::max(std::abs(g[std::size_t(r)][ii]),
                                  std::abs(g[std::size_t(r) + 1][ii]));
      rep.step_excess = std::max(rep.step_excess, (df - bound) / rep.scale);
    }
  }
  return rep;
}

}  // namespace rvl
