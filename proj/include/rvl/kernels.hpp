#pragma once

// Dense kernel hierarchy over a boundary mesh, exact on flat boundaries.
// All kernels are stored as densities against the mesh cell masses w:
//   k[i][j] = (harmonic measure of cell j seen from node i lifted by y) / w_j,
// so the operator action is (K f)(x_i) = sum_j k[i][j] w_j f(x_j) and
// composition is (p o q)[i][j] = sum_l p[i][l] w_l q[l][j].
//
// The hierarchy, relative to a fixed positive harmonic field u:
//   k_y   smoothing rows at height y
//   c_y   first-argument kernel gradient dotted with the unit gradient
//         direction of u at the doubly lifted node (zero when ||grad u||
//         falls below the floor)
//   b_y = k_y o c_y
//   b over a segment: adaptive composite-midpoint quadrature of y -> b_y
//   one refinement factor: k_{|seg|} - eps * b_seg
//
// Norms on kernel-sized matrices are taken entrywise relative to a reference
// smoothing kernel; absolute entries are meaningless across the mesh because
// densities near the truncation edge are orders of magnitude apart.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <stdexcept>
#include <vector>

#include "rvl/field.hpp"
#include "rvl/fitting.hpp"
#include "rvl/halfspace.hpp"
#include "rvl/mesh.hpp"

namespace rvl {

struct zero_weight_cell : std::runtime_error {
  explicit zero_weight_cell(std::size_t j)
      : std::runtime_error("cell " + std::to_string(j) + " has no usable mass") {}
};
struct quadrature_unstable : std::runtime_error {
  quadrature_unstable()
      : std::runtime_error("segment quadrature did not settle within the node budget") {}
};

struct kernel_matrix {
  Eigen::MatrixXd M;
  double height = 0;  // smoothing-scale metadata; adds under composition
};

struct quad_opts {
  // Node spacing for the deterministic midpoint rule, as a fraction of the
  // segment's distance from the boundary (used by refinement products).
  double spacing_ratio = 0.125;
  int n_min = 2;
  int n_max = 16;
  // Settling tolerance on the b scale.  The factor k - eps*b only needs eps
  // times this accuracy, so 1e-2 here keeps refinement increments near 5e-4.
  double rel_tol = 1e-2;
  // Pieces shorter than this fraction of their base height use one midpoint.
  double single_node_ratio = 0.125;
};

class kernel_workspace {
 public:
  kernel_workspace(const boundary_mesh& mesh, field_ptr<2> u) : mesh_(&mesh), u_(std::move(u)) {
    if (!mesh.graph.flat())
      throw std::invalid_argument("kernel workspace: exact rows need a flat boundary");
    const std::size_t n = mesh.size();
    w_.resize(n);
    for (std::size_t j = 0; j < n; ++j) w_[Eigen::Index(j)] = mesh.w[j];
  }

  const boundary_mesh& mesh() const { return *mesh_; }
  const harmonic_field<2>& field() const { return *u_; }
  const Eigen::VectorXd& weights() const { return w_; }

  // Smoothing rows at height y, cached per exact height.
  const kernel_matrix& k(double y) {
    if (!(y > 0)) throw std::invalid_argument("kernel: height must be positive");
    std::uint64_t key;
    std::memcpy(&key, &y, 8);
    auto it = kcache_.find(key);
    if (it != kcache_.end()) return it->second;
    kernel_matrix km;
    km.height = y;
    km.M = build_k(y);
    return kcache_.emplace(key, std::move(km)).first->second;
  }

  kernel_matrix c(double y) const {
    if (!(y > 0)) throw std::invalid_argument("kernel: height must be positive");
    const auto& m = *mesh_;
    const std::size_t n = m.size();
    kernel_matrix out;
    out.height = y;
    out.M.resize(Eigen::Index(n), Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i) {
      vecd<2> sigma = unit_or_zero(u_->gradient({m.t[i], 2 * y}));
      for (std::size_t j = 0; j < n; ++j) {
        if (!m.live(j)) {
          out.M(Eigen::Index(i), Eigen::Index(j)) = 0;
          continue;
        }
        auto g = interval_mass_gradient(m.t[i], y, m.breaks[j], m.breaks[j + 1]);
        out.M(Eigen::Index(i), Eigen::Index(j)) =
            (sigma[0] * g[0] + sigma[1] * g[1]) / m.w[j];
      }
    }
    return out;
  }

  kernel_matrix compose(const kernel_matrix& outer, const kernel_matrix& inner) const {
    kernel_matrix out;
    out.height = outer.height + inner.height;
    out.M.noalias() = outer.M * w_.asDiagonal() * inner.M;
    return out;
  }

  kernel_matrix b(double y) { return compose(k(y), c(y)); }

  // Drop cached smoothing kernels (quadratures and deep refinements touch
  // many heights; callers clear between stages to bound memory).
  void clear_kernels() { kcache_.clear(); }

  // Integral of y -> b_y over [lo, hi] by composite midpoint, doubling the
  // node count until the increment falls below rel_tol in the reference norm
  // (reference: smoothing kernel at height lo).
  kernel_matrix b_segment(double lo, double hi, const quad_opts& q = {}) {
    if (!(0 < lo && lo < hi)) throw std::invalid_argument("segment: need 0 < lo < hi");
    double len = hi - lo;
    if (len <= q.single_node_ratio * lo) {
      kernel_matrix one = b_transient((lo + hi) / 2);
      one.M *= len;
      one.height = len;
      return one;
    }
    const kernel_matrix& ref = k(lo);
    kernel_matrix prev = midpoint_b(lo, hi, q.n_min);
    for (int n = q.n_min * 2; n <= q.n_max; n *= 2) {
      kernel_matrix cur = midpoint_b(lo, hi, n);
      double change = rel_max_norm(cur.M - prev.M, ref);
      prev = std::move(cur);
      if (change < q.rel_tol) return prev;
    }
    throw quadrature_unstable();
  }

  // Composite midpoint with node spacing tied to the segment's distance from
  // the boundary.  Deterministic across partition depths: unlike the adaptive
  // rule, refinement increments are not polluted by changing node choices.
  kernel_matrix b_segment_uniform(double lo, double hi, const quad_opts& q = {}) {
    if (!(0 < lo && lo < hi)) throw std::invalid_argument("segment: need 0 < lo < hi");
    if (!(q.spacing_ratio > 0)) throw std::invalid_argument("segment: spacing ratio > 0");
    int n = std::max(1, int(std::ceil((hi - lo) / (q.spacing_ratio * lo))));
    return midpoint_b(lo, hi, n);
  }

  // One refinement factor for a segment: k at the segment length minus
  // eps times the segment b-integral.
  kernel_matrix omega_tilde(double lo, double hi, double eps, const quad_opts& q = {}) {
    kernel_matrix out = b_segment_uniform(lo, hi, q);
    out.M = k(hi - lo).M - eps * out.M;
    out.height = hi - lo;
    return out;
  }

  // (K f)(x_i) for f given by cell values.
  Eigen::VectorXd apply(const kernel_matrix& kmat, const Eigen::VectorXd& f) const {
    return kmat.M * w_.cwiseProduct(f);
  }

  Eigen::VectorXd row_integrals(const kernel_matrix& kmat) const {
    return kmat.M * w_;
  }

  // Max over core rows of |row integral - 1|.
  double core_row_residual(const kernel_matrix& kmat, double half = 1.0) const {
    Eigen::VectorXd ri = row_integrals(kmat);
    double r = 0;
    for (std::size_t i : mesh_->core(half)) r = std::max(r, std::abs(ri[Eigen::Index(i)] - 1));
    return r;
  }

  // Columns used by kernel norms: live cells in the inner half of the
  // truncation window.  The outer wing exists to conserve mass in row
  // integrals and compositions; near the edge it absorbs the flux that the
  // truncated domain cannot route outward, a pointwise artifact that does
  // not shrink under refinement.
  bool norm_col(std::size_t j) const {
    return mesh_->live(j) && std::abs(mesh_->t[j]) <= mesh_->params.R_trunc / 2;
  }

  // max |A_ij| / ref_ij over norm columns, optionally restricted to rows.
  double rel_max_norm(const Eigen::MatrixXd& A, const kernel_matrix& ref,
                      const std::vector<std::size_t>* rows = nullptr) const {
    double m = 0;
    auto scan_row = [&](std::size_t i) {
      for (std::size_t j = 0; j < mesh_->size(); ++j) {
        if (!norm_col(j)) continue;
        double denom = ref.M(Eigen::Index(i), Eigen::Index(j));
        if (!(denom > 0)) throw zero_weight_cell(j);
        m = std::max(m, std::abs(A(Eigen::Index(i), Eigen::Index(j))) / denom);
      }
    };
    if (rows) {
      for (std::size_t i : *rows) scan_row(i);
    } else {
      for (std::size_t i = 0; i < mesh_->size(); ++i) scan_row(i);
    }
    return m;
  }

  // Max over rows of sum_j |A_ij| w_j (operator norm on bounded functions).
  double l1_row_norm(const Eigen::MatrixXd& A,
                     const std::vector<std::size_t>* rows = nullptr) const {
    Eigen::VectorXd s = A.cwiseAbs() * w_;
    double m = 0;
    if (rows) {
      for (std::size_t i : *rows) m = std::max(m, s[Eigen::Index(i)]);
    } else {
      m = s.maxCoeff();
    }
    return m;
  }

 private:
  Eigen::MatrixXd build_k(double y) const {
    const auto& m = *mesh_;
    const std::size_t n = m.size();
    Eigen::MatrixXd M(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        M(Eigen::Index(i), Eigen::Index(j)) =
            m.live(j) ? interval_mass(m.t[i], y, m.breaks[j], m.breaks[j + 1]) / m.w[j] : 0.0;
    return M;
  }

  // b at a quadrature height, bypassing the height cache.
  kernel_matrix b_transient(double y) const {
    kernel_matrix ky;
    ky.height = y;
    ky.M = build_k(y);
    return compose(ky, c(y));
  }

  kernel_matrix midpoint_b(double lo, double hi, int n) {
    double h = (hi - lo) / n;
    kernel_matrix acc;
    acc.height = hi - lo;
    for (int q = 0; q < n; ++q) {
      kernel_matrix by = b_transient(lo + (q + 0.5) * h);
      if (q == 0)
        acc.M = h * by.M;
      else
        acc.M += h * by.M;
    }
    return acc;
  }

  const boundary_mesh* mesh_;
  field_ptr<2> u_;
  Eigen::VectorXd w_;
  std::map<std::uint64_t, kernel_matrix> kcache_;
};

// Least-squares exponent for the height quotient: regress the log of the
// largest entrywise ratio k_{y}/k_{y0} on log(y/y0), all heights against the
// smallest.
inline fit_line kernel_quotient_alpha(kernel_workspace& ws, const std::vector<double>& ys) {
  if (ys.size() < 3) throw std::invalid_argument("quotient fit: need at least 3 heights");
  std::vector<double> lx, ly;
  const auto& k0 = ws.k(ys.front());
  for (std::size_t a = 1; a < ys.size(); ++a) {
    if (!(0 < ys[a - 1] && ys[a - 1] < ys[a]))
      throw std::invalid_argument("quotient fit: heights must increase");
    const auto& ka = ws.k(ys[a]);
    double r = 0;
    for (std::size_t i = 0; i < ws.mesh().size(); ++i)
      for (std::size_t j = 0; j < ws.mesh().size(); ++j)
        if (ws.norm_col(j))
          r = std::max(r, ka.M(Eigen::Index(i), Eigen::Index(j)) /
                              k0.M(Eigen::Index(i), Eigen::Index(j)));
    lx.push_back(std::log(ys[a] / ys.front()));
    ly.push_back(std::log(r));
  }
  return linfit(lx, ly);
}

}  // namespace rvl
