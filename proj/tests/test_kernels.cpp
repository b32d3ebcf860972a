#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "rvl/harnack.hpp"
#include "rvl/kernels.hpp"

using namespace rvl;

namespace {
// Light mesh: enough resolution to see the identities without slowing the
// suite down.  Acceptance-scale meshes live in the acceptance binary.
const boundary_mesh& light_mesh() {
  static boundary_mesh m = build_mesh(flat_graph2(), {0.02, 1.5, 1.1, 300.0});
  return m;
}

kernel_workspace make_ws() {
  auto u = std::make_shared<hat_field2>(std::vector<double>{-0.5, 0.0, 0.5},
                                        std::vector<double>{0, 1.0, 0});
  return kernel_workspace(light_mesh(), u);
}

Eigen::VectorXd lifted_values(const boundary_mesh& m, const harmonic_field<2>& f, double y) {
  Eigen::VectorXd v(m.size());
  for (std::size_t j = 0; j < m.size(); ++j)
    v[Eigen::Index(j)] = f.value({m.t[j], m.graph.phi(m.t[j]) + y});
  return v;
}
}  // namespace

TEST_CASE("smoothing rows integrate to one on the core") {
  auto ws = make_ws();
  for (double y : {0.125, 0.25}) {
    REQUIRE(ws.core_row_residual(ws.k(y)) < 1e-3);
  }
  // residual grows with height but stays controlled
  REQUIRE(ws.core_row_residual(ws.k(1.0)) < 5e-3);
  REQUIRE_THROWS_AS(ws.k(0.0), std::invalid_argument);
}

TEST_CASE("smoothing kernels compose along heights") {
  auto ws = make_ws();
  auto core = ws.mesh().core(1.0);

  auto s = ws.compose(ws.k(0.125), ws.k(0.125));
  REQUIRE(s.height == Catch::Approx(0.25));
  double e8 = ws.rel_max_norm(s.M - ws.k(0.25).M, ws.k(0.25), &core);
  REQUIRE(e8 < 5e-3);

  auto s4 = ws.compose(ws.k(0.25), ws.k(0.25));
  double e4 = ws.rel_max_norm(s4.M - ws.k(0.5).M, ws.k(0.5), &core);
  REQUIRE(e4 < 5e-3);
}

TEST_CASE("composition is associative") {
  auto ws = make_ws();
  const auto& k = ws.k(0.125);
  auto left = ws.compose(ws.compose(k, k), k);
  auto right = ws.compose(k, ws.compose(k, k));
  double scale = left.M.cwiseAbs().maxCoeff();
  REQUIRE((left.M - right.M).cwiseAbs().maxCoeff() < 1e-10 * scale);
  REQUIRE(left.height == Catch::Approx(right.height));
}

TEST_CASE("apply matches row integrals on the constant function") {
  auto ws = make_ws();
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(ws.mesh().size());
  auto k = ws.k(0.25);
  Eigen::VectorXd a = ws.apply(k, ones);
  Eigen::VectorXd r = ws.row_integrals(k);
  REQUIRE((a - r).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("direction-dotted gradient rows kill constants and recover gradients") {
  auto ws = make_ws();
  const auto& m = ws.mesh();
  double y = 0.125;
  auto cy = ws.c(y);

  // constants are annihilated up to the truncation tail
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.size());
  Eigen::VectorXd c1 = ws.apply(cy, ones);
  for (auto i : m.core(1.0)) REQUIRE(std::abs(c1[Eigen::Index(i)]) < 3e-3);

  // applied to the field's own lifted trace: the gradient magnitude two
  // heights up
  Eigen::VectorXd uy = lifted_values(m, ws.field(), y);
  Eigen::VectorXd got = ws.apply(cy, uy);
  for (auto i : m.core(1.0)) {
    double expect = norm(ws.field().gradient({m.t[i], 2 * y}));
    REQUIRE(got[Eigen::Index(i)] == Catch::Approx(expect).margin(5e-3));
  }
}

TEST_CASE("smoothed gradient kernel matches its two-step form") {
  auto ws = make_ws();
  const auto& m = ws.mesh();
  double y = 0.125;
  auto by = ws.b(y);
  REQUIRE(by.height == Catch::Approx(2 * y));

  Eigen::VectorXd uy = lifted_values(m, ws.field(), y);
  Eigen::VectorXd lhs = ws.apply(by, uy);

  Eigen::VectorXd gnorm(m.size());
  for (std::size_t j = 0; j < m.size(); ++j)
    gnorm[Eigen::Index(j)] = norm(ws.field().gradient({m.t[j], m.graph.phi(m.t[j]) + 2 * y}));
  Eigen::VectorXd rhs = ws.apply(ws.k(y), gnorm);

  for (auto i : m.core(1.0)) {
    REQUIRE(lhs[Eigen::Index(i)] == Catch::Approx(rhs[Eigen::Index(i)]).margin(5e-3));
    // dominates the gradient three heights up
    double g3 = norm(ws.field().gradient({m.t[i], 3 * y}));
    REQUIRE(lhs[Eigen::Index(i)] >= g3 - 5e-3);
  }
}

TEST_CASE("segment integral: additivity, small-piece limit, instability guard") {
  auto ws = make_ws();
  auto core = ws.mesh().core(1.0);
  const auto& ref = ws.k(0.25);

  quad_opts tight;
  tight.n_max = 64;
  tight.rel_tol = 1e-3;
  auto whole = ws.b_segment(0.25, 0.5, tight);
  auto a = ws.b_segment(0.25, 0.375, tight);
  auto b2 = ws.b_segment(0.375, 0.5, tight);
  double add = ws.rel_max_norm(whole.M - a.M - b2.M, ref, &core);
  REQUIRE(add < 5e-3);

  // short segments reduce to midpoint times length
  double y = 0.25, h = y / 64;
  auto tiny = ws.b_segment(y, y + h);
  auto mid = ws.b(y + h / 2);
  REQUIRE((tiny.M - h * mid.M).cwiseAbs().maxCoeff() < 1e-12 * mid.M.cwiseAbs().maxCoeff());

  quad_opts impossible;
  impossible.rel_tol = 0.0;
  REQUIRE_THROWS_AS(ws.b_segment(0.25, 0.5, impossible), quadrature_unstable);
  REQUIRE_THROWS_AS(ws.b_segment(0.5, 0.25), std::invalid_argument);
}

TEST_CASE("refinement factor has unit row integrals") {
  auto ws = make_ws();
  auto ot = ws.omega_tilde(0.25, 0.5, 0.1);
  REQUIRE(ws.core_row_residual(ot) < 2e-3);
  REQUIRE(ot.height == Catch::Approx(0.25));
}

TEST_CASE("height quotient exponent on a flat boundary is near one") {
  auto ws = make_ws();
  auto f = kernel_quotient_alpha(ws, {0.125, 0.25, 0.5});
  REQUIRE(f.slope > 0.85);
  REQUIRE(f.slope < 1.1);
  // stays below the chain-bound exponent
  auto cc = make_chain_constants(2, 1.0);
  REQUIRE(f.slope < cc.a_hi);
}

TEST_CASE("norms skip dead cells and the outer wing") {
  auto m = light_mesh();  // copy
  Eigen::Index mid = Eigen::Index(m.size() / 2);
  m.w[std::size_t(mid)] = 0.0;  // fabricate a dead cell in the core
  auto u = std::make_shared<constant_field2>(1.0);
  kernel_workspace ws(m, u);
  REQUIRE_FALSE(ws.norm_col(std::size_t(mid)));
  REQUIRE(ws.norm_col(std::size_t(mid + 1)));
  REQUIRE_FALSE(ws.norm_col(0));  // outer wing, beyond half the truncation radius

  auto k = ws.k(0.25);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m.size(), m.size());
  A(0, mid) = 1e9;  // dead column: ignored
  A(0, 0) = 1e9;    // wing column: ignored
  REQUIRE(ws.rel_max_norm(A, k) == 0.0);
  A(0, mid + 1) = 2 * k.M(0, mid + 1);
  REQUIRE(ws.rel_max_norm(A, k) == Catch::Approx(2.0));
}
