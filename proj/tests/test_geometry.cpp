#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rvl/geometry.hpp"

using rvl::vecd;

TEST_CASE("graph validation") {
  CHECK_THROWS_AS(rvl::build_graph({-0.5, 0.0, 0.5}, {0.0, 0.2, 0.0}, 0.1, 0.5),
                  rvl::lipschitz_violation);
  CHECK_NOTHROW(rvl::build_graph({-0.5, 0.0, 0.5}, {0.0, 0.2, 0.0}, 0.4, 0.5));
  CHECK_THROWS_AS(rvl::build_graph({-0.5, 0.0, 0.5}, {0.1, 0.2, 0.0}, 9.0, 0.5),
                  rvl::support_violation);
  CHECK_THROWS_AS(rvl::build_graph({-0.5, 0.5}, {0.0, 0.0}, 0.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(rvl::build_graph({-0.4, 0.5}, {0.0, 0.0}, 0.0, 0.5), std::invalid_argument);
}

TEST_CASE("tent profile and interpolation") {
  auto g = rvl::tent_graph2(0.1, 0.5);
  CHECK(g.phi(0.0) == Catch::Approx(0.1));
  CHECK(g.phi(0.25) == Catch::Approx(0.05));
  CHECK(g.phi(-0.25) == Catch::Approx(0.05));
  CHECK(g.phi(0.5) == 0.0);
  CHECK(g.phi(0.7) == 0.0);
  CHECK(g.phi(-3.0) == 0.0);
  CHECK(g.measured_L == Catch::Approx(0.2));
}

TEST_CASE("flat distance is the height") {
  auto g = rvl::flat_graph2();
  CHECK(rvl::distance_to_boundary(g, {0.3, 0.7}) == Catch::Approx(0.7));
  CHECK(rvl::distance_to_boundary(g, {100.0, 0.01}) == Catch::Approx(0.01));
  CHECK_THROWS_AS(rvl::distance_to_boundary(g, {0.0, 0.0}), rvl::outside_domain);
  CHECK_THROWS_AS(rvl::distance_to_boundary(g, {0.0, -0.1}), rvl::outside_domain);
}

TEST_CASE("tent distance against brute force") {
  auto g = rvl::tent_graph2(0.1, 0.5, 65);
  std::mt19937_64 rng(5);
  auto uni = [&](double a, double b) {
    return a + (b - a) * double(rng() >> 11) * 0x1.0p-53;
  };
  for (int it = 0; it < 300; ++it) {
    double x = uni(-2.0, 2.0);
    double y = g.phi(x) + uni(1e-3, 2.0);
    vecd<2> p{x, y};
    double fast = rvl::distance_to_boundary(g, p);
    // brute force over all knot segments plus the flat rays
    double slow = std::min(std::hypot(std::max(0.0, -(x + 0.5)), y),
                           std::hypot(std::max(0.0, x - 0.5), y));
    if (x <= -0.5 || x >= 0.5) slow = std::min(slow, std::abs(y));
    for (std::size_t i = 0; i + 1 < g.xs.size(); ++i) {
      double fx, fy;
      slow = std::min(slow, rvl::detail::seg_dist(x, y, g.xs[i], g.vals[i], g.xs[i + 1],
                                                  g.vals[i + 1], fx, fy));
    }
    CHECK(fast == Catch::Approx(slow).margin(1e-12));
  }
}

TEST_CASE("nearest point lies on the graph") {
  auto g = rvl::random_pl_graph2(0.3, 0.5, 33, 42);
  REQUIRE(g.measured_L <= 0.3);
  std::mt19937_64 rng(9);
  auto uni = [&](double a, double b) {
    return a + (b - a) * double(rng() >> 11) * 0x1.0p-53;
  };
  for (int it = 0; it < 200; ++it) {
    double x = uni(-1.5, 1.5);
    double y = g.phi(x) + uni(1e-3, 1.0);
    auto nb = rvl::nearest_boundary(g, {x, y});
    CHECK(nb.point[1] == Catch::Approx(g.phi(nb.point[0])).margin(1e-12));
    CHECK(nb.dist == Catch::Approx(std::hypot(x - nb.point[0], y - nb.point[1])).margin(1e-12));
    // lower bound: vertical gap divided by the slope factor
    double cs = 1.0 / std::sqrt(1.0 + g.L * g.L);
    CHECK(nb.dist >= cs * (y - g.phi(x)) - 1e-12);
    CHECK(nb.dist <= (y - g.phi(x)) + 1e-12);
  }
}

TEST_CASE("3d triangle distance matches sampled minimum") {
  vecd<3> a{0, 0, 0}, b{1, 0, 0.2}, c{0, 1, -0.1};
  std::mt19937_64 rng(13);
  auto uni = [&] { return double(rng() >> 11) * 0x1.0p-53; };
  for (int it = 0; it < 60; ++it) {
    vecd<3> p{3 * uni() - 1, 3 * uni() - 1, 3 * uni() - 1};
    vecd<3> foot;
    double fast = rvl::detail::tri_dist(p, a, b, c, foot);
    double slow = 1e300;
    for (int i = 0; i <= 120; ++i)
      for (int j = 0; i + j <= 120; ++j) {
        double u = double(i) / 120, v = double(j) / 120;
        vecd<3> q{a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]),
                  a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]),
                  a[2] + u * (b[2] - a[2]) + v * (c[2] - a[2])};
        slow = std::min(slow, rvl::norm<3>(rvl::sub<3>(p, q)));
      }
    CHECK(fast <= slow + 1e-9);
    CHECK(fast >= slow - 2e-2);  // sampling resolution
  }
}

TEST_CASE("3d tent distance sanity") {
  auto g = rvl::tent_graph3(0.1, 0.5, 17);
  CHECK(g.phi(0, 0) == Catch::Approx(0.1));
  CHECK(g.phi(0.5, 0) == 0.0);
  CHECK(g.phi(0.7, 0.7) == 0.0);
  vecd<3> p{0, 0, 1.0};
  double d = rvl::distance_to_boundary(g, p);
  CHECK(d <= 0.9 + 1e-12);
  CHECK(d >= 0.8);
  auto flat = rvl::flat_graph3();
  CHECK(rvl::distance_to_boundary(flat, {5.0, -2.0, 0.25}) == Catch::Approx(0.25));
}
