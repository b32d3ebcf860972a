#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rvl/fitting.hpp"
#include "rvl/rng.hpp"

using namespace rvl;

TEST_CASE("least squares recovers an exact line") {
  std::vector<double> xs{0, 1, 2, 3, 4}, ys;
  for (double x : xs) ys.push_back(2.5 * x - 1.25);
  auto f = linfit(xs, ys);
  REQUIRE(f.slope == Catch::Approx(2.5));
  REQUIRE(f.intercept == Catch::Approx(-1.25));
  REQUIRE(f.se_slope == Catch::Approx(0).margin(1e-12));
  REQUIRE(f.r2 == Catch::Approx(1.0));
}

TEST_CASE("least squares standard error covers noisy slope") {
  auto rng = walk_rng(7, 0);
  std::vector<double> xs, ys;
  for (int i = 0; i < 200; ++i) {
    double x = i / 40.0;
    xs.push_back(x);
    double noise = (unit_uniform(rng) - 0.5) * 0.2;
    ys.push_back(0.7 * x + 0.1 + noise);
  }
  auto f = linfit(xs, ys);
  REQUIRE(std::abs(f.slope - 0.7) < 4 * f.se_slope + 1e-6);
  REQUIRE(f.se_slope > 0);
  REQUIRE(f.r2 > 0.9);
}

TEST_CASE("least squares rejects degenerate input") {
  REQUIRE_THROWS_AS(linfit({1.0}, {2.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(linfit({1, 2}, {1, 2, 3}), std::invalid_argument);
  REQUIRE_THROWS_AS(linfit({2, 2, 2}, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("ks distance against the true and a wrong cdf") {
  std::vector<double> s;
  int n = 4000;
  for (int i = 0; i < n; ++i) s.push_back((i + 0.5) / n);  // near-perfect uniform
  auto uniform = [](double t) { return t < 0 ? 0.0 : (t > 1 ? 1.0 : t); };
  REQUIRE(ks_statistic(s, uniform) < 1.0 / n + 1e-12);
  auto skewed = [](double t) { return t < 0 ? 0.0 : (t > 1 ? 1.0 : t * t); };
  REQUIRE(ks_statistic(s, skewed) > 0.2);
  REQUIRE_THROWS_AS(ks_statistic({}, uniform), std::invalid_argument);
}

TEST_CASE("max ratio fit") {
  auto r = max_ratio_fit({1, 2, 9}, {1, 1, 3});
  REQUIRE(r.c == Catch::Approx(3.0));
  REQUIRE(r.argmax == 2);
  REQUIRE(r.used == 3);
  auto skip = max_ratio_fit({0, 2}, {0, 1}, 1e-12);
  REQUIRE(skip.c == Catch::Approx(2.0));
  REQUIRE(skip.used == 1);
  REQUIRE_THROWS_AS(max_ratio_fit({1}, {0}), std::domain_error);
  REQUIRE_THROWS_AS(max_ratio_fit({}, {}), std::invalid_argument);
}

TEST_CASE("decay ratios") {
  auto r = decay_ratios({8, 4, 2, 1});
  REQUIRE(r.size() == 3);
  for (double q : r) REQUIRE(q == Catch::Approx(0.5));
  REQUIRE_THROWS_AS(decay_ratios({1, 0, 2}), std::domain_error);
}
