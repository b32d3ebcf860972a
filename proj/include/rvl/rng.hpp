#pragma once

// Reproducible randomness.  Every Monte Carlo walk draws from its own
// generator seeded by mixing (root seed, walk index), so results are
// independent of batching, thread count, and evaluation order.  Sphere
// directions use explicit inverse transforms rather than std distributions
// to keep the stream identical across standard library implementations.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "geometry.hpp"

namespace rvl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::mt19937_64 walk_rng(std::uint64_t root, std::uint64_t index) {
  return std::mt19937_64(splitmix64(root ^ splitmix64(index)));
}

inline double unit_uniform(std::mt19937_64& g) {  // in [0, 1)
  return double(g() >> 11) * 0x1.0p-53;
}

template <int D>
vecd<D> unit_sphere_dir(std::mt19937_64& g);

template <>
inline vecd<2> unit_sphere_dir<2>(std::mt19937_64& g) {
  double a = 2 * M_PI * unit_uniform(g);
  return {std::cos(a), std::sin(a)};
}

template <>
inline vecd<3> unit_sphere_dir<3>(std::mt19937_64& g) {
  double z = 2 * unit_uniform(g) - 1;
  double a = 2 * M_PI * unit_uniform(g);
  double s = std::sqrt(std::max(0.0, 1 - z * z));
  return {s * std::cos(a), s * std::sin(a), z};
}

// Pairwise-chunked accumulation: bounds float error growth at O(log n) and
// is a fixed function of the input order.
inline double chunked_sum(const std::vector<double>& xs) {
  if (xs.empty()) return 0;
  std::vector<double> level(xs);
  while (level.size() > 1) {
    std::vector<double> up((level.size() + 1) / 2, 0.0);
    for (std::size_t i = 0; i < level.size(); ++i) up[i / 2] += level[i];
    level.swap(up);
  }
  return level[0];
}

}  // namespace rvl
