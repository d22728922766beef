#pragma once

// Shared helpers for the test suites: seeded generators of small random
// inputs and a few independent reference computations.

#include "asymlab/linalg.hpp"
#include "asymlab/multiindex.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace testsupport {

using asymlab::Mat;
using asymlab::MultiIndex;
using asymlab::SlotPartition;
using asymlab::Vec;

inline std::mt19937_64 rng_for(std::uint64_t seed) { return std::mt19937_64(seed * 0x9E3779B97F4A7C15ull + 1); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, lo, hi);
  return v;
}

inline Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                      double hi = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform(rng, lo, hi);
  return m;
}

inline MultiIndex random_index(std::mt19937_64& rng, std::size_t dim, int max_entry) {
  std::vector<int> e(dim);
  for (auto& x : e) x = uniform_int(rng, 0, max_entry);
  return MultiIndex(e);
}

/// Random partition of {0..d-1} into contiguous blocks of size 1..max_block.
inline SlotPartition random_partition(std::mt19937_64& rng, std::size_t d, std::size_t max_block) {
  std::vector<std::size_t> sizes;
  std::size_t left = d;
  while (left > 0) {
    const std::size_t s =
        static_cast<std::size_t>(uniform_int(rng, 1, static_cast<int>(std::min(left, max_block))));
    sizes.push_back(s);
    left -= s;
  }
  return SlotPartition::contiguous(sizes);
}

/// Brute-force I_n: scan the full grid {0..n}^d.
inline std::vector<MultiIndex> brute_force_interactions(const SlotPartition& p, int n) {
  const std::size_t d = p.latent_dim();
  std::vector<MultiIndex> out;
  std::vector<int> e(d, 0);
  while (true) {
    int sum = 0;
    for (int x : e) sum += x;
    if (sum == n) {
      std::vector<std::size_t> owners;
      for (std::size_t i = 0; i < d; ++i)
        if (e[i] > 0) owners.push_back(p.block_of(i));
      bool cross = false;
      for (std::size_t o : owners) cross |= o != owners.front();
      if (cross) out.emplace_back(e);
    }
    std::size_t i = 0;
    while (i < d && ++e[i] > n) e[i++] = 0;
    if (i == d) break;
  }
  return out;
}

}  // namespace testsupport
