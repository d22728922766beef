#pragma once

// Multi-index algebra over a latent space R^{d_z} split into slots.
//
// Indices are 0-based everywhere in the API; JSON and human-readable output
// shift them to 1-based.

#include "asymlab/linalg.hpp"

#include <json.hpp>

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace asymlab {

class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> entries);

  static MultiIndex zeros(std::size_t dim);
  /// count * e_i
  static MultiIndex unit(std::size_t dim, std::size_t i, int count = 1);
  /// Multi-index counting how often each latent index occurs in `indices`.
  static MultiIndex from_indices(std::size_t dim, std::span<const std::size_t> indices);

  std::size_t dim() const { return entries_.size(); }
  int operator[](std::size_t i) const { return entries_[i]; }
  std::span<const int> entries() const { return entries_; }

  int norm() const;
  double factorial() const;
  bool dominates(const MultiIndex& other) const;  // this >= other elementwise
  bool is_zero() const { return norm() == 0; }

  MultiIndex operator+(const MultiIndex& other) const;
  MultiIndex operator-(const MultiIndex& other) const;

  /// Latent indices with multiplicity, e.g. (2,0,1) -> {0,0,2}.
  std::vector<std::size_t> expand() const;

  /// "(1,0,2)"
  std::string to_string() const;

  auto operator<=>(const MultiIndex&) const = default;
  bool operator==(const MultiIndex&) const = default;

 private:
  std::vector<int> entries_;
};

int mi_norm(const MultiIndex& alpha);
double mi_power(const Vec& z, const MultiIndex& alpha);

struct PolyDerivative {
  double coefficient = 0.0;
  MultiIndex residual;
};

/// D^alpha z^beta = coefficient * z^residual.
PolyDerivative mi_poly_derivative(const MultiIndex& alpha, const MultiIndex& beta);

/// All multi-indices of dimension `dim` with |alpha| == order, lexicographically descending.
std::vector<MultiIndex> multi_indices_of_order(std::size_t dim, int order);

class SlotPartition {
 public:
  SlotPartition() = default;
  SlotPartition(std::size_t latent_dim, std::vector<std::vector<std::size_t>> blocks);

  /// K contiguous blocks of the given sizes.
  static SlotPartition contiguous(std::span<const std::size_t> sizes);
  static SlotPartition singletons(std::size_t latent_dim);

  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t num_blocks() const { return blocks_.size(); }
  const std::vector<std::size_t>& block(std::size_t k) const { return blocks_[k]; }
  const std::vector<std::vector<std::size_t>>& blocks() const { return blocks_; }
  std::size_t block_of(std::size_t latent_index) const { return owner_[latent_index]; }
  std::size_t block_size(std::size_t k) const { return blocks_[k].size(); }

  /// Number of distinct blocks touched by the nonzero entries of alpha.
  std::size_t blocks_touched(const MultiIndex& alpha) const;
  bool is_cross(const MultiIndex& alpha) const { return blocks_touched(alpha) >= 2; }

  bool operator==(const SlotPartition&) const = default;

 private:
  std::size_t latent_dim_ = 0;
  std::vector<std::vector<std::size_t>> blocks_;
  std::vector<std::size_t> owner_;
};

/// I_n (or I_{<=n} when `upto`): multi-indices of order n (resp. 2..n) whose
/// support spans at least two blocks.
std::vector<MultiIndex> interaction_indices(const SlotPartition& partition, int n, bool upto);

void to_json(nlohmann::json& j, const SlotPartition& p);
void from_json(const nlohmann::json& j, SlotPartition& p);

}  // namespace asymlab
