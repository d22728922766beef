#include "asymlab/multiindex.hpp"

#include "asymlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace asymlab {

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
  for (int e : entries_)
    require(e >= 0, ErrorCode::InvalidArgument, "multi-index entries must be non-negative");
}

MultiIndex MultiIndex::zeros(std::size_t dim) { return MultiIndex(std::vector<int>(dim, 0)); }

MultiIndex MultiIndex::unit(std::size_t dim, std::size_t i, int count) {
  require(i < dim, ErrorCode::DimensionMismatch, "unit index out of range");
  std::vector<int> e(dim, 0);
  e[i] = count;
  return MultiIndex(std::move(e));
}

MultiIndex MultiIndex::from_indices(std::size_t dim, std::span<const std::size_t> indices) {
  std::vector<int> e(dim, 0);
  for (std::size_t i : indices) {
    require(i < dim, ErrorCode::DimensionMismatch, "latent index out of range");
    ++e[i];
  }
  return MultiIndex(std::move(e));
}

int MultiIndex::norm() const { return std::accumulate(entries_.begin(), entries_.end(), 0); }

double MultiIndex::factorial() const {
  double out = 1.0;
  for (int e : entries_)
    for (int k = 2; k <= e; ++k) out *= k;
  return out;
}

bool MultiIndex::dominates(const MultiIndex& other) const {
  require(dim() == other.dim(), ErrorCode::DimensionMismatch, "multi-index length mismatch");
  for (std::size_t i = 0; i < dim(); ++i)
    if (entries_[i] < other.entries_[i]) return false;
  return true;
}

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
  require(dim() == other.dim(), ErrorCode::DimensionMismatch, "multi-index length mismatch");
  std::vector<int> e(entries_);
  for (std::size_t i = 0; i < dim(); ++i) e[i] += other.entries_[i];
  return MultiIndex(std::move(e));
}

MultiIndex MultiIndex::operator-(const MultiIndex& other) const {
  require(dim() == other.dim(), ErrorCode::DimensionMismatch, "multi-index length mismatch");
  std::vector<int> e(entries_);
  for (std::size_t i = 0; i < dim(); ++i) e[i] -= other.entries_[i];
  return MultiIndex(std::move(e));  // throws if negative
}

std::vector<std::size_t> MultiIndex::expand() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dim(); ++i)
    for (int c = 0; c < entries_[i]; ++c) out.push_back(i);
  return out;
}

std::string MultiIndex::to_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < dim(); ++i) {
    if (i) s += ",";
    s += std::to_string(entries_[i]);
  }
  return s + ")";
}

int mi_norm(const MultiIndex& alpha) { return alpha.norm(); }

double mi_power(const Vec& z, const MultiIndex& alpha) {
  require(static_cast<std::size_t>(z.size()) == alpha.dim(), ErrorCode::DimensionMismatch,
          "mi_power: point and multi-index lengths differ");
  double out = 1.0;
  for (std::size_t i = 0; i < alpha.dim(); ++i)
    for (int c = 0; c < alpha[i]; ++c) out *= z(static_cast<Eigen::Index>(i));
  return out;
}

PolyDerivative mi_poly_derivative(const MultiIndex& alpha, const MultiIndex& beta) {
  require(alpha.dim() == beta.dim(), ErrorCode::DimensionMismatch,
          "mi_poly_derivative: lengths differ");
  if (!beta.dominates(alpha)) return {0.0, MultiIndex::zeros(alpha.dim())};
  const MultiIndex rest = beta - alpha;
  return {beta.factorial() / rest.factorial(), rest};
}

std::vector<MultiIndex> multi_indices_of_order(std::size_t dim, int order) {
  std::vector<MultiIndex> out;
  if (dim == 0) {
    if (order == 0) out.emplace_back(std::vector<int>{});
    return out;
  }
  // Stars and bars: distribute `order` units over `dim` slots.
  std::vector<int> e(dim, 0);
  auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
    if (pos + 1 == dim) {
      e[pos] = remaining;
      out.emplace_back(e);
      return;
    }
    for (int c = remaining; c >= 0; --c) {
      e[pos] = c;
      self(self, pos + 1, remaining - c);
    }
  };
  rec(rec, 0, order);
  return out;
}

SlotPartition::SlotPartition(std::size_t latent_dim, std::vector<std::vector<std::size_t>> blocks)
    : latent_dim_(latent_dim), blocks_(std::move(blocks)), owner_(latent_dim, latent_dim) {
  require(!blocks_.empty(), ErrorCode::InvalidArgument, "partition needs at least one block");
  std::size_t covered = 0;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    require(!blocks_[k].empty(), ErrorCode::InvalidArgument, "partition blocks must be non-empty");
    for (std::size_t i : blocks_[k]) {
      require(i < latent_dim, ErrorCode::InvalidArgument, "partition index out of range");
      require(owner_[i] == latent_dim, ErrorCode::InvalidArgument, "partition blocks overlap");
      owner_[i] = k;
      ++covered;
    }
  }
  require(covered == latent_dim, ErrorCode::InvalidArgument,
          "partition blocks must cover every latent index");
}

SlotPartition SlotPartition::contiguous(std::span<const std::size_t> sizes) {
  std::vector<std::vector<std::size_t>> blocks;
  std::size_t next = 0;
  for (std::size_t s : sizes) {
    std::vector<std::size_t> b(s);
    std::iota(b.begin(), b.end(), next);
    next += s;
    blocks.push_back(std::move(b));
  }
  return SlotPartition(next, std::move(blocks));
}

SlotPartition SlotPartition::singletons(std::size_t latent_dim) {
  std::vector<std::size_t> sizes(latent_dim, 1);
  return contiguous(sizes);
}

std::size_t SlotPartition::blocks_touched(const MultiIndex& alpha) const {
  require(alpha.dim() == latent_dim_, ErrorCode::DimensionMismatch,
          "multi-index length differs from latent dimension");
  std::set<std::size_t> touched;
  for (std::size_t i = 0; i < latent_dim_; ++i)
    if (alpha[i] > 0) touched.insert(owner_[i]);
  return touched.size();
}

std::vector<MultiIndex> interaction_indices(const SlotPartition& partition, int n, bool upto) {
  require(n >= 2, ErrorCode::InvalidArgument, "interaction index sets are defined for n >= 2");
  std::vector<MultiIndex> out;
  for (int m = upto ? 2 : n; m <= n; ++m)
    for (auto& a : multi_indices_of_order(partition.latent_dim(), m))
      if (partition.is_cross(a)) out.push_back(std::move(a));
  return out;
}

void to_json(nlohmann::json& j, const SlotPartition& p) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : p.blocks()) {
    nlohmann::json jb = nlohmann::json::array();
    for (std::size_t i : b) jb.push_back(i + 1);
    blocks.push_back(jb);
  }
  j = {{"latent_dim", p.latent_dim()}, {"blocks", blocks}};
}

void from_json(const nlohmann::json& j, SlotPartition& p) {
  const auto d = j.at("latent_dim").get<std::size_t>();
  std::vector<std::vector<std::size_t>> blocks;
  for (const auto& jb : j.at("blocks")) {
    std::vector<std::size_t> b;
    for (const auto& ji : jb) {
      const auto one_based = ji.get<long long>();
      require(one_based >= 1, ErrorCode::ConfigError, "partition indices are 1-based");
      b.push_back(static_cast<std::size_t>(one_based - 1));
    }
    blocks.push_back(std::move(b));
  }
  p = SlotPartition(d, std::move(blocks));
}

}  // namespace asymlab
