#include "asymlab/derivatives.hpp"

#include "asymlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace asymlab {

double StencilConfig::step_for_order(int order) const {
  require(order >= 1 && order <= 3, ErrorCode::UnsupportedOrder,
          "finite differences support orders 1..3");
  return step[static_cast<std::size_t>(order - 1)];
}

void StencilConfig::validate() const {
  for (double h : step) require(h > 0.0, ErrorCode::InvalidArgument, "stencil steps must be > 0");
  require(richardson_levels >= 0, ErrorCode::InvalidArgument, "richardson_levels must be >= 0");
  require(tol_sym >= 0.0, ErrorCode::InvalidArgument, "tol_sym must be >= 0");
}

DerivativeTensor::DerivativeTensor(int order, std::size_t out_dim, std::size_t latent_dim)
    : order_(order), out_dim_(out_dim), latent_dim_(latent_dim) {
  require(order >= 1 && order <= 3, ErrorCode::UnsupportedOrder, "tensor order must be 1..3");
  std::size_t cols = 1;
  for (int k = 0; k < order; ++k) cols *= latent_dim;
  values_ = Mat::Zero(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(cols));
}

std::size_t DerivativeTensor::flat_index(std::span<const std::size_t> indices) const {
  require(indices.size() == static_cast<std::size_t>(order_), ErrorCode::DimensionMismatch,
          "index tuple length must equal tensor order");
  std::size_t flat = 0;
  for (std::size_t i : indices) {
    require(i < latent_dim_, ErrorCode::DimensionMismatch, "derivative index out of range");
    flat = flat * latent_dim_ + i;
  }
  return flat;
}

Vec DerivativeTensor::at(std::span<const std::size_t> indices) const {
  return values_.col(static_cast<Eigen::Index>(flat_index(indices)));
}

void DerivativeTensor::set(std::span<const std::size_t> indices, const Vec& v) {
  values_.col(static_cast<Eigen::Index>(flat_index(indices))) = v;
}

double DerivativeTensor::symmetry_defect() const {
  double worst = 0.0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(order_), 0);
  const std::size_t cols = static_cast<std::size_t>(values_.cols());
  for (std::size_t flat = 0; flat < cols; ++flat) {
    std::size_t rem = flat;
    for (int k = order_ - 1; k >= 0; --k) {
      idx[static_cast<std::size_t>(k)] = rem % latent_dim_;
      rem /= latent_dim_;
    }
    std::vector<std::size_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    const double d = (values_.col(static_cast<Eigen::Index>(flat)) -
                      values_.col(static_cast<Eigen::Index>(flat_index(sorted))))
                         .cwiseAbs()
                         .maxCoeff();
    worst = std::max(worst, d);
  }
  return worst;
}

namespace {

struct Tap {
  int offset;     // multiple of h
  double weight;  // unscaled; the order-a stencil is divided by h^a
};

// 1-D central stencils. Order 3 is the central difference of the order-2 stencil.
std::vector<Tap> stencil_1d(int order) {
  switch (order) {
    case 1: return {{1, 0.5}, {-1, -0.5}};
    case 2: return {{1, 1.0}, {0, -2.0}, {-1, 1.0}};
    case 3: return {{2, 0.5}, {1, -1.0}, {-1, 1.0}, {-2, -0.5}};
    default: throw Error(ErrorCode::UnsupportedOrder, "1-D stencil order must be 1..3");
  }
}

Vec evaluate_checked(const VectorFn& f, const Vec& z) {
  Vec out = f(z);
  require(out.allFinite(), ErrorCode::NonFinite, "function returned non-finite values in stencil");
  return out;
}

// Plain tensor-product central difference at one step size.
Vec stencil_estimate(const VectorFn& f, const Vec& z, const MultiIndex& alpha, double h) {
  std::vector<std::size_t> axes;
  std::vector<std::vector<Tap>> taps;
  for (std::size_t i = 0; i < alpha.dim(); ++i) {
    if (alpha[i] == 0) continue;
    axes.push_back(i);
    taps.push_back(stencil_1d(alpha[i]));
  }
  Vec acc;
  std::vector<std::size_t> pos(axes.size(), 0);
  Vec point = z;
  while (true) {
    double w = 1.0;
    point = z;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const Tap& t = taps[a][pos[a]];
      w *= t.weight;
      point(static_cast<Eigen::Index>(axes[a])) += t.offset * h;
    }
    const Vec value = evaluate_checked(f, point);
    if (acc.size() == 0) acc = Vec::Zero(value.size());
    acc += w * value;
    std::size_t a = 0;
    while (a < axes.size() && ++pos[a] == taps[a].size()) {
      pos[a] = 0;
      ++a;
    }
    if (a == axes.size()) break;
  }
  return acc / std::pow(h, alpha.norm());
}

}  // namespace

Vec derivative_by_multiindex(const VectorFn& f, const Vec& z, const MultiIndex& alpha,
                             const StencilConfig& cfg) {
  require(alpha.dim() == static_cast<std::size_t>(z.size()), ErrorCode::DimensionMismatch,
          "multi-index length differs from point dimension");
  const int order = alpha.norm();
  require(order <= 3, ErrorCode::UnsupportedOrder, "derivatives of order > 3 are not supported");
  if (order == 0) return evaluate_checked(f, z);
  cfg.validate();

  const double h = cfg.step_for_order(order);
  // Romberg table over h, h/2, h/4, ...; central errors are even in h.
  std::vector<Vec> row;
  row.push_back(stencil_estimate(f, z, alpha, h));
  for (int level = 1; level <= cfg.richardson_levels; ++level) {
    std::vector<Vec> next;
    next.push_back(stencil_estimate(f, z, alpha, h / std::pow(2.0, level)));
    double factor = 4.0;
    for (int k = 1; k <= level; ++k) {
      next.push_back((factor * next[static_cast<std::size_t>(k - 1)] -
                      row[static_cast<std::size_t>(k - 1)]) /
                     (factor - 1.0));
      factor *= 4.0;
    }
    row = std::move(next);
  }
  return row.back();
}

Vec cross_partial(const VectorFn& f, const Vec& z, std::span<const std::size_t> indices,
                  const StencilConfig& cfg) {
  require(indices.size() == 2 || indices.size() == 3, ErrorCode::UnsupportedOrder,
          "cross_partial expects 2 or 3 differentiation indices");
  return derivative_by_multiindex(
      f, z, MultiIndex::from_indices(static_cast<std::size_t>(z.size()), indices), cfg);
}

Mat jacobian_matrix(const VectorFn& f, const Vec& z, const StencilConfig& cfg) {
  const std::size_t d = static_cast<std::size_t>(z.size());
  Mat out;
  for (std::size_t i = 0; i < d; ++i) {
    const Vec col = derivative_by_multiindex(f, z, MultiIndex::unit(d, i), cfg);
    if (out.size() == 0) out.resize(col.size(), static_cast<Eigen::Index>(d));
    out.col(static_cast<Eigen::Index>(i)) = col;
  }
  return out;
}

DerivativeTensor jacobian(const VectorFn& f, const Vec& z, const StencilConfig& cfg) {
  const Mat j = jacobian_matrix(f, z, cfg);
  DerivativeTensor t(1, static_cast<std::size_t>(j.rows()), static_cast<std::size_t>(z.size()));
  t.values() = j;
  return t;
}

DerivativeTensor derivative_tensor(const VectorFn& f, const Vec& z, int order,
                                   const StencilConfig& cfg) {
  require(order >= 1 && order <= 3, ErrorCode::UnsupportedOrder, "tensor order must be 1..3");
  if (order == 1) return jacobian(f, z, cfg);
  const std::size_t d = static_cast<std::size_t>(z.size());
  const std::size_t out_dim = static_cast<std::size_t>(evaluate_checked(f, z).size());
  DerivativeTensor t(order, out_dim, d);
  std::vector<std::size_t> idx(static_cast<std::size_t>(order), 0);
  // Enumerate sorted tuples, then mirror to every permutation.
  auto fill = [&](auto&& self, std::size_t pos, std::size_t start) -> void {
    if (pos == idx.size()) {
      const Vec v = cross_partial(f, z, idx, cfg);
      std::vector<std::size_t> perm = idx;
      do {
        t.set(perm, v);
      } while (std::next_permutation(perm.begin(), perm.end()));
      return;
    }
    for (std::size_t i = start; i < d; ++i) {
      idx[pos] = i;
      self(self, pos + 1, i);
    }
  };
  fill(fill, 0, 0);
  return t;
}

}  // namespace asymlab
