#pragma once

// Finite-difference partial derivatives of black-box maps, orders 1..3.
//
// A derivative D^alpha f(z) is estimated with a tensor product of 1-D central
// stencils, one per differentiated coordinate. The 1-D third-order stencil is
// the central difference of second-order stencils, so every estimate is built
// from the same order-1/order-2 kernels. The step is chosen by the total order
// |alpha|. All central stencils have error expansions in even powers of h,
// which is what the Richardson levels exploit.

#include "asymlab/linalg.hpp"
#include "asymlab/multiindex.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace asymlab {

struct StencilConfig {
  /// Step per total derivative order 1, 2, 3.
  std::array<double, 3> step{1e-4, 1e-3, 5e-3};
  int richardson_levels = 0;
  double tol_sym = 1e-6;

  double step_for_order(int order) const;
  void validate() const;
};

/// Dense D^order f(z): values(l, flat(i1..i_order)) with row-major flattening
/// of the differentiation indices, i.e. flat = ((i1 * d_z) + i2) * d_z + i3.
class DerivativeTensor {
 public:
  DerivativeTensor(int order, std::size_t out_dim, std::size_t latent_dim);

  int order() const { return order_; }
  std::size_t out_dim() const { return out_dim_; }
  std::size_t latent_dim() const { return latent_dim_; }
  const Mat& values() const { return values_; }
  Mat& values() { return values_; }

  std::size_t flat_index(std::span<const std::size_t> indices) const;
  Vec at(std::span<const std::size_t> indices) const;
  void set(std::span<const std::size_t> indices, const Vec& v);

  /// max over all index tuples and their permutations of the deviation from
  /// the sorted-tuple entry.
  double symmetry_defect() const;
  bool finite() const { return values_.allFinite(); }

 private:
  int order_;
  std::size_t out_dim_;
  std::size_t latent_dim_;
  Mat values_;
};

/// D^alpha f(z) with |alpha| <= 3; the zero index returns f(z).
Vec derivative_by_multiindex(const VectorFn& f, const Vec& z, const MultiIndex& alpha,
                             const StencilConfig& cfg = {});

/// Mixed partial along 2 or 3 latent indices (repeats allowed).
Vec cross_partial(const VectorFn& f, const Vec& z, std::span<const std::size_t> indices,
                  const StencilConfig& cfg = {});

DerivativeTensor jacobian(const VectorFn& f, const Vec& z, const StencilConfig& cfg = {});

/// Jacobian as a plain d_x x d_z matrix.
Mat jacobian_matrix(const VectorFn& f, const Vec& z, const StencilConfig& cfg = {});

/// Full order-k tensor; each sorted index tuple is estimated once and mirrored.
DerivativeTensor derivative_tensor(const VectorFn& f, const Vec& z, int order,
                                   const StencilConfig& cfg = {});

}  // namespace asymlab
