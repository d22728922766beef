#pragma once

// Linear-in-features regression models over monomials z^alpha, used to fit a
// generator on a restricted support and measure how it extrapolates.

#include "asymlab/linalg.hpp"
#include "asymlab/multiindex.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace asymlab {

enum class FitBasis { Constrained, FullPolynomial };
const char* to_string(FitBasis b);

/// Constant, every monomial of degree 1..slot_degree in the coordinates of a
/// single slot, and the cross multi-indices I_{<=n}.
std::vector<MultiIndex> constrained_features(const SlotPartition& partition, int slot_degree,
                                             int n);

/// Every monomial of total degree 0..degree.
std::vector<MultiIndex> full_polynomial_features(std::size_t latent_dim, int degree);

/// Rows are points, columns features.
Mat design_matrix(const std::vector<MultiIndex>& features, const std::vector<Vec>& points);

struct FitModel {
  FitBasis basis = FitBasis::Constrained;
  std::vector<MultiIndex> features;
  Mat coefficients;  // d_x x n_features
  /// 2-norm condition number of the design matrix.
  double condition_number = 0.0;
  bool orthogonal_solve = false;

  Vec eval(const Vec& z) const;
  nlohmann::json to_json() const;
};

struct FitOptions {
  /// Above this design condition number the normal equations (whose
  /// condition is its square) are abandoned for a complete orthogonal
  /// decomposition of the design matrix.
  double normal_equations_max_cond = 1e4;
};

FitModel fit_least_squares(FitBasis basis, std::vector<MultiIndex> features,
                           const std::vector<Vec>& z, const std::vector<Vec>& x,
                           const FitOptions& options = {});

/// Mean over points of the squared Euclidean error.
double mean_squared_error(const FitModel& m, const std::vector<Vec>& z, const std::vector<Vec>& x);

}  // namespace asymlab
