#pragma once

#include <Eigen/Dense>

#include <functional>

namespace asymlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Black-box vector-valued map R^{d_z} -> R^{d_x}.
using VectorFn = std::function<Vec(const Vec&)>;

/// Singular values above `rel_tol * sigma_max` count toward the rank.
int numerical_rank(const Mat& m, double rel_tol);

/// Same cutoff, but against an externally supplied reference scale.
int numerical_rank_abs(const Mat& m, double abs_cutoff);

double largest_singular_value(const Mat& m);

bool all_finite(const Mat& m);

}  // namespace asymlab
