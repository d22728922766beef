#include "asymlab/harness/fit_model.hpp"

#include "asymlab/error.hpp"

#include <set>

namespace asymlab {

const char* to_string(FitBasis b) {
  return b == FitBasis::Constrained ? "constrained" : "full_polynomial";
}

namespace {

void all_monomials(std::size_t dim, int max_degree, std::vector<MultiIndex>& out) {
  for (int deg = 0; deg <= max_degree; ++deg)
    for (auto& a : multi_indices_of_order(dim, deg)) out.push_back(std::move(a));
}

}  // namespace

std::vector<MultiIndex> constrained_features(const SlotPartition& partition, int slot_degree,
                                             int n) {
  require(slot_degree >= 1, ErrorCode::InvalidArgument, "slot degree must be >= 1");
  const std::size_t d = partition.latent_dim();
  std::vector<MultiIndex> out{MultiIndex::zeros(d)};
  for (std::size_t k = 0; k < partition.num_blocks(); ++k) {
    const auto& block = partition.block(k);
    std::vector<MultiIndex> local;
    all_monomials(block.size(), slot_degree, local);
    for (const auto& a : local) {
      if (a.is_zero()) continue;
      std::vector<int> e(d, 0);
      for (std::size_t j = 0; j < block.size(); ++j) e[block[j]] = a[j];
      out.emplace_back(std::move(e));
    }
  }
  if (n >= 2)
    for (auto& a : interaction_indices(partition, n, true)) out.push_back(std::move(a));
  return out;
}

std::vector<MultiIndex> full_polynomial_features(std::size_t latent_dim, int degree) {
  std::vector<MultiIndex> out;
  all_monomials(latent_dim, degree, out);
  return out;
}

Mat design_matrix(const std::vector<MultiIndex>& features, const std::vector<Vec>& points) {
  Mat a(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t r = 0; r < points.size(); ++r)
    for (std::size_t c = 0; c < features.size(); ++c)
      a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          mi_power(points[r], features[c]);
  return a;
}

Vec FitModel::eval(const Vec& z) const {
  Vec phi(static_cast<Eigen::Index>(features.size()));
  for (std::size_t c = 0; c < features.size(); ++c)
    phi(static_cast<Eigen::Index>(c)) = mi_power(z, features[c]);
  return coefficients * phi;
}

nlohmann::json FitModel::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& a : features) feats.push_back(std::vector<int>(a.entries().begin(), a.entries().end()));
  nlohmann::json coef = nlohmann::json::array();
  for (Eigen::Index l = 0; l < coefficients.rows(); ++l) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < coefficients.cols(); ++c) row.push_back(coefficients(l, c));
    coef.push_back(std::move(row));
  }
  return {{"basis", asymlab::to_string(basis)},
          {"features", feats},
          {"coefficients", coef},
          {"condition_number", condition_number},
          {"orthogonal_solve", orthogonal_solve}};
}

FitModel fit_least_squares(FitBasis basis, std::vector<MultiIndex> features,
                           const std::vector<Vec>& z, const std::vector<Vec>& x,
                           const FitOptions& options) {
  require(!z.empty() && z.size() == x.size(), ErrorCode::DimensionMismatch,
          "fit: need matching, non-empty inputs and targets");
  require(std::set<MultiIndex>(features.begin(), features.end()).size() == features.size(),
          ErrorCode::InvalidArgument, "fit: duplicate features");
  const Mat a = design_matrix(features, z);
  Mat y(static_cast<Eigen::Index>(x.size()), x.front().size());
  for (std::size_t r = 0; r < x.size(); ++r) y.row(static_cast<Eigen::Index>(r)) = x[r].transpose();

  const Vec sv = Eigen::JacobiSVD<Mat>(a).singularValues();
  FitModel m;
  m.basis = basis;
  m.features = std::move(features);
  m.condition_number = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                               : std::numeric_limits<double>::infinity();
  Mat c;
  if (m.condition_number <= options.normal_equations_max_cond) {
    c = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  } else {
    m.orthogonal_solve = true;
    c = Eigen::CompleteOrthogonalDecomposition<Mat>(a).solve(y);
  }
  require(c.allFinite(), ErrorCode::NonFinite, "fit: non-finite coefficients");
  m.coefficients = c.transpose();
  return m;
}

double mean_squared_error(const FitModel& m, const std::vector<Vec>& z, const std::vector<Vec>& x) {
  require(z.size() == x.size() && !z.empty(), ErrorCode::DimensionMismatch,
          "mse: need matching, non-empty inputs and targets");
  long double acc = 0.0L;
  for (std::size_t i = 0; i < z.size(); ++i) acc += (m.eval(z[i]) - x[i]).squaredNorm();
  return static_cast<double>(acc / static_cast<long double>(z.size()));
}

}  // namespace asymlab
