#include "asymlab/linalg.hpp"

namespace asymlab {

namespace {
Vec singular_values(const Mat& m) {
  if (m.size() == 0) return Vec();
  Eigen::BDCSVD<Mat> svd(m);
  return svd.singularValues();
}
}  // namespace

int numerical_rank(const Mat& m, double rel_tol) {
  const Vec s = singular_values(m);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return numerical_rank_abs(m, rel_tol * s(0));
}

int numerical_rank_abs(const Mat& m, double abs_cutoff) {
  const Vec s = singular_values(m);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > abs_cutoff) ++r;
  return r;
}

double largest_singular_value(const Mat& m) {
  const Vec s = singular_values(m);
  return s.size() ? s(0) : 0.0;
}

bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace asymlab
