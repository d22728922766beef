#include "asymlab/metrics.hpp"

#include "asymlab/error.hpp"
#include "asymlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace asymlab {

namespace {
double choose2(double n) { return n * (n - 1.0) / 2.0; }

std::string one_based(const std::vector<std::size_t>& pi) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < pi.size(); ++i) os << (i ? "," : "") << pi[i] + 1;
  os << ")";
  return os.str();
}
}  // namespace

double ari(const std::vector<int>& labels_a, const std::vector<int>& labels_b) {
  require(labels_a.size() == labels_b.size(), ErrorCode::DimensionMismatch,
          "ari: labelings differ in length");
  require(!labels_a.empty(), ErrorCode::InvalidArgument, "ari: empty labeling");
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    table[{labels_a[i], labels_b[i]}] += 1.0;
    rows[labels_a[i]] += 1.0;
    cols[labels_b[i]] += 1.0;
  }
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, n] : table) index += choose2(n);
  for (const auto& [key, n] : rows) sum_a += choose2(n);
  for (const auto& [key, n] : cols) sum_b += choose2(n);
  const double pairs = choose2(static_cast<double>(labels_a.size()));
  if (pairs == 0.0) return 1.0;
  const double expected = sum_a * sum_b / pairs;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<int> foreground_labels(const std::vector<int>& labels,
                                   const std::vector<bool>& foreground) {
  require(labels.size() == foreground.size(), ErrorCode::DimensionMismatch,
          "foreground_labels: length mismatch");
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (foreground[i]) out.push_back(labels[i]);
  return out;
}

Mat slot_influence(const Mat& jacobian, std::size_t channels, const SlotPartition& partition) {
  const auto c = static_cast<Eigen::Index>(channels);
  require(c > 0 && jacobian.rows() % c == 0, ErrorCode::DimensionMismatch,
          "slot_influence: row count is not a multiple of the channel count");
  require(static_cast<std::size_t>(jacobian.cols()) == partition.latent_dim(),
          ErrorCode::DimensionMismatch, "slot_influence: column count differs from d_z");
  const Eigen::Index pixels = jacobian.rows() / c;
  const auto k = static_cast<Eigen::Index>(partition.num_blocks());
  Mat out = Mat::Zero(pixels, k);
  for (Eigen::Index l = 0; l < pixels; ++l)
    for (Eigen::Index b = 0; b < k; ++b)
      for (std::size_t i : partition.block(static_cast<std::size_t>(b)))
        out(l, b) += jacobian.block(l * c, static_cast<Eigen::Index>(i), c, 1).cwiseAbs().sum();
  return out;
}

MetricValue j_ari_from_influence(const Mat& influence, const std::vector<int>& gt_labels,
                                 const std::vector<bool>& foreground) {
  require(static_cast<std::size_t>(influence.rows()) == gt_labels.size() &&
              gt_labels.size() == foreground.size(),
          ErrorCode::DimensionMismatch, "j_ari: pixel count mismatch");
  MetricValue out;
  std::vector<int> predicted, truth;
  for (Eigen::Index l = 0; l < influence.rows(); ++l) {
    if (!foreground[static_cast<std::size_t>(l)]) continue;
    if (influence.row(l).sum() == 0.0) {
      ++out.excluded;
      continue;
    }
    Eigen::Index best = 0;
    influence.row(l).maxCoeff(&best);
    predicted.push_back(static_cast<int>(best));
    truth.push_back(gt_labels[static_cast<std::size_t>(l)]);
  }
  require(!predicted.empty(), ErrorCode::InvalidArgument, "j_ari: no foreground pixels to score");
  out.counted = predicted.size();
  out.value = ari(predicted, truth);
  return out;
}

MetricValue jis_from_influence(const Mat& influence, const std::vector<bool>& foreground) {
  require(static_cast<std::size_t>(influence.rows()) == foreground.size(),
          ErrorCode::DimensionMismatch, "jis: pixel count mismatch");
  MetricValue out;
  double sum = 0.0;
  for (Eigen::Index l = 0; l < influence.rows(); ++l) {
    if (!foreground[static_cast<std::size_t>(l)]) continue;
    const double total = influence.row(l).sum();
    if (total == 0.0) {
      ++out.excluded;
      continue;
    }
    sum += influence.row(l).maxCoeff() / total;
    ++out.counted;
  }
  require(out.counted > 0, ErrorCode::InvalidArgument, "jis: no foreground pixels to score");
  out.value = sum / static_cast<double>(out.counted);
  return out;
}

Mat decoder_jacobian(const VectorFn& decoder, const Vec& z_hat, const JacobianMetricConfig& cfg) {
  return cfg.analytic_jacobian ? cfg.analytic_jacobian(z_hat)
                               : jacobian_matrix(decoder, z_hat, cfg.stencil);
}

MetricValue j_ari(const VectorFn& decoder, const Vec& z_hat, const SlotPartition& partition,
                  const std::vector<int>& gt_labels, const std::vector<bool>& foreground,
                  const JacobianMetricConfig& cfg) {
  const Mat inf = slot_influence(decoder_jacobian(decoder, z_hat, cfg), cfg.channels, partition);
  return j_ari_from_influence(inf, gt_labels, foreground);
}

MetricValue jis(const VectorFn& decoder, const Vec& z_hat, const SlotPartition& partition,
                const std::vector<bool>& foreground, const JacobianMetricConfig& cfg) {
  const Mat inf = slot_influence(decoder_jacobian(decoder, z_hat, cfg), cfg.channels, partition);
  return jis_from_influence(inf, foreground);
}

std::optional<std::vector<std::size_t>> block_permutation_structure(const Mat& j,
                                                                    const SlotPartition& partition,
                                                                    double tol, double rank_tol) {
  const auto d = static_cast<Eigen::Index>(partition.latent_dim());
  if (j.rows() != d || j.cols() != d) return std::nullopt;
  const std::size_t k = partition.num_blocks();
  auto block = [&](std::size_t a, std::size_t b) {
    const auto& ra = partition.block(a);
    const auto& cb = partition.block(b);
    Mat m(static_cast<Eigen::Index>(ra.size()), static_cast<Eigen::Index>(cb.size()));
    for (std::size_t r = 0; r < ra.size(); ++r)
      for (std::size_t c = 0; c < cb.size(); ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            j(static_cast<Eigen::Index>(ra[r]), static_cast<Eigen::Index>(cb[c]));
    return m;
  };
  std::vector<std::size_t> pi(k);
  std::vector<int> col_hits(k, 0);
  for (std::size_t a = 0; a < k; ++a) {
    int hits = 0;
    for (std::size_t b = 0; b < k; ++b) {
      if (block(a, b).cwiseAbs().maxCoeff() <= tol) continue;
      ++hits;
      ++col_hits[b];
      pi[a] = b;
    }
    if (hits != 1) return std::nullopt;
  }
  for (std::size_t b = 0; b < k; ++b)
    if (col_hits[b] != 1) return std::nullopt;
  for (std::size_t a = 0; a < k; ++a) {
    if (partition.block_size(a) != partition.block_size(pi[a])) return std::nullopt;
    const Mat m = block(a, pi[a]);
    if (numerical_rank(m, rank_tol) != m.rows()) return std::nullopt;
  }
  return pi;
}

LocalDisentanglementResult local_disentanglement_check(const VectorFn& f,
                                                       const VectorFn& f_hat_inverse,
                                                       const SlotPartition& partition,
                                                       const std::vector<Vec>& samples,
                                                       const LocalDisentanglementConfig& cfg) {
  const VectorFn h = [f, f_hat_inverse](const Vec& z) -> Vec {
    Vec u;
    try {
      u = f_hat_inverse(f(z));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::DomainError, std::string("inverse evaluation failed: ") + e.what());
    }
    require(u.allFinite(), ErrorCode::DomainError, "inverse evaluation returned non-finite values");
    return u;
  };
  return local_disentanglement_check(h, partition, samples, cfg);
}

LocalDisentanglementResult local_disentanglement_check(const VectorFn& h,
                                                       const SlotPartition& partition,
                                                       const std::vector<Vec>& samples,
                                                       const LocalDisentanglementConfig& cfg) {
  require(!samples.empty(), ErrorCode::InvalidArgument, "local disentanglement: no samples");
  std::vector<std::optional<std::vector<std::size_t>>> found(samples.size());
  parallel_for(samples.size(), [&](std::size_t s) {
    const Mat jac = jacobian_matrix(h, samples[s], cfg.stencil);
    const double tol = cfg.tol_rel * (1.0 + jac.cwiseAbs().maxCoeff());
    found[s] = block_permutation_structure(jac, partition, tol);
  });
  std::map<std::vector<std::size_t>, std::size_t> freq;
  for (const auto& p : found)
    if (p) ++freq[*p];
  LocalDisentanglementResult out;
  CheckReport& r = out.report;
  r.condition = "local_disentanglement";
  r.probes_used = static_cast<int>(samples.size());
  if (!freq.empty()) {
    // Ties resolve to the lexicographically smallest permutation.
    auto best = freq.begin();
    for (auto it = freq.begin(); it != freq.end(); ++it)
      if (it->second > best->second) best = it;
    out.permutation = best->first;
    r.probes_passed = static_cast<int>(best->second);
  }
  const double agreement = r.pass_fraction();
  r.margin = agreement - cfg.min_agreement;
  r.verdict = agreement >= cfg.min_agreement ? Verdict::Pass : Verdict::Fail;
  for (std::size_t s = 0; s < samples.size() && r.witnesses.size() < cfg.max_witnesses; ++s) {
    if (found[s] && found[s] == out.permutation) continue;
    r.witnesses.push_back(
        {samples[s], found[s] ? "pi=" + one_based(*found[s]) : "no block permutation", 0.0});
  }
  r.probed_region = Box{samples.front(), samples.front()};
  for (const auto& z : samples) {
    r.probed_region.lo = r.probed_region.lo.cwiseMin(z);
    r.probed_region.hi = r.probed_region.hi.cwiseMax(z);
  }
  std::ostringstream note;
  if (out.permutation)
    note << "most frequent pi=" << one_based(*out.permutation) << " at " << r.probes_passed << "/"
         << r.probes_used << " samples";
  else
    note << "no sample shows a block permutation";
  r.note = note.str();
  return out;
}

}  // namespace asymlab
