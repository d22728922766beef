#pragma once

// Segmentation-style disentanglement metrics and block-structure checks on
// Jacobians.
//
// A decoder Jacobian has rows grouped by pixel (`channels` consecutive rows per
// pixel) and columns grouped by slot. Slot influence on pixel l is the L1 norm
// of its (channels x |B_k|) block.

#include "asymlab/asymmetry.hpp"
#include "asymlab/derivatives.hpp"
#include "asymlab/generators.hpp"
#include "asymlab/linalg.hpp"
#include "asymlab/multiindex.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace asymlab {

/// Adjusted Rand index from the contingency table. When both labelings put
/// all items in one cluster, or both in singletons, the index is 1.
double ari(const std::vector<int>& labels_a, const std::vector<int>& labels_b);

/// Entries of `labels` with foreground[l] set, in order.
std::vector<int> foreground_labels(const std::vector<int>& labels,
                                   const std::vector<bool>& foreground);

struct MetricValue {
  double value = 0.0;
  std::size_t counted = 0;
  /// Foreground pixels dropped because their whole Jacobian row is zero.
  std::size_t excluded = 0;
};

/// P x K matrix of slot-block L1 norms.
Mat slot_influence(const Mat& jacobian, std::size_t channels, const SlotPartition& partition);

MetricValue j_ari_from_influence(const Mat& influence, const std::vector<int>& gt_labels,
                                 const std::vector<bool>& foreground);
MetricValue jis_from_influence(const Mat& influence, const std::vector<bool>& foreground);

struct JacobianMetricConfig {
  std::size_t channels = 3;
  StencilConfig stencil;
  /// When set, replaces finite differences.
  std::function<Mat(const Vec&)> analytic_jacobian;
};

Mat decoder_jacobian(const VectorFn& decoder, const Vec& z_hat, const JacobianMetricConfig& cfg);

MetricValue j_ari(const VectorFn& decoder, const Vec& z_hat, const SlotPartition& partition,
                  const std::vector<int>& gt_labels, const std::vector<bool>& foreground,
                  const JacobianMetricConfig& cfg = {});
MetricValue jis(const VectorFn& decoder, const Vec& z_hat, const SlotPartition& partition,
                const std::vector<bool>& foreground, const JacobianMetricConfig& cfg = {});

/// Block (a, b) is active when max |J_{B_a, B_b}| > tol. Returns pi with
/// pi[a] = the single active column block of row block a, provided every row
/// and column block has exactly one active block, matched blocks have equal
/// size, and every active block is numerically full rank.
std::optional<std::vector<std::size_t>> block_permutation_structure(const Mat& j,
                                                                    const SlotPartition& partition,
                                                                    double tol,
                                                                    double rank_tol = 1e-7);

struct LocalDisentanglementConfig {
  StencilConfig stencil;
  /// Block activity threshold is tol_rel * (1 + max |Dh|).
  double tol_rel = 1e-5;
  double min_agreement = 0.99;
  std::size_t max_witnesses = 8;
};

struct LocalDisentanglementResult {
  CheckReport report;
  /// Most frequent block permutation over the samples, when any was found.
  std::optional<std::vector<std::size_t>> permutation;
};

/// Estimates Dh for h = f_hat_inverse o f at every sample; passes when at
/// least min_agreement of the samples show the same block permutation.
/// Samples without it, or with a different one, become witnesses.
LocalDisentanglementResult local_disentanglement_check(const VectorFn& f,
                                                       const VectorFn& f_hat_inverse,
                                                       const SlotPartition& partition,
                                                       const std::vector<Vec>& samples,
                                                       const LocalDisentanglementConfig& cfg = {});

/// Same check with h given directly (e.g. SlotwisePair::inverse).
LocalDisentanglementResult local_disentanglement_check(const VectorFn& h,
                                                       const SlotPartition& partition,
                                                       const std::vector<Vec>& samples,
                                                       const LocalDisentanglementConfig& cfg = {});

}  // namespace asymlab
