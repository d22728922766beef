#pragma once

// Numerical certification of derivative-structure conditions on a black-box
// generator: interaction orders across slots, within-slot interaction,
// interaction asymmetry over equivalent generators, sufficient independence,
// and the compositionality / irreducibility / additivity / sufficient
// nonlinearity conditions.
//
// "For all z" is replaced by "at every probe". A derivative counts as nonzero
// when it exceeds tol_active = tol_rel * (1 + max_{l,i} |D_i f_l(z)|). Ranks count
// singular values above rank_tol times the largest singular value of the full
// stacked matrix at that probe.

#include "asymlab/derivatives.hpp"
#include "asymlab/generators.hpp"
#include "asymlab/linalg.hpp"
#include "asymlab/multiindex.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace asymlab {

enum class Verdict { Pass, Fail, NotApplicable };
const char* to_string(Verdict v);

struct Witness {
  Vec point;
  std::string indices;  // 1-based, human readable
  double value = 0.0;
};

struct CheckReport {
  std::string condition;
  Verdict verdict = Verdict::Pass;
  /// Worst-case slack against the tolerance; negative iff some probe failed.
  double margin = 0.0;
  std::vector<Witness> witnesses;
  int probes_used = 0;
  int probes_passed = 0;
  std::string note;
  std::vector<CheckReport> parts;
  Box probed_region;

  bool pass() const { return verdict == Verdict::Pass; }
  double pass_fraction() const {
    return probes_used ? static_cast<double>(probes_passed) / probes_used : 0.0;
  }
};

nlohmann::json to_json(const CheckReport& r);

struct CheckConfig {
  StencilConfig stencil;
  double tol_rel = 1e-5;
  double rank_tol = 1e-7;
  /// Rank-type checks pass when at least this fraction of probes pass.
  double min_pass_fraction = 1.0;
  std::size_t max_witnesses = 8;
  /// Cap on |I_k(z)| before irreducibility samples splits instead of enumerating.
  std::size_t split_enumeration_cap = 12;
  std::size_t sampled_splits = 4096;
  std::uint64_t seed = 0;
};

double active_tolerance(const Mat& jacobian, double tol_rel);

CheckReport check_no_interaction(const VectorFn& f, const SlotPartition& partition,
                                 const std::vector<Vec>& probes, const CheckConfig& cfg = {});

/// n = 0 delegates to check_no_interaction; n in {1,2} tests every |alpha| = n+1
/// cross multi-index.
CheckReport check_order_at_most_n(const VectorFn& f, const SlotPartition& partition, int n,
                                  const std::vector<Vec>& probes, const CheckConfig& cfg = {});

/// Every slot and every split into non-empty disjoint A, B (A = B = {i} for
/// one-dimensional slots) must show (n+1)-th order interaction at every probe.
CheckReport check_within_slot_order(const VectorFn& f, const SlotPartition& partition, int n,
                                    const std::vector<Vec>& probes, const CheckConfig& cfg = {});

CheckReport check_interaction_asymmetry(const VectorFn& f, const SlotPartition& partition, int n,
                                        const std::vector<Vec>& probes, int equiv_samples,
                                        const CheckConfig& cfg = {});

/// Stacked derivative columns grouped as in the rank equation.
struct SufficientIndependenceMatrix {
  struct Group {
    std::string label;
    std::size_t slot = 0;
    Eigen::Index begin = 0;
    Eigen::Index count = 0;
  };
  Mat columns;
  std::vector<Group> groups;
};

/// Column layout per slot k:
///   n = 0: [D_i f]_{i in B_k}
///   n = 1: [D_i f]_{i in B_k} | [D^2_{i,i'} f]_{i<=i' in B_k}
///   n = 2: [D_i f]_{i in B_k} + [D^2_{i,i'} f] for unordered pairs whose lower
///          latent index lies in B_k | [D^3_{i,i',i''} f]_{i<=i'<=i'' in B_k}
/// Every distinct derivative column appears exactly once.
SufficientIndependenceMatrix build_sufficient_independence_matrix(
    const VectorFn& f, const SlotPartition& partition, int n, const Vec& z,
    const StencilConfig& stencil = {});

CheckReport sufficient_independence_check(const VectorFn& f, const SlotPartition& partition, int n,
                                          const std::vector<Vec>& probes,
                                          const CheckConfig& cfg = {});

/// If rank(A) = sum_S rank(A_S), sampled null vectors v must satisfy
/// ||A_S v_S||_inf <= 1e-8 ||A||_2 for every column block S.
CheckReport rank_factorization_property(const Mat& a,
                                        const std::vector<std::vector<std::size_t>>& column_blocks,
                                        int trials, std::uint64_t seed, double rank_tol = 1e-7);

/// Output sets I_k(z) = { l : D_i f_l(z) active for some i in B_k }, 0-based.
std::vector<std::vector<std::size_t>> slot_output_sets(const Mat& jacobian,
                                                       const SlotPartition& partition,
                                                       double tol_active);

CheckReport compositionality_check(const VectorFn& f, const SlotPartition& partition,
                                   const std::vector<Vec>& probes, const CheckConfig& cfg = {});
CheckReport irreducibility_check(const VectorFn& f, const SlotPartition& partition,
                                 const std::vector<Vec>& probes, const CheckConfig& cfg = {});
CheckReport additivity_check(const VectorFn& f, const SlotPartition& partition,
                             const std::vector<Vec>& probes, const CheckConfig& cfg = {});
CheckReport sufficient_nonlinearity_check(const VectorFn& f, const SlotPartition& partition,
                                          const std::vector<Vec>& probes,
                                          const CheckConfig& cfg = {});

}  // namespace asymlab
