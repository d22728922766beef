#pragma once

// Ground-truth generators of the form
//
//   f(z) = sum_k f^k(z_{B_k}) + sum_{alpha in I_{<=n}} c_alpha z^alpha,
//
// plus the latent supports they are sampled on, slot-wise basis changes
// (equivalent generators) and slot-wise reparameterizations used to build
// model/ground-truth pairs with known disentanglement.

#include "asymlab/linalg.hpp"
#include "asymlab/multiindex.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

namespace asymlab {

/// Smooth scalar feature of one slot's coordinates.
struct BasisFeature {
  enum class Kind { Monomial, Sin, Cos, Exp };
  Kind kind = Kind::Monomial;
  std::vector<int> exponents;  // Monomial: one exponent per slot coordinate
  Vec weights;                 // Sin/Cos/Exp: affine form w.z + bias
  double bias = 0.0;

  static BasisFeature monomial(std::vector<int> exponents);
  static BasisFeature trig(Kind kind, Vec weights, double bias);

  std::size_t arity() const;
  double eval(const Vec& z_slot) const;
};

struct SlotFunctionSpec {
  std::size_t slot_index = 0;
  std::vector<BasisFeature> basis;
  Mat coefficients;  // d_x x n_features

  Vec eval(const Vec& z_slot) const;
};

struct InteractionTermSet {
  int order_bound = 0;
  std::map<MultiIndex, Vec> terms;
};

class GeneratorSpec {
 public:
  GeneratorSpec(SlotPartition partition, std::vector<SlotFunctionSpec> slot_functions,
                InteractionTermSet interactions, std::size_t out_dim);

  const SlotPartition& partition() const { return partition_; }
  const std::vector<SlotFunctionSpec>& slot_functions() const { return slot_functions_; }
  const InteractionTermSet& interactions() const { return interactions_; }
  std::size_t out_dim() const { return out_dim_; }
  std::size_t latent_dim() const { return partition_.latent_dim(); }

  Vec eval(const Vec& z) const;
  VectorFn as_function() const;

  /// True when some c_alpha with |alpha| == order_bound is nonzero.
  bool has_top_order_terms() const;

 private:
  SlotPartition partition_;
  std::vector<SlotFunctionSpec> slot_functions_;
  InteractionTermSet interactions_;
  std::size_t out_dim_;
};

Vec eval_generator(const GeneratorSpec& spec, const Vec& z);

/// Output dimension that makes the n=2 sufficient-independence matrix
/// generically full column rank: sum_k m(m+1)(m+2)/6 + d_z(d_z+1)/2 + d_z.
std::size_t recommended_out_dim(const SlotPartition& partition, int n);

// ---------------------------------------------------------------------------
// Supports

struct Box {
  Vec lo;
  Vec hi;
  bool contains(const Vec& z) const;
  double volume() const;
};

struct BandPair {
  std::size_t i = 0;
  std::size_t j = 0;
  double half_width = 0.0;
};

/// Uniform-on-support latent distribution. Only three constructive kinds are
/// exposed, each regular closed, path-connected and aligned-connected
/// w.r.t. its partition (union-of-boxes is aligned-connected but not
/// necessarily path-connected; sampling does not depend on that).
class LatentSupport {
 public:
  enum class Kind { BoxProduct, Band, UnionOfBoxes };

  static LatentSupport box(SlotPartition partition, Vec lo, Vec hi);
  /// Box intersected with |z_i - z_j| <= w for every band pair. Pairs must join
  /// coordinates of different slots with equal ranges, each coordinate in at
  /// most one pair.
  static LatentSupport band(SlotPartition partition, Vec lo, Vec hi, std::vector<BandPair> pairs);
  /// Boxes must have pairwise disjoint interiors.
  static LatentSupport union_of_boxes(SlotPartition partition, std::vector<Box> boxes);

  Kind kind() const { return kind_; }
  const SlotPartition& partition() const { return partition_; }
  const std::vector<Box>& boxes() const { return boxes_; }
  const std::vector<BandPair>& band_pairs() const { return pairs_; }

  bool contains(const Vec& z) const;
  Box bounding_box() const;
  double volume() const;

 private:
  LatentSupport(Kind kind, SlotPartition partition, std::vector<Box> boxes,
                std::vector<BandPair> pairs);

  Kind kind_;
  SlotPartition partition_;
  std::vector<Box> boxes_;
  std::vector<BandPair> pairs_;
};

/// i.i.d. uniform points via rejection from the bounding box.
std::vector<Vec> sample_support(const LatentSupport& support, std::size_t count,
                                std::uint64_t seed);

/// Cartesian-product extension Z_1 x ... x Z_K of the per-slot projections.
LatentSupport cpe_of(const LatentSupport& support);

// ---------------------------------------------------------------------------
// Equivalent generators

struct EquivalenceTransform {
  std::vector<Mat> blocks;  // M_k, |B_k| x |B_k|

  static EquivalenceTransform identity(const SlotPartition& partition);
  /// M_k = I + 0.5 G, G uniform in [-1,1], redrawn until cond(M_k) <= max_cond.
  static EquivalenceTransform random(const SlotPartition& partition, std::mt19937_64& rng,
                                     double max_cond = 50.0);

  void validate(const SlotPartition& partition) const;
  EquivalenceTransform inverse() const;
  /// y = (M_1 z_{B_1}, ..., M_K z_{B_K})
  Vec apply(const SlotPartition& partition, const Vec& z) const;
};

/// fbar with fbar(M_1 z_{B_1}, ..., M_K z_{B_K}) = f(z).
VectorFn apply_equivalence(const VectorFn& f, const SlotPartition& partition,
                           const EquivalenceTransform& t);
VectorFn apply_equivalence(const GeneratorSpec& spec, const EquivalenceTransform& t);

// ---------------------------------------------------------------------------
// Slot-wise diffeomorphisms

struct SlotMap {
  enum class Kind { Affine, TanhAffine, CubicLinear };
  Kind kind = Kind::Affine;
  Mat matrix;    // Affine: A
  Vec offset;    // Affine: b; others: additive shift d
  Vec scale;     // TanhAffine: a (outer); CubicLinear: linear slope s > 0
  Vec rate;      // TanhAffine: b (inner); CubicLinear: cubic coefficient c >= 0
  Vec phase;     // TanhAffine: c (inner shift)

  static SlotMap affine(Mat a, Vec b);
  static SlotMap tanh_affine(Vec outer, Vec inner, Vec phase, Vec shift);
  static SlotMap cubic_linear(Vec slope, Vec cubic, Vec shift);

  std::size_t dim() const;
  Vec forward(const Vec& u) const;
  Vec inverse(const Vec& y) const;
  /// Local invertibility of forward at u (determinant / monotonicity).
  bool locally_invertible(const Vec& u, double tol = 1e-10) const;
};

/// h maps a model latent u to a ground-truth latent z with
/// z_{B_{perm[k]}} = maps[k](u_{B_k}).
struct SlotwiseDiffeoSpec {
  std::vector<SlotMap> maps;
  std::vector<std::size_t> permutation;

  static SlotwiseDiffeoSpec identity(const SlotPartition& partition);
  void validate(const SlotPartition& partition) const;
  Vec forward(const SlotPartition& partition, const Vec& u) const;
  Vec inverse(const SlotPartition& partition, const Vec& z) const;
};

struct SlotwisePair {
  VectorFn model;    // fhat = f o h
  VectorFn h;        // u -> z
  VectorFn inverse;  // z -> u, equal to fhat^{-1} o f on the image
};

/// Builds fhat = f o h. Throws SingularTransform when some h_k fails the
/// local invertibility test at one of `probes` (model-latent points).
SlotwisePair compose_slotwise(const VectorFn& f, const SlotPartition& partition,
                              const SlotwiseDiffeoSpec& h, const std::vector<Vec>& probes = {});

// ---------------------------------------------------------------------------
// Random presets

struct PresetOptions {
  int order_bound = 2;                  // n in {0,1,2}
  std::vector<std::size_t> block_sizes{1, 1};
  std::size_t out_dim = 0;              // 0 -> recommended_out_dim
  bool trig_features = true;            // add one sin and one exp feature per slot
  bool disjoint_outputs = false;        // forced for n = 0
  double interaction_scale = 1.0;
  std::uint64_t seed = 0;
};

/// Random generator of the characterized form with interaction bound n. Slot
/// features are all monomials of degree 1..3 (degree-3 coefficients bounded
/// away from zero) plus optional sin/exp of random affine forms.
GeneratorSpec make_preset(const PresetOptions& options);

/// Polynomial-only generator whose slot functions are monomials of degree
/// 1..`slot_degree` and whose interactions fill I_{<=n}.
GeneratorSpec make_polynomial_generator(const SlotPartition& partition, int n,
                                        std::size_t out_dim, int slot_degree,
                                        std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const BasisFeature& f);
void from_json(const nlohmann::json& j, BasisFeature& f);
nlohmann::json generator_to_json(const GeneratorSpec& spec);
GeneratorSpec generator_from_json(const nlohmann::json& j);
nlohmann::json support_to_json(const LatentSupport& s);
LatentSupport support_from_json(const nlohmann::json& j, const SlotPartition& partition);
nlohmann::json transform_to_json(const EquivalenceTransform& t);
EquivalenceTransform transform_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Mat& m);
Mat matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vec& v);
Vec vector_from_json(const nlohmann::json& j);

}  // namespace asymlab
