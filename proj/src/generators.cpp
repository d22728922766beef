#include "asymlab/generators.hpp"

#include "asymlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace asymlab {

using nlohmann::json;

namespace {

Vec gather(const Vec& z, const std::vector<std::size_t>& idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r)
    out(static_cast<Eigen::Index>(r)) = z(static_cast<Eigen::Index>(idx[r]));
  return out;
}

void scatter(Vec& z, const std::vector<std::size_t>& idx, const Vec& values) {
  for (std::size_t r = 0; r < idx.size(); ++r)
    z(static_cast<Eigen::Index>(idx[r])) = values(static_cast<Eigen::Index>(r));
}

void require_dim(const Vec& z, std::size_t d, const char* what) {
  require(static_cast<std::size_t>(z.size()) == d, ErrorCode::DimensionMismatch, what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Basis features and slot functions

BasisFeature BasisFeature::monomial(std::vector<int> exponents) {
  BasisFeature f;
  f.kind = Kind::Monomial;
  int total = 0;
  for (int e : exponents) {
    require(e >= 0, ErrorCode::InvalidArgument, "monomial exponents must be non-negative");
    total += e;
  }
  require(total <= 4, ErrorCode::InvalidArgument, "monomial features have degree <= 4");
  f.exponents = std::move(exponents);
  return f;
}

BasisFeature BasisFeature::trig(Kind kind, Vec weights, double bias) {
  require(kind != Kind::Monomial, ErrorCode::InvalidArgument, "trig() expects sin, cos or exp");
  require(weights.allFinite() && std::isfinite(bias), ErrorCode::NonFinite,
          "feature weights must be finite");
  BasisFeature f;
  f.kind = kind;
  f.weights = std::move(weights);
  f.bias = bias;
  return f;
}

std::size_t BasisFeature::arity() const {
  return kind == Kind::Monomial ? exponents.size() : static_cast<std::size_t>(weights.size());
}

double BasisFeature::eval(const Vec& z) const {
  require_dim(z, arity(), "feature arity differs from slot dimension");
  if (kind == Kind::Monomial) {
    double out = 1.0;
    for (std::size_t i = 0; i < exponents.size(); ++i)
      for (int c = 0; c < exponents[i]; ++c) out *= z(static_cast<Eigen::Index>(i));
    return out;
  }
  const double t = weights.dot(z) + bias;
  switch (kind) {
    case Kind::Sin: return std::sin(t);
    case Kind::Cos: return std::cos(t);
    default: return std::exp(t);
  }
}

Vec SlotFunctionSpec::eval(const Vec& z_slot) const {
  Vec phi(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t q = 0; q < basis.size(); ++q)
    phi(static_cast<Eigen::Index>(q)) = basis[q].eval(z_slot);
  return coefficients * phi;
}

// ---------------------------------------------------------------------------
// GeneratorSpec

GeneratorSpec::GeneratorSpec(SlotPartition partition, std::vector<SlotFunctionSpec> slot_functions,
                             InteractionTermSet interactions, std::size_t out_dim)
    : partition_(std::move(partition)),
      slot_functions_(std::move(slot_functions)),
      interactions_(std::move(interactions)),
      out_dim_(out_dim) {
  require(out_dim_ >= 1, ErrorCode::InvalidArgument, "generator output dimension must be >= 1");
  require(interactions_.order_bound >= 0, ErrorCode::InvalidArgument,
          "interaction order bound must be >= 0");
  std::set<std::size_t> seen;
  for (const auto& sf : slot_functions_) {
    require(sf.slot_index < partition_.num_blocks(), ErrorCode::InvalidArgument,
            "slot function refers to a missing slot");
    require(seen.insert(sf.slot_index).second, ErrorCode::InvalidArgument,
            "at most one slot function per slot");
    require(static_cast<std::size_t>(sf.coefficients.rows()) == out_dim_ &&
                static_cast<std::size_t>(sf.coefficients.cols()) == sf.basis.size(),
            ErrorCode::DimensionMismatch, "slot coefficients must be d_x x n_features");
    require(sf.coefficients.allFinite(), ErrorCode::NonFinite, "slot coefficients must be finite");
    for (const auto& b : sf.basis)
      require(b.arity() == partition_.block_size(sf.slot_index), ErrorCode::DimensionMismatch,
              "feature arity differs from slot size");
  }
  for (const auto& [alpha, c] : interactions_.terms) {
    require(alpha.dim() == partition_.latent_dim(), ErrorCode::DimensionMismatch,
            "interaction multi-index has the wrong length");
    require(alpha.norm() >= 2 && alpha.norm() <= interactions_.order_bound,
            ErrorCode::InvalidArgument,
            "interaction term " + alpha.to_string() + " is outside I_{<=n}");
    require(partition_.is_cross(alpha), ErrorCode::InvalidArgument,
            "interaction term " + alpha.to_string() + " lies within a single slot");
    require(static_cast<std::size_t>(c.size()) == out_dim_, ErrorCode::DimensionMismatch,
            "interaction coefficient length must be d_x");
    require(c.allFinite(), ErrorCode::NonFinite, "interaction coefficients must be finite");
  }
}

Vec GeneratorSpec::eval(const Vec& z) const {
  require_dim(z, partition_.latent_dim(), "generator input has the wrong dimension");
  Vec x = Vec::Zero(static_cast<Eigen::Index>(out_dim_));
  for (const auto& sf : slot_functions_) x += sf.eval(gather(z, partition_.block(sf.slot_index)));
  for (const auto& [alpha, c] : interactions_.terms) x += c * mi_power(z, alpha);
  return x;
}

VectorFn GeneratorSpec::as_function() const {
  return [spec = *this](const Vec& z) { return spec.eval(z); };
}

bool GeneratorSpec::has_top_order_terms() const {
  for (const auto& [alpha, c] : interactions_.terms)
    if (alpha.norm() == interactions_.order_bound && c.cwiseAbs().maxCoeff() > 0.0) return true;
  return false;
}

Vec eval_generator(const GeneratorSpec& spec, const Vec& z) { return spec.eval(z); }

std::size_t recommended_out_dim(const SlotPartition& partition, int n) {
  const std::size_t d = partition.latent_dim();
  std::size_t out = 0;
  switch (n) {
    case 0:
      for (const auto& b : partition.blocks()) out += b.size() + 1;
      return out;
    case 1:
      for (const auto& b : partition.blocks()) out += b.size() * (b.size() + 1) / 2;
      return out + d;
    case 2:
      for (const auto& b : partition.blocks()) {
        const std::size_t m = b.size();
        out += m * (m + 1) * (m + 2) / 6;
      }
      return out + d * (d + 1) / 2 + d;
    default:
      throw Error(ErrorCode::UnsupportedOrder, "output-dimension guidance exists for n <= 2");
  }
}

// ---------------------------------------------------------------------------
// Supports

bool Box::contains(const Vec& z) const {
  return (z.array() >= lo.array()).all() && (z.array() <= hi.array()).all();
}

double Box::volume() const { return (hi - lo).prod(); }

namespace {

void validate_box(const Box& b, std::size_t d) {
  require(static_cast<std::size_t>(b.lo.size()) == d && static_cast<std::size_t>(b.hi.size()) == d,
          ErrorCode::DimensionMismatch, "box bounds must have length d_z");
  require(b.lo.allFinite() && b.hi.allFinite(), ErrorCode::NonFinite, "box bounds must be finite");
  require((b.hi.array() > b.lo.array()).all(), ErrorCode::InvalidArgument,
          "box must have positive extent in every coordinate");
}

// Exact volume of a union of boxes through coordinate compression.
double union_volume(const std::vector<Box>& boxes) {
  const Eigen::Index d = boxes.front().lo.size();
  std::vector<std::vector<double>> cuts(static_cast<std::size_t>(d));
  std::size_t cells = 1;
  for (Eigen::Index i = 0; i < d; ++i) {
    auto& c = cuts[static_cast<std::size_t>(i)];
    for (const auto& b : boxes) {
      c.push_back(b.lo(i));
      c.push_back(b.hi(i));
    }
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    cells *= c.size() - 1;
    require(cells <= 4'000'000, ErrorCode::EnumerationOverflow,
            "union of boxes too fragmented for exact volume");
  }
  double vol = 0.0;
  std::vector<std::size_t> pos(static_cast<std::size_t>(d), 0);
  Vec mid(d);
  while (true) {
    double cell = 1.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto& c = cuts[static_cast<std::size_t>(i)];
      const std::size_t p = pos[static_cast<std::size_t>(i)];
      cell *= c[p + 1] - c[p];
      mid(i) = 0.5 * (c[p] + c[p + 1]);
    }
    for (const auto& b : boxes)
      if (b.contains(mid)) {
        vol += cell;
        break;
      }
    std::size_t i = 0;
    while (i < pos.size() && ++pos[i] == cuts[i].size() - 1) pos[i++] = 0;
    if (i == pos.size()) break;
  }
  return vol;
}

}  // namespace

LatentSupport::LatentSupport(Kind kind, SlotPartition partition, std::vector<Box> boxes,
                             std::vector<BandPair> pairs)
    : kind_(kind), partition_(std::move(partition)), boxes_(std::move(boxes)), pairs_(std::move(pairs)) {
  require(!boxes_.empty(), ErrorCode::InvalidArgument, "support needs at least one box");
  for (const auto& b : boxes_) validate_box(b, partition_.latent_dim());
}

LatentSupport LatentSupport::box(SlotPartition partition, Vec lo, Vec hi) {
  return LatentSupport(Kind::BoxProduct, std::move(partition), {Box{std::move(lo), std::move(hi)}},
                       {});
}

LatentSupport LatentSupport::band(SlotPartition partition, Vec lo, Vec hi,
                                  std::vector<BandPair> pairs) {
  require(!pairs.empty(), ErrorCode::InvalidArgument, "band support needs at least one pair");
  const std::size_t d = partition.latent_dim();
  std::vector<bool> used(d, false);
  Box b{std::move(lo), std::move(hi)};
  validate_box(b, d);
  for (const auto& p : pairs) {
    require(p.i < d && p.j < d && p.i != p.j, ErrorCode::InvalidArgument, "band pair out of range");
    require(partition.block_of(p.i) != partition.block_of(p.j), ErrorCode::InvalidArgument,
            "band pairs must couple coordinates of different slots");
    require(!used[p.i] && !used[p.j], ErrorCode::InvalidArgument,
            "each coordinate may appear in at most one band pair");
    used[p.i] = used[p.j] = true;
    require(p.half_width > 0.0 && std::isfinite(p.half_width), ErrorCode::InvalidArgument,
            "band half-width must be positive");
    const auto i = static_cast<Eigen::Index>(p.i);
    const auto j = static_cast<Eigen::Index>(p.j);
    require(b.lo(i) == b.lo(j) && b.hi(i) == b.hi(j), ErrorCode::InvalidArgument,
            "band-coupled coordinates must share their range");
  }
  return LatentSupport(Kind::Band, std::move(partition), {std::move(b)}, std::move(pairs));
}

LatentSupport LatentSupport::union_of_boxes(SlotPartition partition, std::vector<Box> boxes) {
  return LatentSupport(Kind::UnionOfBoxes, std::move(partition), std::move(boxes), {});
}

bool LatentSupport::contains(const Vec& z) const {
  require_dim(z, partition_.latent_dim(), "support point has the wrong dimension");
  switch (kind_) {
    case Kind::BoxProduct: return boxes_.front().contains(z);
    case Kind::Band:
      if (!boxes_.front().contains(z)) return false;
      for (const auto& p : pairs_)
        if (std::abs(z(static_cast<Eigen::Index>(p.i)) - z(static_cast<Eigen::Index>(p.j))) >
            p.half_width)
          return false;
      return true;
    case Kind::UnionOfBoxes:
      return std::any_of(boxes_.begin(), boxes_.end(), [&](const Box& b) { return b.contains(z); });
  }
  return false;
}

Box LatentSupport::bounding_box() const {
  Box out = boxes_.front();
  for (const auto& b : boxes_) {
    out.lo = out.lo.cwiseMin(b.lo);
    out.hi = out.hi.cwiseMax(b.hi);
  }
  return out;
}

double LatentSupport::volume() const {
  switch (kind_) {
    case Kind::BoxProduct: return boxes_.front().volume();
    case Kind::Band: {
      double v = boxes_.front().volume();
      for (const auto& p : pairs_) {
        const auto i = static_cast<Eigen::Index>(p.i);
        const double len = boxes_.front().hi(i) - boxes_.front().lo(i);
        const double w = std::min(p.half_width, len);
        v *= 1.0 - std::pow((len - w) / len, 2);
      }
      return v;
    }
    case Kind::UnionOfBoxes: return union_volume(boxes_);
  }
  return 0.0;
}

std::vector<Vec> sample_support(const LatentSupport& support, std::size_t count,
                                std::uint64_t seed) {
  require(count >= 1, ErrorCode::InvalidArgument, "sample count must be >= 1");
  const Box bb = support.bounding_box();
  const double rate = support.volume() / bb.volume();
  require(rate >= 1e-4, ErrorCode::SupportTooThin,
          "rejection acceptance rate " + std::to_string(rate) + " is below 1e-4");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Vec> out;
  out.reserve(count);
  Vec z(bb.lo.size());
  while (out.size() < count) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = bb.lo(i) + (bb.hi(i) - bb.lo(i)) * u01(rng);
    if (support.contains(z)) out.push_back(z);
  }
  return out;
}

LatentSupport cpe_of(const LatentSupport& support) {
  const SlotPartition& p = support.partition();
  switch (support.kind()) {
    case LatentSupport::Kind::BoxProduct: return support;
    case LatentSupport::Kind::Band: {
      // Equal ranges per pair make every slot projection the full box face.
      const Box& b = support.boxes().front();
      return LatentSupport::box(p, b.lo, b.hi);
    }
    case LatentSupport::Kind::UnionOfBoxes: break;
  }
  // Per-slot projection components (deduplicated), then all products.
  std::vector<std::vector<std::pair<Vec, Vec>>> comps(p.num_blocks());
  for (std::size_t k = 0; k < p.num_blocks(); ++k) {
    for (const auto& b : support.boxes()) {
      std::pair<Vec, Vec> c{gather(b.lo, p.block(k)), gather(b.hi, p.block(k))};
      const bool dup = std::any_of(comps[k].begin(), comps[k].end(), [&](const auto& e) {
        return e.first == c.first && e.second == c.second;
      });
      if (!dup) comps[k].push_back(std::move(c));
    }
  }
  std::vector<Box> boxes;
  std::vector<std::size_t> pos(p.num_blocks(), 0);
  const std::size_t d = p.latent_dim();
  while (true) {
    Box b{Vec(static_cast<Eigen::Index>(d)), Vec(static_cast<Eigen::Index>(d))};
    for (std::size_t k = 0; k < p.num_blocks(); ++k) {
      scatter(b.lo, p.block(k), comps[k][pos[k]].first);
      scatter(b.hi, p.block(k), comps[k][pos[k]].second);
    }
    boxes.push_back(std::move(b));
    std::size_t k = 0;
    while (k < pos.size() && ++pos[k] == comps[k].size()) pos[k++] = 0;
    if (k == pos.size()) break;
  }
  if (boxes.size() == 1) return LatentSupport::box(p, boxes.front().lo, boxes.front().hi);
  return LatentSupport::union_of_boxes(p, std::move(boxes));
}

// ---------------------------------------------------------------------------
// Equivalence transforms

EquivalenceTransform EquivalenceTransform::identity(const SlotPartition& partition) {
  EquivalenceTransform t;
  for (const auto& b : partition.blocks()) {
    const auto m = static_cast<Eigen::Index>(b.size());
    t.blocks.push_back(Mat::Identity(m, m));
  }
  return t;
}

EquivalenceTransform EquivalenceTransform::random(const SlotPartition& partition,
                                                  std::mt19937_64& rng, double max_cond) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  EquivalenceTransform t;
  for (const auto& b : partition.blocks()) {
    const auto m = static_cast<Eigen::Index>(b.size());
    while (true) {
      Mat g(m, m);
      for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) g(r, c) = u(rng);
      Mat mk = Mat::Identity(m, m) + 0.5 * g;
      const Vec s = Eigen::JacobiSVD<Mat>(mk).singularValues();
      if (s(m - 1) > 0.0 && s(0) / s(m - 1) <= max_cond) {
        t.blocks.push_back(std::move(mk));
        break;
      }
    }
  }
  return t;
}

void EquivalenceTransform::validate(const SlotPartition& partition) const {
  require(blocks.size() == partition.num_blocks(), ErrorCode::DimensionMismatch,
          "transform needs one matrix per slot");
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto m = static_cast<Eigen::Index>(partition.block_size(k));
    require(blocks[k].rows() == m && blocks[k].cols() == m, ErrorCode::DimensionMismatch,
            "transform block size differs from slot size");
    require(blocks[k].allFinite(), ErrorCode::NonFinite, "transform entries must be finite");
    require(std::abs(blocks[k].determinant()) > 1e-8, ErrorCode::SingularTransform,
            "transform block " + std::to_string(k + 1) + " is singular");
  }
}

EquivalenceTransform EquivalenceTransform::inverse() const {
  EquivalenceTransform t;
  for (const auto& m : blocks) {
    require(std::abs(m.determinant()) > 1e-8, ErrorCode::SingularTransform,
            "cannot invert a singular transform block");
    t.blocks.push_back(m.inverse());
  }
  return t;
}

Vec EquivalenceTransform::apply(const SlotPartition& partition, const Vec& z) const {
  require_dim(z, partition.latent_dim(), "transform input has the wrong dimension");
  Vec y(z.size());
  for (std::size_t k = 0; k < blocks.size(); ++k)
    scatter(y, partition.block(k), blocks[k] * gather(z, partition.block(k)));
  return y;
}

VectorFn apply_equivalence(const VectorFn& f, const SlotPartition& partition,
                           const EquivalenceTransform& t) {
  t.validate(partition);
  EquivalenceTransform inv = t.inverse();
  return [f, partition, inv = std::move(inv)](const Vec& y) { return f(inv.apply(partition, y)); };
}

VectorFn apply_equivalence(const GeneratorSpec& spec, const EquivalenceTransform& t) {
  return apply_equivalence(spec.as_function(), spec.partition(), t);
}

// ---------------------------------------------------------------------------
// Slot maps

SlotMap SlotMap::affine(Mat a, Vec b) {
  require(a.rows() == a.cols() && a.rows() == b.size(), ErrorCode::DimensionMismatch,
          "affine slot map needs square A and matching b");
  require(std::abs(a.determinant()) > 1e-10, ErrorCode::SingularTransform,
          "affine slot map is singular");
  SlotMap m;
  m.kind = Kind::Affine;
  m.matrix = std::move(a);
  m.offset = std::move(b);
  return m;
}

SlotMap SlotMap::tanh_affine(Vec outer, Vec inner, Vec phase, Vec shift) {
  require(outer.size() == inner.size() && inner.size() == phase.size() &&
              phase.size() == shift.size(),
          ErrorCode::DimensionMismatch, "tanh slot map parameter lengths differ");
  require(((outer.array() * inner.array()).abs() > 1e-10).all(), ErrorCode::SingularTransform,
          "tanh slot map has a zero slope");
  SlotMap m;
  m.kind = Kind::TanhAffine;
  m.scale = std::move(outer);
  m.rate = std::move(inner);
  m.phase = std::move(phase);
  m.offset = std::move(shift);
  return m;
}

SlotMap SlotMap::cubic_linear(Vec slope, Vec cubic, Vec shift) {
  require(slope.size() == cubic.size() && cubic.size() == shift.size(),
          ErrorCode::DimensionMismatch, "cubic slot map parameter lengths differ");
  require((slope.array() > 0.0).all() && (cubic.array() >= 0.0).all(),
          ErrorCode::SingularTransform, "cubic slot map needs slope > 0 and cubic >= 0");
  SlotMap m;
  m.kind = Kind::CubicLinear;
  m.scale = std::move(slope);
  m.rate = std::move(cubic);
  m.offset = std::move(shift);
  return m;
}

std::size_t SlotMap::dim() const { return static_cast<std::size_t>(offset.size()); }

Vec SlotMap::forward(const Vec& u) const {
  require_dim(u, dim(), "slot map input has the wrong dimension");
  switch (kind) {
    case Kind::Affine: return matrix * u + offset;
    case Kind::TanhAffine:
      return (scale.array() * (rate.array() * u.array() + phase.array()).tanh() + offset.array())
          .matrix();
    case Kind::CubicLinear:
      return (scale.array() * u.array() + rate.array() * u.array().cube() + offset.array())
          .matrix();
  }
  return u;
}

Vec SlotMap::inverse(const Vec& y) const {
  require_dim(y, dim(), "slot map input has the wrong dimension");
  switch (kind) {
    case Kind::Affine: return matrix.partialPivLu().solve(y - offset);
    case Kind::TanhAffine: {
      Vec u(y.size());
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double t = (y(i) - offset(i)) / scale(i);
        require(std::abs(t) < 1.0, ErrorCode::DomainError,
                "point lies outside the range of the tanh slot map");
        u(i) = (std::atanh(t) - phase(i)) / rate(i);
      }
      return u;
    }
    case Kind::CubicLinear: {
      // Strictly increasing scalar cubic: bisection bracket, then Newton.
      Vec u(y.size());
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double s = scale(i), c = rate(i), target = y(i) - offset(i);
        auto g = [&](double v) { return s * v + c * v * v * v - target; };
        double lo = -1.0, hi = 1.0;
        while (g(lo) > 0.0) lo *= 2.0;
        while (g(hi) < 0.0) hi *= 2.0;
        double v = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
          const double gv = g(v);
          if (gv == 0.0) break;
          (gv < 0.0 ? lo : hi) = v;
          double next = v - gv / (s + 3.0 * c * v * v);
          if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
          if (std::abs(next - v) <= 1e-15 * (1.0 + std::abs(v))) {
            v = next;
            break;
          }
          v = next;
        }
        u(i) = v;
      }
      return u;
    }
  }
  return y;
}

bool SlotMap::locally_invertible(const Vec& u, double tol) const {
  require_dim(u, dim(), "slot map input has the wrong dimension");
  switch (kind) {
    case Kind::Affine: return std::abs(matrix.determinant()) > tol;
    case Kind::TanhAffine: {
      const auto t = (rate.array() * u.array() + phase.array()).tanh();
      return ((scale.array() * rate.array() * (1.0 - t * t)).abs() > tol).all();
    }
    case Kind::CubicLinear:
      return ((scale.array() + 3.0 * rate.array() * u.array().square()) > tol).all();
  }
  return false;
}

SlotwiseDiffeoSpec SlotwiseDiffeoSpec::identity(const SlotPartition& partition) {
  SlotwiseDiffeoSpec h;
  for (std::size_t k = 0; k < partition.num_blocks(); ++k) {
    const auto m = static_cast<Eigen::Index>(partition.block_size(k));
    h.maps.push_back(SlotMap::affine(Mat::Identity(m, m), Vec::Zero(m)));
    h.permutation.push_back(k);
  }
  return h;
}

void SlotwiseDiffeoSpec::validate(const SlotPartition& partition) const {
  const std::size_t k_count = partition.num_blocks();
  require(maps.size() == k_count && permutation.size() == k_count, ErrorCode::DimensionMismatch,
          "slot-wise map needs one map and one permutation entry per slot");
  std::vector<bool> hit(k_count, false);
  for (std::size_t k = 0; k < k_count; ++k) {
    const std::size_t target = permutation[k];
    require(target < k_count && !hit[target], ErrorCode::InvalidArgument,
            "slot permutation is not a bijection");
    hit[target] = true;
    require(maps[k].dim() == partition.block_size(k) &&
                partition.block_size(target) == partition.block_size(k),
            ErrorCode::DimensionMismatch, "slot permutation must pair equal-size slots");
  }
}

Vec SlotwiseDiffeoSpec::forward(const SlotPartition& partition, const Vec& u) const {
  require_dim(u, partition.latent_dim(), "slot-wise map input has the wrong dimension");
  Vec z(u.size());
  for (std::size_t k = 0; k < maps.size(); ++k)
    scatter(z, partition.block(permutation[k]), maps[k].forward(gather(u, partition.block(k))));
  return z;
}

Vec SlotwiseDiffeoSpec::inverse(const SlotPartition& partition, const Vec& z) const {
  require_dim(z, partition.latent_dim(), "slot-wise map input has the wrong dimension");
  Vec u(z.size());
  for (std::size_t k = 0; k < maps.size(); ++k)
    scatter(u, partition.block(k), maps[k].inverse(gather(z, partition.block(permutation[k]))));
  return u;
}

SlotwisePair compose_slotwise(const VectorFn& f, const SlotPartition& partition,
                              const SlotwiseDiffeoSpec& h, const std::vector<Vec>& probes) {
  h.validate(partition);
  for (const auto& u : probes)
    for (std::size_t k = 0; k < h.maps.size(); ++k)
      require(h.maps[k].locally_invertible(gather(u, partition.block(k))),
              ErrorCode::SingularTransform,
              "slot map " + std::to_string(k + 1) + " is not invertible at a probe point");
  SlotwisePair pair;
  pair.h = [partition, h](const Vec& u) { return h.forward(partition, u); };
  pair.inverse = [partition, h](const Vec& z) { return h.inverse(partition, z); };
  pair.model = [f, partition, h](const Vec& u) { return f(h.forward(partition, u)); };
  return pair;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

std::vector<BasisFeature> monomial_basis(std::size_t m, int max_degree) {
  std::vector<BasisFeature> out;
  for (int deg = 1; deg <= max_degree; ++deg)
    for (const auto& a : multi_indices_of_order(m, deg))
      out.push_back(BasisFeature::monomial(std::vector<int>(a.entries().begin(), a.entries().end())));
  return out;
}

double away_from_zero(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::bernoulli_distribution sign(0.5);
  return (sign(rng) ? 1.0 : -1.0) * mag(rng);
}

}  // namespace

GeneratorSpec make_preset(const PresetOptions& o) {
  require(o.order_bound >= 0 && o.order_bound <= 2, ErrorCode::UnsupportedOrder,
          "presets exist for n in {0,1,2}");
  const SlotPartition partition = SlotPartition::contiguous(o.block_sizes);
  const std::size_t out_dim =
      o.out_dim ? o.out_dim : recommended_out_dim(partition, o.order_bound);
  const bool disjoint = o.disjoint_outputs || o.order_bound == 0;
  const std::size_t k_count = partition.num_blocks();
  require(!disjoint || out_dim >= k_count, ErrorCode::InvalidArgument,
          "disjoint outputs need at least one output per slot");

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u11(-1.0, 1.0);

  // Row ranges for disjoint outputs, proportional to slot size + 1.
  std::vector<std::size_t> row_begin(k_count + 1, 0);
  if (disjoint) {
    std::size_t weight_total = 0;
    for (std::size_t k = 0; k < k_count; ++k) weight_total += partition.block_size(k) + 1;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      std::size_t rows = std::max<std::size_t>(
          1, out_dim * (partition.block_size(k) + 1) / weight_total);
      if (k + 1 == k_count) rows = out_dim - assigned;
      row_begin[k] = assigned;
      assigned += rows;
    }
    require(assigned == out_dim && row_begin[k_count - 1] < out_dim, ErrorCode::InvalidArgument,
            "output rows could not be split across slots");
    row_begin[k_count] = out_dim;
  }

  std::vector<SlotFunctionSpec> slots;
  for (std::size_t k = 0; k < k_count; ++k) {
    const std::size_t m = partition.block_size(k);
    SlotFunctionSpec sf;
    sf.slot_index = k;
    sf.basis = monomial_basis(m, 3);
    if (o.trig_features) {
      Vec w(static_cast<Eigen::Index>(m)), v(static_cast<Eigen::Index>(m));
      for (std::size_t i = 0; i < m; ++i) {
        w(static_cast<Eigen::Index>(i)) = u11(rng);
        v(static_cast<Eigen::Index>(i)) = 0.5 * u11(rng);
      }
      sf.basis.push_back(BasisFeature::trig(BasisFeature::Kind::Sin, w, u11(rng)));
      sf.basis.push_back(BasisFeature::trig(BasisFeature::Kind::Exp, v, 0.0));
    }
    sf.coefficients = Mat::Zero(static_cast<Eigen::Index>(out_dim),
                                static_cast<Eigen::Index>(sf.basis.size()));
    const std::size_t lo = disjoint ? row_begin[k] : 0;
    const std::size_t hi = disjoint ? row_begin[k + 1] : out_dim;
    for (std::size_t l = lo; l < hi; ++l)
      for (std::size_t q = 0; q < sf.basis.size(); ++q) {
        const auto& b = sf.basis[q];
        const bool cubic = b.kind == BasisFeature::Kind::Monomial &&
                           std::accumulate(b.exponents.begin(), b.exponents.end(), 0) == 3;
        sf.coefficients(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(q)) =
            cubic ? away_from_zero(rng) : normal(rng);
      }
    slots.push_back(std::move(sf));
  }

  InteractionTermSet inter;
  inter.order_bound = o.order_bound;
  if (o.order_bound >= 2)
    for (const auto& alpha : interaction_indices(partition, o.order_bound, true)) {
      Vec c(static_cast<Eigen::Index>(out_dim));
      for (Eigen::Index l = 0; l < c.size(); ++l) c(l) = o.interaction_scale * normal(rng);
      inter.terms.emplace(alpha, std::move(c));
    }
  return GeneratorSpec(partition, std::move(slots), std::move(inter), out_dim);
}

GeneratorSpec make_polynomial_generator(const SlotPartition& partition, int n,
                                        std::size_t out_dim, int slot_degree,
                                        std::mt19937_64& rng) {
  require(slot_degree >= 1 && slot_degree <= 4, ErrorCode::InvalidArgument,
          "slot degree must be 1..4");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<SlotFunctionSpec> slots;
  for (std::size_t k = 0; k < partition.num_blocks(); ++k) {
    SlotFunctionSpec sf;
    sf.slot_index = k;
    sf.basis = monomial_basis(partition.block_size(k), slot_degree);
    sf.coefficients = Mat::Zero(static_cast<Eigen::Index>(out_dim),
                                static_cast<Eigen::Index>(sf.basis.size()));
    for (Eigen::Index l = 0; l < sf.coefficients.rows(); ++l)
      for (Eigen::Index q = 0; q < sf.coefficients.cols(); ++q) {
        const int deg = std::accumulate(sf.basis[static_cast<std::size_t>(q)].exponents.begin(),
                                        sf.basis[static_cast<std::size_t>(q)].exponents.end(), 0);
        sf.coefficients(l, q) = deg == slot_degree ? away_from_zero(rng) : normal(rng);
      }
    slots.push_back(std::move(sf));
  }
  InteractionTermSet inter;
  inter.order_bound = n;
  if (n >= 2)
    for (const auto& alpha : interaction_indices(partition, n, true)) {
      Vec c(static_cast<Eigen::Index>(out_dim));
      for (Eigen::Index l = 0; l < c.size(); ++l) c(l) = normal(rng);
      inter.terms.emplace(alpha, std::move(c));
    }
  return GeneratorSpec(partition, std::move(slots), std::move(inter), out_dim);
}

// ---------------------------------------------------------------------------
// JSON

json vector_to_json(const Vec& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Vec vector_from_json(const json& j) {
  require(j.is_array(), ErrorCode::ConfigError, "expected a numeric array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json matrix_to_json(const Mat& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(vector_to_json(m.row(r).transpose()));
  return j;
}

Mat matrix_from_json(const json& j) {
  require(j.is_array(), ErrorCode::ConfigError, "expected an array of rows");
  if (j.empty()) return Mat();
  const std::size_t cols = j[0].size();
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    require(j[r].size() == cols, ErrorCode::ConfigError, "matrix rows differ in length");
    m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r]).transpose();
  }
  return m;
}

namespace {
const char* kind_name(BasisFeature::Kind k) {
  switch (k) {
    case BasisFeature::Kind::Monomial: return "monomial";
    case BasisFeature::Kind::Sin: return "sin";
    case BasisFeature::Kind::Cos: return "cos";
    case BasisFeature::Kind::Exp: return "exp";
  }
  return "?";
}
}  // namespace

void to_json(json& j, const BasisFeature& f) {
  if (f.kind == BasisFeature::Kind::Monomial) {
    j = {{"kind", "monomial"}, {"exponents", f.exponents}};
  } else {
    j = {{"kind", kind_name(f.kind)}, {"weights", vector_to_json(f.weights)}, {"bias", f.bias}};
  }
}

void from_json(const json& j, BasisFeature& f) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "monomial") {
    f = BasisFeature::monomial(j.at("exponents").get<std::vector<int>>());
    return;
  }
  BasisFeature::Kind k;
  if (kind == "sin") k = BasisFeature::Kind::Sin;
  else if (kind == "cos") k = BasisFeature::Kind::Cos;
  else if (kind == "exp") k = BasisFeature::Kind::Exp;
  else throw Error(ErrorCode::ConfigError, "unknown feature kind '" + kind + "'");
  f = BasisFeature::trig(k, vector_from_json(j.at("weights")), j.value("bias", 0.0));
}

json generator_to_json(const GeneratorSpec& spec) {
  json slots = json::array();
  for (const auto& sf : spec.slot_functions())
    slots.push_back({{"slot", sf.slot_index + 1},
                     {"basis", sf.basis},
                     {"coefficients", matrix_to_json(sf.coefficients)}});
  json terms = json::array();
  for (const auto& [alpha, c] : spec.interactions().terms)
    terms.push_back({{"alpha", std::vector<int>(alpha.entries().begin(), alpha.entries().end())},
                     {"c", vector_to_json(c)}});
  return {{"partition", spec.partition()},
          {"out_dim", spec.out_dim()},
          {"slot_functions", slots},
          {"interactions", {{"order_bound", spec.interactions().order_bound}, {"terms", terms}}}};
}

GeneratorSpec generator_from_json(const json& j) {
  try {
    const auto partition = j.at("partition").get<SlotPartition>();
    const auto out_dim = j.at("out_dim").get<std::size_t>();
    std::vector<SlotFunctionSpec> slots;
    for (const auto& js : j.value("slot_functions", json::array())) {
      SlotFunctionSpec sf;
      const auto slot = js.at("slot").get<long long>();
      require(slot >= 1, ErrorCode::ConfigError, "slot indices are 1-based");
      sf.slot_index = static_cast<std::size_t>(slot - 1);
      sf.basis = js.at("basis").get<std::vector<BasisFeature>>();
      sf.coefficients = matrix_from_json(js.at("coefficients"));
      if (sf.basis.empty()) sf.coefficients.resize(static_cast<Eigen::Index>(out_dim), 0);
      slots.push_back(std::move(sf));
    }
    InteractionTermSet inter;
    const json ji = j.value("interactions", json::object());
    inter.order_bound = ji.value("order_bound", 0);
    for (const auto& jt : ji.value("terms", json::array())) {
      MultiIndex alpha(jt.at("alpha").get<std::vector<int>>());
      require(!inter.terms.count(alpha), ErrorCode::ConfigError,
              "duplicate interaction term " + alpha.to_string());
      inter.terms.emplace(std::move(alpha), vector_from_json(jt.at("c")));
    }
    return GeneratorSpec(partition, std::move(slots), std::move(inter), out_dim);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed generator JSON: ") + e.what());
  }
}

json support_to_json(const LatentSupport& s) {
  const Box& b0 = s.boxes().front();
  switch (s.kind()) {
    case LatentSupport::Kind::BoxProduct:
      return {{"kind", "box"}, {"lo", vector_to_json(b0.lo)}, {"hi", vector_to_json(b0.hi)}};
    case LatentSupport::Kind::Band: {
      json pairs = json::array();
      for (const auto& p : s.band_pairs())
        pairs.push_back({{"i", p.i + 1}, {"j", p.j + 1}, {"w", p.half_width}});
      return {{"kind", "band"},
              {"lo", vector_to_json(b0.lo)},
              {"hi", vector_to_json(b0.hi)},
              {"pairs", pairs}};
    }
    case LatentSupport::Kind::UnionOfBoxes: {
      json boxes = json::array();
      for (const auto& b : s.boxes())
        boxes.push_back({{"lo", vector_to_json(b.lo)}, {"hi", vector_to_json(b.hi)}});
      return {{"kind", "union_of_boxes"}, {"boxes", boxes}};
    }
  }
  return {};
}

LatentSupport support_from_json(const json& j, const SlotPartition& partition) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "box")
      return LatentSupport::box(partition, vector_from_json(j.at("lo")), vector_from_json(j.at("hi")));
    if (kind == "band") {
      std::vector<BandPair> pairs;
      for (const auto& jp : j.at("pairs")) {
        const auto i = jp.at("i").get<long long>(), jj = jp.at("j").get<long long>();
        require(i >= 1 && jj >= 1, ErrorCode::ConfigError, "band indices are 1-based");
        pairs.push_back({static_cast<std::size_t>(i - 1), static_cast<std::size_t>(jj - 1),
                         jp.at("w").get<double>()});
      }
      return LatentSupport::band(partition, vector_from_json(j.at("lo")),
                                 vector_from_json(j.at("hi")), std::move(pairs));
    }
    if (kind == "union_of_boxes") {
      std::vector<Box> boxes;
      for (const auto& jb : j.at("boxes"))
        boxes.push_back({vector_from_json(jb.at("lo")), vector_from_json(jb.at("hi"))});
      return LatentSupport::union_of_boxes(partition, std::move(boxes));
    }
    throw Error(ErrorCode::ConfigError, "unknown support kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed support JSON: ") + e.what());
  }
}

json transform_to_json(const EquivalenceTransform& t) {
  json blocks = json::array();
  for (const auto& m : t.blocks) blocks.push_back(matrix_to_json(m));
  return {{"blocks", blocks}};
}

EquivalenceTransform transform_from_json(const json& j) {
  EquivalenceTransform t;
  for (const auto& jb : j.at("blocks")) t.blocks.push_back(matrix_from_json(jb));
  return t;
}

}  // namespace asymlab
