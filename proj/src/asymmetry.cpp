#include "asymlab/asymmetry.hpp"

#include "asymlab/error.hpp"
#include "asymlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

namespace asymlab {

using nlohmann::json;

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::NotApplicable: return "not_applicable";
  }
  return "?";
}

json to_json(const CheckReport& r) {
  json w = json::array();
  for (const auto& x : r.witnesses)
    w.push_back({{"point", vector_to_json(x.point)}, {"indices", x.indices}, {"value", x.value}});
  json parts = json::array();
  for (const auto& p : r.parts) parts.push_back(to_json(p));
  json j = {{"condition", r.condition},
            {"verdict", to_string(r.verdict)},
            {"margin", r.margin},
            {"probes_used", r.probes_used},
            {"probes_passed", r.probes_passed},
            {"witnesses", w}};
  if (r.probed_region.lo.size())
    j["probed_region"] = {{"lo", vector_to_json(r.probed_region.lo)},
                          {"hi", vector_to_json(r.probed_region.hi)}};
  if (!r.note.empty()) j["note"] = r.note;
  if (!parts.empty()) j["parts"] = parts;
  return j;
}

double active_tolerance(const Mat& jacobian, double tol_rel) {
  const double scale = jacobian.size() ? jacobian.cwiseAbs().maxCoeff() : 0.0;
  return tol_rel * (1.0 + scale);
}

namespace {

struct ProbeOutcome {
  bool pass = true;
  double margin = std::numeric_limits<double>::infinity();
  std::vector<Witness> witnesses;
};

Box region_of(const std::vector<Vec>& probes) {
  Box b{probes.front(), probes.front()};
  for (const auto& z : probes) {
    b.lo = b.lo.cwiseMin(z);
    b.hi = b.hi.cwiseMax(z);
  }
  return b;
}

template <class PerProbe>
CheckReport run_probes(const std::string& name, const std::vector<Vec>& probes,
                       const CheckConfig& cfg, double required_fraction, PerProbe&& per_probe) {
  require(!probes.empty(), ErrorCode::InvalidArgument, name + ": probe set must be non-empty");
  std::vector<ProbeOutcome> out(probes.size());
  parallel_for(probes.size(), [&](std::size_t i) { out[i] = per_probe(probes[i]); });
  CheckReport r;
  r.condition = name;
  r.probes_used = static_cast<int>(probes.size());
  r.probed_region = region_of(probes);
  r.margin = std::numeric_limits<double>::infinity();
  for (auto& o : out) {
    r.probes_passed += o.pass;
    r.margin = std::min(r.margin, o.margin);
    for (auto& w : o.witnesses)
      if (r.witnesses.size() < cfg.max_witnesses) r.witnesses.push_back(std::move(w));
  }
  r.verdict = r.pass_fraction() >= required_fraction ? Verdict::Pass : Verdict::Fail;
  return r;
}

std::string one_based(const std::vector<std::size_t>& idx) {
  std::ostringstream s;
  s << "(";
  for (std::size_t i = 0; i < idx.size(); ++i) s << (i ? "," : "") << idx[i] + 1;
  s << ")";
  return s.str();
}

std::string alpha_label(const MultiIndex& a) { return "alpha=" + a.to_string(); }

void merge_parts(CheckReport& r, std::vector<CheckReport> parts, const CheckConfig& cfg) {
  r.verdict = Verdict::Pass;
  r.margin = std::numeric_limits<double>::infinity();
  for (const auto& p : parts) {
    if (!p.pass()) r.verdict = Verdict::Fail;
    r.margin = std::min(r.margin, p.margin);
    for (const auto& w : p.witnesses)
      if (r.witnesses.size() < cfg.max_witnesses) {
        Witness x = w;
        x.indices = p.condition + ": " + w.indices;
        r.witnesses.push_back(std::move(x));
      }
  }
  r.probes_used = parts.empty() ? 0 : parts.front().probes_used;
  r.probes_passed = r.probes_used;
  for (const auto& p : parts) r.probes_passed = std::min(r.probes_passed, p.probes_passed);
  if (!parts.empty()) r.probed_region = parts.front().probed_region;
  r.parts = std::move(parts);
}

// Non-empty disjoint splits {A, B} of a slot, each unordered split once; a
// one-dimensional slot yields the self split A = B = {i}.
std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> slot_splits(
    const std::vector<std::size_t>& block) {
  std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out;
  const std::size_t m = block.size();
  if (m == 1) {
    out.push_back({block, block});
    return out;
  }
  require(m <= 6, ErrorCode::EnumerationOverflow,
          "within-slot split enumeration supports slots of size <= 6");
  for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << m); ++mask) {
    if (!(mask & 1)) continue;
    std::vector<std::size_t> a, b;
    for (std::size_t r = 0; r < m; ++r) ((mask >> r) & 1 ? a : b).push_back(block[r]);
    out.push_back({std::move(a), std::move(b)});
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

CheckReport check_no_interaction(const VectorFn& f, const SlotPartition& p,
                                 const std::vector<Vec>& probes, const CheckConfig& cfg) {
  return run_probes("no_interaction", probes, cfg, 1.0, [&](const Vec& z) {
    ProbeOutcome o;
    const Mat j = jacobian_matrix(f, z, cfg.stencil);
    const double tol = active_tolerance(j, cfg.tol_rel);
    for (std::size_t i = 0; i < p.latent_dim(); ++i)
      for (std::size_t jj = i + 1; jj < p.latent_dim(); ++jj) {
        if (p.block_of(i) == p.block_of(jj)) continue;
        for (Eigen::Index l = 0; l < j.rows(); ++l) {
          const double a = std::abs(j(l, static_cast<Eigen::Index>(i)));
          const double b = std::abs(j(l, static_cast<Eigen::Index>(jj)));
          const double both = std::min(a, b);
          o.margin = std::min(o.margin, tol - both);
          if (both > tol) {
            o.pass = false;
            if (o.witnesses.size() < cfg.max_witnesses)
              o.witnesses.push_back({z,
                                     "i=" + std::to_string(i + 1) + ",j=" + std::to_string(jj + 1) +
                                         ",output=" + std::to_string(l + 1),
                                     a * b});
          }
        }
      }
    if (!std::isfinite(o.margin)) o.margin = tol;
    return o;
  });
}

CheckReport check_order_at_most_n(const VectorFn& f, const SlotPartition& p, int n,
                                  const std::vector<Vec>& probes, const CheckConfig& cfg) {
  require(n >= 0 && n + 1 <= 3, ErrorCode::UnsupportedOrder,
          "interaction orders are certified for n in {0,1,2}");
  if (n == 0) {
    CheckReport r = check_no_interaction(f, p, probes, cfg);
    r.condition = "order_at_most_0";
    return r;
  }
  const auto alphas = interaction_indices(p, n + 1, false);
  return run_probes("order_at_most_" + std::to_string(n), probes, cfg, 1.0, [&](const Vec& z) {
    ProbeOutcome o;
    const double tol = active_tolerance(jacobian_matrix(f, z, cfg.stencil), cfg.tol_rel);
    o.margin = tol;
    for (const auto& a : alphas) {
      const double v = derivative_by_multiindex(f, z, a, cfg.stencil).cwiseAbs().maxCoeff();
      o.margin = std::min(o.margin, tol - v);
      if (v > tol) {
        o.pass = false;
        if (o.witnesses.size() < cfg.max_witnesses) o.witnesses.push_back({z, alpha_label(a), v});
      }
    }
    return o;
  });
}

CheckReport check_within_slot_order(const VectorFn& f, const SlotPartition& p, int n,
                                    const std::vector<Vec>& probes, const CheckConfig& cfg) {
  require(n >= 0 && n + 1 <= 3, ErrorCode::UnsupportedOrder,
          "interaction orders are certified for n in {0,1,2}");
  std::vector<std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>> splits;
  for (const auto& b : p.blocks()) splits.push_back(slot_splits(b));
  const std::size_t d = p.latent_dim();
  const auto all_alphas = n >= 1 ? multi_indices_of_order(d, n + 1) : std::vector<MultiIndex>{};

  return run_probes("within_slot_order_" + std::to_string(n + 1), probes, cfg, 1.0,
                    [&](const Vec& z) {
    ProbeOutcome o;
    const Mat j = jacobian_matrix(f, z, cfg.stencil);
    const double tol = active_tolerance(j, cfg.tol_rel);
    std::map<MultiIndex, double> cache;
    auto deriv = [&](const MultiIndex& a) {
      auto it = cache.find(a);
      if (it != cache.end()) return it->second;
      const double v = derivative_by_multiindex(f, z, a, cfg.stencil).cwiseAbs().maxCoeff();
      cache.emplace(a, v);
      return v;
    };
    for (std::size_t k = 0; k < p.num_blocks(); ++k) {
      for (const auto& [A, B] : splits[k]) {
        double best = 0.0;
        if (n == 0) {
          for (std::size_t i : A)
            for (std::size_t jj : B)
              for (Eigen::Index l = 0; l < j.rows(); ++l)
                best = std::max(best, std::min(std::abs(j(l, static_cast<Eigen::Index>(i))),
                                               std::abs(j(l, static_cast<Eigen::Index>(jj)))));
        } else {
          auto qualifies = [&](const MultiIndex& a) {
            for (std::size_t i : A)
              for (std::size_t jj : B)
                if (a[i] >= 1 && a[jj] >= 1) return true;
            return false;
          };
          // Indices supported inside the slot first; others only if needed.
          for (int pass = 0; pass < 2 && best <= tol; ++pass)
            for (const auto& a : all_alphas) {
              bool inside = true;
              for (std::size_t i = 0; i < d; ++i)
                if (a[i] > 0 && p.block_of(i) != k) inside = false;
              if (inside != (pass == 0) || !qualifies(a)) continue;
              best = std::max(best, deriv(a));
            }
        }
        o.margin = std::min(o.margin, best - tol);
        if (best <= tol) {
          o.pass = false;
          if (o.witnesses.size() < cfg.max_witnesses)
            o.witnesses.push_back({z,
                                   "slot=" + std::to_string(k + 1) + ",A=" + one_based(A) +
                                       ",B=" + one_based(B),
                                   best});
        }
      }
    }
    return o;
  });
}

CheckReport check_interaction_asymmetry(const VectorFn& f, const SlotPartition& p, int n,
                                        const std::vector<Vec>& probes, int equiv_samples,
                                        const CheckConfig& cfg) {
  require(equiv_samples >= 0, ErrorCode::InvalidArgument, "equiv_samples must be >= 0");
  std::vector<CheckReport> parts;
  parts.push_back(check_order_at_most_n(f, p, n, probes, cfg));
  parts.push_back(check_within_slot_order(f, p, n, probes, cfg));
  std::mt19937_64 rng(cfg.seed);
  for (int s = 0; s < equiv_samples; ++s) {
    const auto t = EquivalenceTransform::random(p, rng);
    const VectorFn fbar = apply_equivalence(f, p, t);
    std::vector<Vec> moved;
    moved.reserve(probes.size());
    for (const auto& z : probes) moved.push_back(t.apply(p, z));
    CheckReport r = check_within_slot_order(fbar, p, n, moved, cfg);
    r.condition += "[equivalent " + std::to_string(s + 1) + "]";
    parts.push_back(std::move(r));
  }
  CheckReport r;
  r.condition = "interaction_asymmetry_" + std::to_string(n);
  merge_parts(r, std::move(parts), cfg);
  return r;
}

// ---------------------------------------------------------------------------

SufficientIndependenceMatrix build_sufficient_independence_matrix(const VectorFn& f,
                                                                  const SlotPartition& p, int n,
                                                                  const Vec& z,
                                                                  const StencilConfig& stencil) {
  require(n >= 0 && n <= 2, ErrorCode::UnsupportedOrder,
          "sufficient independence is defined for n in {0,1,2}");
  const std::size_t d = p.latent_dim();
  std::vector<Vec> cols;
  SufficientIndependenceMatrix m;
  auto open = [&](std::string label, std::size_t k) {
    m.groups.push_back({std::move(label), k, static_cast<Eigen::Index>(cols.size()), 0});
  };
  auto add = [&](std::vector<std::size_t> idx) {
    cols.push_back(derivative_by_multiindex(f, z, MultiIndex::from_indices(d, idx), stencil));
    ++m.groups.back().count;
  };
  for (std::size_t k = 0; k < p.num_blocks(); ++k) {
    const auto& b = p.block(k);
    open("D1[slot " + std::to_string(k + 1) + "]", k);
    for (std::size_t i : b) add({i});
    if (n == 0) continue;
    if (n == 1) {
      open("D2[slot " + std::to_string(k + 1) + "]", k);
      for (std::size_t a = 0; a < b.size(); ++a)
        for (std::size_t c = a; c < b.size(); ++c) add({b[a], b[c]});
      continue;
    }
    m.groups.back().label = "D1+D2[slot " + std::to_string(k + 1) + "]";
    for (std::size_t i : b)
      for (std::size_t i2 = 0; i2 < d; ++i2) {
        if (p.block_of(i2) == k ? i2 < i : p.block_of(i2) < k) continue;
        add({i, i2});
      }
    open("D3[slot " + std::to_string(k + 1) + "]", k);
    for (std::size_t a = 0; a < b.size(); ++a)
      for (std::size_t c = a; c < b.size(); ++c)
        for (std::size_t e = c; e < b.size(); ++e) add({b[a], b[c], b[e]});
  }
  m.columns.resize(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) m.columns.col(static_cast<Eigen::Index>(c)) = cols[c];
  return m;
}

CheckReport sufficient_independence_check(const VectorFn& f, const SlotPartition& p, int n,
                                          const std::vector<Vec>& probes, const CheckConfig& cfg) {
  CheckReport r = run_probes(
      "sufficient_independence_" + std::to_string(n), probes, cfg, cfg.min_pass_fraction,
      [&](const Vec& z) {
        ProbeOutcome o;
        const auto m = build_sufficient_independence_matrix(f, p, n, z, cfg.stencil);
        for (const auto& g : m.groups)
          if (g.label.rfind("D1", 0) == 0)
            require(m.columns.middleCols(g.begin, p.block_size(g.slot)).cwiseAbs().maxCoeff() > 0.0,
                    ErrorCode::DegenerateDerivatives,
                    "first derivatives of slot " + std::to_string(g.slot + 1) + " vanish");
        const Vec s = Eigen::BDCSVD<Mat>(m.columns).singularValues();
        const double cutoff = cfg.rank_tol * s(0);
        int whole = 0;
        for (Eigen::Index i = 0; i < s.size(); ++i) whole += s(i) > cutoff;
        int expected = 0;
        for (const auto& g : m.groups)
          expected += numerical_rank_abs(m.columns.middleCols(g.begin, g.count), cutoff);
        const double sigma = expected <= s.size() ? s(expected - 1) : 0.0;
        o.margin = sigma / s(0) - cfg.rank_tol;
        o.pass = whole == expected;
        if (!o.pass)
          o.witnesses.push_back({z,
                                 "rank=" + std::to_string(whole) +
                                     ",sum_of_group_ranks=" + std::to_string(expected),
                                 sigma / s(0)});
        return o;
      });
  const auto sample = build_sufficient_independence_matrix(f, p, n, probes.front(), cfg.stencil);
  if (sample.columns.rows() < sample.columns.cols())
    r.note = "d_x=" + std::to_string(sample.columns.rows()) + " is below the column count " +
             std::to_string(sample.columns.cols()) + "; the condition may be unsatisfiable";
  return r;
}

CheckReport rank_factorization_property(const Mat& a,
                                        const std::vector<std::vector<std::size_t>>& blocks,
                                        int trials, std::uint64_t seed, double rank_tol) {
  require(a.allFinite(), ErrorCode::NonFinite, "matrix must be finite");
  CheckReport r;
  r.condition = "rank_factorization";
  std::vector<bool> seen(static_cast<std::size_t>(a.cols()), false);
  for (const auto& b : blocks)
    for (std::size_t c : b) {
      require(c < seen.size() && !seen[c], ErrorCode::InvalidArgument,
              "column blocks must partition the columns");
      seen[c] = true;
    }
  require(std::all_of(seen.begin(), seen.end(), [](bool x) { return x; }),
          ErrorCode::InvalidArgument, "column blocks must cover every column");

  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
  const Vec s = svd.singularValues();
  const double norm = s.size() ? s(0) : 0.0;
  const double cutoff = rank_tol * norm;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) > cutoff;
  auto sub = [&](const std::vector<std::size_t>& b) {
    Mat m(a.rows(), static_cast<Eigen::Index>(b.size()));
    for (std::size_t c = 0; c < b.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = a.col(static_cast<Eigen::Index>(b[c]));
    return m;
  };
  int sum = 0;
  for (const auto& b : blocks) sum += numerical_rank_abs(sub(b), cutoff);
  if (sum != rank) {
    r.verdict = Verdict::NotApplicable;
    r.note = "rank(A)=" + std::to_string(rank) + " differs from the block rank sum " +
             std::to_string(sum);
    return r;
  }
  const Mat null = svd.matrixV().rightCols(a.cols() - rank);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const double bound = 1e-8 * norm;
  r.margin = bound;
  for (int t = 0; t < trials; ++t) {
    ++r.probes_used;
    if (null.cols() == 0) {
      ++r.probes_passed;
      continue;
    }
    Vec coef(null.cols());
    for (Eigen::Index i = 0; i < coef.size(); ++i) coef(i) = g(rng);
    const Vec v = null * coef.normalized();
    bool ok = true;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      Vec vs(static_cast<Eigen::Index>(blocks[k].size()));
      for (std::size_t c = 0; c < blocks[k].size(); ++c)
        vs(static_cast<Eigen::Index>(c)) = v(static_cast<Eigen::Index>(blocks[k][c]));
      const double res = (sub(blocks[k]) * vs).cwiseAbs().maxCoeff();
      r.margin = std::min(r.margin, bound - res);
      if (res > bound) {
        ok = false;
        if (r.witnesses.size() < 8)
          r.witnesses.push_back({v, "block=" + std::to_string(k + 1), res});
      }
    }
    r.probes_passed += ok;
  }
  if (null.cols() == 0) r.note = "A has full column rank; the null space is trivial";
  r.verdict = r.probes_passed == r.probes_used ? Verdict::Pass : Verdict::Fail;
  return r;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> slot_output_sets(const Mat& j, const SlotPartition& p,
                                                       double tol) {
  std::vector<std::vector<std::size_t>> out(p.num_blocks());
  for (std::size_t k = 0; k < p.num_blocks(); ++k)
    for (Eigen::Index l = 0; l < j.rows(); ++l)
      for (std::size_t i : p.block(k))
        if (std::abs(j(l, static_cast<Eigen::Index>(i))) > tol) {
          out[k].push_back(static_cast<std::size_t>(l));
          break;
        }
  return out;
}

CheckReport compositionality_check(const VectorFn& f, const SlotPartition& p,
                                   const std::vector<Vec>& probes, const CheckConfig& cfg) {
  return run_probes("compositionality", probes, cfg, 1.0, [&](const Vec& z) {
    ProbeOutcome o;
    const Mat j = jacobian_matrix(f, z, cfg.stencil);
    const double tol = active_tolerance(j, cfg.tol_rel);
    const auto sets = slot_output_sets(j, p, tol);
    std::vector<int> owner(static_cast<std::size_t>(j.rows()), -1);
    o.margin = tol;
    for (std::size_t k = 0; k < sets.size(); ++k)
      for (std::size_t l : sets[k]) {
        if (owner[l] >= 0) {
          o.pass = false;
          // Slack: the weaker of the two slots' strongest derivative on row l.
          auto strength = [&](std::size_t slot) {
            double s = 0.0;
            for (std::size_t i : p.block(slot))
              s = std::max(s, std::abs(j(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i))));
            return s;
          };
          const double v = std::min(strength(k), strength(static_cast<std::size_t>(owner[l])));
          o.margin = std::min(o.margin, tol - v);
          if (o.witnesses.size() < cfg.max_witnesses)
            o.witnesses.push_back({z,
                                   "output=" + std::to_string(l + 1) + ",slots=" +
                                       std::to_string(owner[l] + 1) + "," + std::to_string(k + 1),
                                   v});
        } else {
          owner[l] = static_cast<int>(k);
        }
      }
    return o;
  });
}

CheckReport irreducibility_check(const VectorFn& f, const SlotPartition& p,
                                 const std::vector<Vec>& probes, const CheckConfig& cfg) {
  std::vector<std::uint64_t> probe_seeds(probes.size());
  {
    std::mt19937_64 rng(cfg.seed);
    for (auto& s : probe_seeds) s = rng();
  }
  std::size_t vacuous = 0;
  std::mutex mu;
  CheckReport r = run_probes("irreducibility", probes, cfg, 1.0, [&](const Vec& z) {
    ProbeOutcome o;
    const Mat j = jacobian_matrix(f, z, cfg.stencil);
    const double tol = active_tolerance(j, cfg.tol_rel);
    const auto sets = slot_output_sets(j, p, tol);
    const std::size_t probe_index = static_cast<std::size_t>(&z - probes.data());
    std::mt19937_64 rng(probe_seeds[probe_index]);
    o.margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < sets.size(); ++k) {
      const auto& rows = sets[k];
      if (rows.size() < 2) {
        std::lock_guard<std::mutex> lock(mu);
        ++vacuous;
        continue;
      }
      Mat sub(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p.block_size(k)));
      for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t c = 0; c < p.block_size(k); ++c)
          sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) =
              j(static_cast<Eigen::Index>(rows[a]), static_cast<Eigen::Index>(p.block(k)[c]));
      const double cutoff = cfg.rank_tol * largest_singular_value(sub);
      const int total = numerical_rank_abs(sub, cutoff);
      auto test_mask = [&](std::uint64_t mask) {
        std::vector<Eigen::Index> s1, s2;
        for (std::size_t a = 0; a < rows.size(); ++a)
          ((mask >> a) & 1 ? s1 : s2).push_back(static_cast<Eigen::Index>(a));
        const int r1 = numerical_rank_abs(sub(s1, Eigen::all), cutoff);
        const int r2 = numerical_rank_abs(sub(s2, Eigen::all), cutoff);
        const double slack = r1 + r2 - total - 1;
        o.margin = std::min(o.margin, slack);
        if (slack < 0) {
          o.pass = false;
          if (o.witnesses.size() < cfg.max_witnesses) {
            std::vector<std::size_t> rows1;
            for (auto a : s1) rows1.push_back(rows[static_cast<std::size_t>(a)]);
            o.witnesses.push_back(
                {z, "slot=" + std::to_string(k + 1) + ",S1=" + one_based(rows1), double(r1 + r2)});
          }
        }
      };
      const std::size_t m = rows.size();
      if (m <= cfg.split_enumeration_cap) {
        for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << m); ++mask)
          if (mask & 1) test_mask(mask);
      } else {
        std::uniform_int_distribution<int> bit(0, 1);
        for (std::size_t t = 0; t < cfg.sampled_splits; ++t) {
          std::uint64_t mask = 1;
          for (std::size_t a = 1; a < m; ++a) mask |= static_cast<std::uint64_t>(bit(rng)) << a;
          if (mask + 1 == (std::uint64_t{1} << m)) mask &= ~(std::uint64_t{1} << (m - 1));
          test_mask(mask);
        }
      }
    }
    if (!std::isfinite(o.margin)) o.margin = 0.0;
    return o;
  });
  if (vacuous)
    r.note = std::to_string(vacuous) + " slot/probe pairs had |I_k(z)| < 2 and were vacuous";
  return r;
}

CheckReport additivity_check(const VectorFn& f, const SlotPartition& p,
                             const std::vector<Vec>& probes, const CheckConfig& cfg) {
  CheckReport r = check_order_at_most_n(f, p, 1, probes, cfg);
  r.condition = "additivity";
  return r;
}

CheckReport sufficient_nonlinearity_check(const VectorFn& f, const SlotPartition& p,
                                          const std::vector<Vec>& probes, const CheckConfig& cfg) {
  const std::size_t d = p.latent_dim();
  return run_probes("sufficient_nonlinearity", probes, cfg, cfg.min_pass_fraction, [&](const Vec& z) {
    ProbeOutcome o;
    std::vector<Vec> cols;
    for (std::size_t i = 0; i < d; ++i)
      cols.push_back(derivative_by_multiindex(f, z, MultiIndex::unit(d, i), cfg.stencil));
    for (const auto& b : p.blocks())
      for (std::size_t a = 0; a < b.size(); ++a)
        for (std::size_t c = a; c < b.size(); ++c) {
          const std::vector<std::size_t> idx{b[a], b[c]};
          cols.push_back(derivative_by_multiindex(f, z, MultiIndex::from_indices(d, idx), cfg.stencil));
        }
    Mat w(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) w.col(static_cast<Eigen::Index>(c)) = cols[c];
    const Vec s = Eigen::BDCSVD<Mat>(w).singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    const double smin = s.size() == w.cols() ? s(s.size() - 1) : 0.0;
    o.margin = (smax > 0.0 ? smin / smax : 0.0) - cfg.rank_tol;
    o.pass = o.margin > 0.0;
    if (!o.pass)
      o.witnesses.push_back({z, "columns=" + std::to_string(w.cols()) + ",rows=" + std::to_string(w.rows()),
                             smax > 0.0 ? smin / smax : 0.0});
    return o;
  });
}

}  // namespace asymlab
