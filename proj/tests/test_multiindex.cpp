#include "asymlab/error.hpp"
#include "asymlab/multiindex.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace asymlab;
using testsupport::rng_for;

namespace {
MultiIndex mi(std::vector<int> e) { return MultiIndex(std::move(e)); }

SlotPartition parts(std::size_t d, std::vector<std::vector<std::size_t>> b) {
  return SlotPartition(d, std::move(b));
}

std::set<MultiIndex> as_set(const std::vector<MultiIndex>& v) { return {v.begin(), v.end()}; }

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}
}  // namespace

TEST_CASE("mi_norm sums entries") {
  CHECK(mi_norm(mi({1, 0, 2})) == 3);
  CHECK(mi_norm(mi({0, 0, 0})) == 0);
  CHECK(mi_norm(mi({3, 3})) == 6);
}

TEST_CASE("negative entries are rejected") {
  CHECK_THROWS_AS(mi({1, -1}), Error);
}

TEST_CASE("mi_power") {
  CHECK(mi_power(Vec::Map(std::vector<double>{2, 3}.data(), 2), mi({1, 2})) == doctest::Approx(18));
  CHECK(mi_power(Vec::Map(std::vector<double>{5, 7}.data(), 2), mi({0, 0})) == 1.0);
  Vec z(3);
  z << -1, 2, 0.5;
  CHECK(mi_power(z, mi({2, 1, 2})) == doctest::Approx(0.5));
  try {
    (void)mi_power(z, mi({1, 1}));
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("mi_poly_derivative") {
  auto d = mi_poly_derivative(mi({1, 0}), mi({2, 1}));
  CHECK(d.coefficient == 2.0);
  CHECK(d.residual == mi({1, 1}));
  d = mi_poly_derivative(mi({2, 0}), mi({1, 1}));
  CHECK(d.coefficient == 0.0);
  CHECK(d.residual == mi({0, 0}));
  d = mi_poly_derivative(mi({1, 1}), mi({1, 1}));
  CHECK(d.coefficient == 1.0);
  CHECK(d.residual == mi({0, 0}));
  CHECK_THROWS_AS(mi_poly_derivative(mi({1}), mi({1, 1})), Error);
}

TEST_CASE("derivative coefficients compose: D^a D^b z^g = D^{a+b} z^g") {
  auto rng = rng_for(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t d = static_cast<std::size_t>(testsupport::uniform_int(rng, 1, 4));
    const MultiIndex a = testsupport::random_index(rng, d, 2);
    const MultiIndex b = testsupport::random_index(rng, d, 2);
    const MultiIndex g = testsupport::random_index(rng, d, 4);
    const auto inner = mi_poly_derivative(b, g);
    const auto outer = mi_poly_derivative(a, inner.residual);
    const auto joint = mi_poly_derivative(a + b, g);
    CHECK(inner.coefficient * outer.coefficient == doctest::Approx(joint.coefficient));
    if (joint.coefficient != 0.0) CHECK(outer.residual == joint.residual);
  }
}

TEST_CASE("polynomial derivative agrees with repeated power rule") {
  // Independent oracle: differentiate one unit at a time.
  auto rng = rng_for(12);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 3;
    const MultiIndex a = testsupport::random_index(rng, d, 3);
    const MultiIndex b = testsupport::random_index(rng, d, 3);
    std::vector<int> cur(b.entries().begin(), b.entries().end());
    double coef = 1.0;
    for (std::size_t i = 0; i < d; ++i)
      for (int c = 0; c < a[i]; ++c) {
        coef *= cur[i];
        cur[i] = std::max(cur[i] - 1, 0);
      }
    CHECK(mi_poly_derivative(a, b).coefficient == doctest::Approx(coef));
  }
}

TEST_CASE("interaction_indices examples") {
  CHECK(as_set(interaction_indices(parts(2, {{0}, {1}}), 2, false)) == std::set{mi({1, 1})});
  CHECK(interaction_indices(parts(2, {{0, 1}}), 2, false).empty());
  CHECK(as_set(interaction_indices(parts(3, {{0, 1}, {2}}), 2, false)) ==
        std::set{mi({1, 0, 1}), mi({0, 1, 1})});
  try {
    (void)interaction_indices(parts(2, {{0}, {1}}), 1, false);
    FAIL("expected n < 2 to be rejected");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("interaction_indices matches brute-force enumeration") {
  auto rng = rng_for(13);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = static_cast<std::size_t>(testsupport::uniform_int(rng, 1, 5));
    const auto p = testsupport::random_partition(rng, d, 3);
    for (int n = 2; n <= 3; ++n) {
      CHECK(as_set(interaction_indices(p, n, false)) ==
            as_set(testsupport::brute_force_interactions(p, n)));
      std::set<MultiIndex> upto;
      for (int m = 2; m <= n; ++m)
        for (const auto& a : testsupport::brute_force_interactions(p, m)) upto.insert(a);
      CHECK(as_set(interaction_indices(p, n, true)) == upto);
    }
  }
}

TEST_CASE("I_n is closed under adding any index") {
  auto rng = rng_for(14);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = testsupport::random_partition(rng, 4, 2);
    for (int n = 2; n <= 3; ++n)
      for (const auto& a : interaction_indices(p, n, false))
        for (int k = 0; k <= 2; ++k)
          for (const auto& b : multi_indices_of_order(4, k)) {
            const auto next = interaction_indices(p, n + k, false);
            CHECK(std::find(next.begin(), next.end(), a + b) != next.end());
          }
  }
}

TEST_CASE("|I_n| for singleton slots is monomial count minus pure powers") {
  for (std::size_t d = 1; d <= 6; ++d)
    for (int n = 2; n <= 4; ++n) {
      const auto p = SlotPartition::singletons(d);
      const double monomials = binomial(static_cast<int>(d) + n - 1, n);
      CHECK(static_cast<double>(interaction_indices(p, n, false).size()) ==
            monomials - static_cast<double>(d));
    }
}

TEST_CASE("multi_indices_of_order enumerates without duplicates") {
  const auto all = multi_indices_of_order(4, 3);
  CHECK(all.size() == 20);
  CHECK(as_set(all).size() == all.size());
  CHECK(std::is_sorted(all.rbegin(), all.rend()));
  for (const auto& a : all) CHECK(a.norm() == 3);
}

TEST_CASE("SlotPartition validation") {
  CHECK_THROWS_AS(parts(3, {{0, 1}, {1, 2}}), Error);
  CHECK_THROWS_AS(parts(3, {{0, 1}}), Error);
  CHECK_THROWS_AS(parts(2, {{0, 1}, {}}), Error);
  CHECK_THROWS_AS(parts(2, {{0, 5}}), Error);
  const SlotPartition p = parts(3, {{2}, {0, 1}});
  CHECK(p.block_of(2) == 0);
  CHECK(p.block_of(1) == 1);
  CHECK(p.blocks_touched(mi({1, 1, 0})) == 1);
  CHECK(p.is_cross(mi({1, 0, 1})));
}

TEST_CASE("SlotPartition JSON round trip uses 1-based indices") {
  const SlotPartition p = parts(3, {{0, 1}, {2}});
  const nlohmann::json j = p;
  CHECK(j.at("blocks") == nlohmann::json::parse("[[1,2],[3]]"));
  CHECK(j.get<SlotPartition>() == p);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"latent_dim":1,"blocks":[[0]]})").get<SlotPartition>(),
                  Error);
}

TEST_CASE("to_string and expand") {
  CHECK(mi({1, 0, 2}).to_string() == "(1,0,2)");
  CHECK(mi({2, 0, 1}).expand() == std::vector<std::size_t>{0, 0, 2});
}
