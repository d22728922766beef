#include "asymlab/asymmetry.hpp"
#include "asymlab/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace asymlab;
using testsupport::rng_for;

namespace {

std::vector<Vec> box_probes(std::size_t d, std::size_t count, std::uint64_t seed, double r = 1.0) {
  const auto p = SlotPartition::singletons(d);
  return sample_support(LatentSupport::box(p, Vec::Constant(static_cast<Eigen::Index>(d), -r),
                                           Vec::Constant(static_cast<Eigen::Index>(d), r)),
                        count, seed);
}

VectorFn fn(std::function<Vec(const Vec&)> g) { return g; }

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out(i++) = x;
  return out;
}

const SlotPartition two_singletons = SlotPartition::singletons(2);

}  // namespace

TEST_CASE("check_no_interaction examples") {
  const auto probes = box_probes(2, 16, 1);
  auto squares = fn([](const Vec& z) { return v({z(0) * z(0), z(1) * z(1)}); });
  CHECK(check_no_interaction(squares, two_singletons, probes).pass());

  auto shared = fn([](const Vec& z) { return v({z(0) + z(1), z(1)}); });
  const auto r = check_no_interaction(shared, two_singletons, probes);
  CHECK(!r.pass());
  REQUIRE(!r.witnesses.empty());
  CHECK(r.witnesses.front().indices == "i=1,j=2,output=1");
  CHECK(r.margin < 0.0);

  auto coupled = fn([](const Vec& z) { return v({z(0), z(0) * z(1)}); });
  CHECK(!check_no_interaction(coupled, two_singletons, probes).pass());
  CHECK_THROWS_AS(check_no_interaction(squares, two_singletons, {}), Error);
}

TEST_CASE("check_order_at_most_n examples") {
  const auto probes = box_probes(2, 16, 2);
  auto additive = fn([](const Vec& z) {
    return v({std::sin(z(0)) + z(1) * z(1) * z(1), std::exp(z(0)) - z(1)});
  });
  CHECK(check_order_at_most_n(additive, two_singletons, 1, probes).pass());

  auto bilinear = fn([](const Vec& z) { return v({z(0) * z(0) + 0.7 * z(0) * z(1), z(1)}); });
  const auto r = check_order_at_most_n(bilinear, two_singletons, 1, probes);
  CHECK(!r.pass());
  CHECK(r.witnesses.front().indices == "alpha=(1,1)");
  CHECK(r.witnesses.front().value == doctest::Approx(0.7).epsilon(1e-6));

  auto degree2 = fn([](const Vec& z) {
    return v({std::sin(z(0)) + 0.5 * z(0) * z(1) + z(0), std::cos(z(1)) - 2 * z(0) * z(1) + z(1)});
  });
  CHECK(check_order_at_most_n(degree2, two_singletons, 2, probes).pass());
  CHECK(!check_order_at_most_n(degree2, two_singletons, 1, probes).pass());

  CHECK_THROWS_AS(check_order_at_most_n(additive, two_singletons, 3, probes), Error);
  CHECK(check_order_at_most_n(additive, two_singletons, 0, probes).condition == "order_at_most_0");
}

TEST_CASE("check_within_slot_order examples") {
  const auto probes = box_probes(2, 16, 3);
  // One-dimensional slots with z_i^{n+1} terms: self interaction.
  for (int n = 0; n <= 2; ++n) {
    auto powers = fn([n](const Vec& z) {
      return v({std::pow(z(0), n + 1) + z(0), std::pow(z(1), n + 1) + z(1)});
    });
    CHECK(check_within_slot_order(powers, two_singletons, n, probes).pass());
  }
  const SlotPartition one_slot(2, {{0, 1}});
  auto split_additive = fn([](const Vec& z) { return v({z(0) * z(0) + z(1) * z(1), z(0) - z(1)}); });
  const auto r = check_within_slot_order(split_additive, one_slot, 1, probes);
  CHECK(!r.pass());
  CHECK(r.witnesses.front().indices == "slot=1,A=(1),B=(2)");

  PresetOptions o;
  o.block_sizes = {2, 1};
  o.seed = 5;
  const auto spec = make_preset(o);
  const auto p3 = box_probes(3, 32, 4);
  CHECK(check_within_slot_order(spec.as_function(), spec.partition(), 2, p3).pass());
  CheckConfig tight;
  tight.stencil.richardson_levels = 1;
  CHECK(check_within_slot_order(spec.as_function(), spec.partition(), 2, p3, tight).pass());

  const SlotPartition big(7, {{0, 1, 2, 3, 4, 5, 6}});
  auto lin = fn([](const Vec& z) { return z; });
  try {
    (void)check_within_slot_order(lin, big, 1, box_probes(7, 1, 1));
    FAIL("expected enumeration overflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EnumerationOverflow);
  }
}

TEST_CASE("check_interaction_asymmetry examples") {
  PresetOptions o;
  o.block_sizes = {2, 1, 2};
  o.seed = 7;
  const auto spec = make_preset(o);
  const auto probes = box_probes(5, 24, 5);
  const auto r = check_interaction_asymmetry(spec.as_function(), spec.partition(), 2, probes, 4);
  CHECK(r.pass());
  CHECK(r.parts.size() == 6);

  // Slot 2 = {z2, z3} enters only through g(z2) + h(z3).
  const SlotPartition p(3, {{0}, {1, 2}});
  auto hidden = fn([](const Vec& z) {
    return v({z(0) * z(0) * z(0) + z(1) * z(1) * z(1), z(2) * z(2) * z(2) + z(0), z(1) - z(2)});
  });
  const auto bad = check_interaction_asymmetry(hidden, p, 2, box_probes(3, 16, 6), 2);
  CHECK(!bad.pass());

  PresetOptions z0;
  z0.order_bound = 0;
  z0.block_sizes = {2, 2};
  z0.seed = 1;
  const auto s0 = make_preset(z0);
  CHECK(check_interaction_asymmetry(s0.as_function(), s0.partition(), 0, box_probes(4, 24, 7), 4)
            .pass());
}

TEST_CASE("sufficient independence examples") {
  // n = 0: disjoint-output diffeomorphism.
  PresetOptions z0;
  z0.order_bound = 0;
  z0.block_sizes = {2, 1};
  const auto s0 = make_preset(z0);
  CHECK(sufficient_independence_check(s0.as_function(), s0.partition(), 0, box_probes(3, 32, 8))
            .pass());

  // Two slots sharing a squared output row: D2 columns of both slots coincide.
  auto dup = fn([](const Vec& z) { return v({z(0), z(0) * z(0) + z(1) * z(1), z(1)}); });
  const auto r = sufficient_independence_check(dup, two_singletons, 1, box_probes(2, 16, 9));
  CHECK(!r.pass());
  CHECK(r.probes_passed == 0);
  CHECK(!r.witnesses.empty());

  // n = 2 presets.
  CheckConfig cfg;
  cfg.min_pass_fraction = 0.95;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PresetOptions o;
    o.block_sizes = {1, 2, 1};
    o.seed = seed;
    const auto spec = make_preset(o);
    const auto rep =
        sufficient_independence_check(spec.as_function(), spec.partition(), 2, box_probes(4, 64, seed), cfg);
    CHECK(rep.pass());
    CHECK(rep.pass_fraction() >= 0.95);
  }

  auto dead = fn([](const Vec& z) { return v({z(0), z(0) * z(0)}); });
  try {
    (void)sufficient_independence_check(dead, two_singletons, 0, box_probes(2, 2, 1));
    FAIL("expected degenerate derivatives");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateDerivatives);
  }
}

TEST_CASE("sufficient independence matrix column counts") {
  PresetOptions o;
  o.block_sizes = {2, 1};
  const auto spec = make_preset(o);
  const Vec z = Vec::Constant(3, 0.3);
  const auto& p = spec.partition();
  auto count = [&](int n) {
    return build_sufficient_independence_matrix(spec.as_function(), p, n, z).columns.cols();
  };
  CHECK(count(0) == 3);
  CHECK(count(1) == 3 + 3 + 1);
  // d_z + d_z(d_z+1)/2 + sum m(m+1)(m+2)/6
  CHECK(count(2) == 3 + 6 + 4 + 1);
  const auto m = build_sufficient_independence_matrix(spec.as_function(), p, 2, z);
  CHECK(m.groups.size() == 4);
  CHECK(m.groups[0].count == 2 + 5);  // D1 of {1,2}; pairs 11,12,22,13,23
  CHECK(m.groups[2].count == 1 + 1);  // D1 of {3}; pair 33
}

TEST_CASE("rank_factorization_property examples") {
  auto rng = rng_for(30);
  Mat bd = Mat::Zero(6, 5);
  bd.block(0, 0, 3, 2) = testsupport::random_mat(rng, 3, 1) * testsupport::random_mat(rng, 1, 2);
  bd.block(3, 2, 3, 3) = testsupport::random_mat(rng, 3, 2) * testsupport::random_mat(rng, 2, 3);
  const std::vector<std::vector<std::size_t>> blocks{{0, 1}, {2, 3, 4}};
  const auto r = rank_factorization_property(bd, blocks, 100, 1);
  CHECK(r.pass());
  CHECK(r.probes_used == 100);

  Mat overlap(3, 2);
  overlap << 1, 1, 2, 2, 0, 0;
  const auto na = rank_factorization_property(overlap, {{0}, {1}}, 10, 1);
  CHECK(na.verdict == Verdict::NotApplicable);

  // Orthogonal column spaces per block, plus in-block rank deficiency.
  for (int t = 0; t < 20; ++t) {
    const Mat q = Eigen::HouseholderQR<Mat>(testsupport::random_mat(rng, 8, 8)).householderQ();
    Mat a(8, 6);
    a.leftCols(3) = q.leftCols(2) * testsupport::random_mat(rng, 2, 3);
    a.rightCols(3) = q.middleCols(2, 2) * testsupport::random_mat(rng, 2, 3);
    CHECK(rank_factorization_property(a, {{0, 1, 2}, {3, 4, 5}}, 100, static_cast<std::uint64_t>(t))
              .pass());
  }
}

TEST_CASE("compositionality examples and agreement with the no-interaction check") {
  const auto probes = box_probes(2, 16, 10);
  auto disjoint = fn([](const Vec& z) { return v({std::sin(z(0)), z(1) * z(1) * z(1) + z(1)}); });
  CHECK(compositionality_check(disjoint, two_singletons, probes).pass());
  auto shared = fn([](const Vec& z) { return v({z(0) + z(1), z(1)}); });
  const auto r = compositionality_check(shared, two_singletons, probes);
  CHECK(!r.pass());
  CHECK(r.witnesses.front().indices.rfind("output=1", 0) == 0);

  int agree = 0;
  for (int g = 0; g < 50; ++g) {
    PresetOptions o;
    o.order_bound = g % 3;
    o.block_sizes = {static_cast<std::size_t>(1 + g % 2), 1, 2};
    o.seed = static_cast<std::uint64_t>(g);
    const auto spec = make_preset(o);
    const auto ps = box_probes(spec.latent_dim(), 8, static_cast<std::uint64_t>(g));
    agree += compositionality_check(spec.as_function(), spec.partition(), ps).pass() ==
             check_no_interaction(spec.as_function(), spec.partition(), ps).pass();
  }
  CHECK(agree == 50);
}

TEST_CASE("irreducibility examples") {
  const SlotPartition one(2, {{0, 1}});
  const auto probes = box_probes(2, 16, 11);
  auto reducible = fn([](const Vec& z) { return z; });
  CHECK(!irreducibility_check(reducible, one, probes).pass());
  auto coupled = fn([](const Vec& z) { return v({z(0), z(1), z(0) * z(1)}); });
  CHECK(irreducibility_check(coupled, one, probes).pass());

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PresetOptions o;
    o.order_bound = 0;
    o.block_sizes = {2, 2, 1};
    o.seed = seed;
    const auto spec = make_preset(o);
    const auto ps = box_probes(5, 16, seed);
    REQUIRE(check_interaction_asymmetry(spec.as_function(), spec.partition(), 0, ps, 3).pass());
    CHECK(irreducibility_check(spec.as_function(), spec.partition(), ps).pass());
  }
}

TEST_CASE("irreducibility samples splits beyond the enumeration cap") {
  const SlotPartition one(2, {{0, 1}});
  auto many = fn([](const Vec& z) {
    Vec out(14);
    for (int l = 0; l < 14; ++l) out(l) = std::sin((l + 1) * 0.3 * z(0) + z(1) * (l % 3));
    return out;
  });
  CheckConfig cfg;
  cfg.sampled_splits = 256;
  CHECK(irreducibility_check(many, one, box_probes(2, 4, 12), cfg).pass());
  auto split_rows = fn([](const Vec& z) {
    Vec out(14);
    for (int l = 0; l < 14; ++l) out(l) = l < 7 ? std::sin((l + 1) * 0.3 * z(0)) : std::cos((l + 1) * 0.2 * z(1));
    return out;
  });
  // Random splits rarely hit the exact reducing split; enumeration finds it.
  CheckConfig enumerate;
  enumerate.split_enumeration_cap = 14;
  CHECK(!irreducibility_check(split_rows, one, box_probes(2, 2, 12), enumerate).pass());
}

TEST_CASE("additivity examples and the four-point oracle") {
  const auto probes = box_probes(2, 16, 13);
  auto additive = fn([](const Vec& z) { return v({std::exp(z(0)) + std::sin(z(1)), z(1) * z(1)}); });
  CHECK(additivity_check(additive, two_singletons, probes).pass());
  auto bil = fn([](const Vec& z) { return v({z(0) + 1e-2 * z(0) * z(1), z(1)}); });
  CHECK(!additivity_check(bil, two_singletons, probes).pass());

  // f(a,c) - f(b,c) - f(a,d) + f(b,d) vanishes on axis-aligned rectangles iff additive.
  auto rng = rng_for(14);
  for (int g = 0; g < 30; ++g) {
    PresetOptions o;
    o.order_bound = 1 + g % 2;
    o.block_sizes = {1, 1};
    o.seed = static_cast<std::uint64_t>(100 + g);
    const auto spec = make_preset(o);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const Vec a = testsupport::random_vec(rng, 2), b = testsupport::random_vec(rng, 2);
      const Vec four = spec.eval(v({a(0), a(1)})) - spec.eval(v({b(0), a(1)})) -
                       spec.eval(v({a(0), b(1)})) + spec.eval(v({b(0), b(1)}));
      worst = std::max(worst, four.cwiseAbs().maxCoeff());
    }
    const bool oracle = worst < 1e-9;
    CHECK(additivity_check(spec.as_function(), spec.partition(), box_probes(2, 8, 15)).pass() ==
          oracle);
  }
}

TEST_CASE("sufficient nonlinearity examples and implication") {
  const auto probes = box_probes(3, 16, 16);
  const SlotPartition p = SlotPartition::contiguous(std::vector<std::size_t>{2, 1});
  auto linear = fn([](const Vec& z) {
    Mat a(8, 3);
    a.setIdentity();
    a(4, 1) = 2.0;
    return Vec(a * z);
  });
  CHECK(!sufficient_nonlinearity_check(linear, p, probes).pass());

  int implications = 0, premises = 0;
  for (int g = 0; g < 50; ++g) {
    PresetOptions o;
    o.order_bound = 1;
    o.block_sizes = {static_cast<std::size_t>(1 + g % 2), 1};
    o.out_dim = g % 5 == 0 ? 3 : 12;  // some too narrow to pass
    o.seed = static_cast<std::uint64_t>(g);
    const auto spec = make_preset(o);
    const auto ps = box_probes(spec.latent_dim(), 8, static_cast<std::uint64_t>(g));
    const bool sn = sufficient_nonlinearity_check(spec.as_function(), spec.partition(), ps).pass();
    if (sn) {
      ++premises;
      implications +=
          sufficient_independence_check(spec.as_function(), spec.partition(), 1, ps).pass();
    }
  }
  CHECK(premises >= 30);
  CHECK(implications == premises);
}

TEST_CASE("generator presets meet their declared order bound") {
  for (int n = 1; n <= 2; ++n)
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      PresetOptions o;
      o.order_bound = n;
      o.block_sizes = {1, 2};
      o.seed = seed;
      const auto spec = make_preset(o);
      const auto ps = box_probes(3, 12, seed);
      CHECK(check_order_at_most_n(spec.as_function(), spec.partition(), n, ps).pass());
      if (spec.has_top_order_terms())
        CHECK(!check_order_at_most_n(spec.as_function(), spec.partition(), n - 1, ps).pass());
    }
}

TEST_CASE("order bounds are monotone in n") {
  for (int g = 0; g < 30; ++g) {
    PresetOptions o;
    o.order_bound = g % 3;
    o.block_sizes = {static_cast<std::size_t>(1 + g % 2), 1};
    o.seed = static_cast<std::uint64_t>(g);
    const auto spec = make_preset(o);
    const auto ps = box_probes(spec.latent_dim(), 8, static_cast<std::uint64_t>(g));
    for (int n = 0; n < 2; ++n)
      if (check_order_at_most_n(spec.as_function(), spec.partition(), n, ps).pass())
        CHECK(check_order_at_most_n(spec.as_function(), spec.partition(), n + 1, ps).pass());
  }
}

TEST_CASE("reports serialize with 1-based witnesses") {
  auto shared = fn([](const Vec& z) { return v({z(0) + z(1), z(1)}); });
  const auto r = check_no_interaction(shared, two_singletons, box_probes(2, 4, 17));
  const auto j = to_json(r);
  CHECK(j.at("verdict") == "fail");
  CHECK(j.at("probes_used") == 4);
  CHECK(j.at("witnesses")[0].at("indices") == "i=1,j=2,output=1");
  CHECK(j.contains("probed_region"));
}
