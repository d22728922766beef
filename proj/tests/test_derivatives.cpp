#include "asymlab/derivatives.hpp"
#include "asymlab/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace asymlab;
using testsupport::rng_for;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Random polynomial sum_t c_t z^{e_t}, with its derivatives computed term by term.
struct Poly {
  std::vector<std::vector<int>> exps;
  std::vector<double> coefs;

  double eval(const Vec& z) const {
    double s = 0.0;
    for (std::size_t t = 0; t < exps.size(); ++t) {
      double term = coefs[t];
      for (std::size_t i = 0; i < exps[t].size(); ++i)
        term *= std::pow(z(static_cast<Eigen::Index>(i)), exps[t][i]);
      s += term;
    }
    return s;
  }

  double derivative(const Vec& z, const std::vector<int>& alpha) const {
    double s = 0.0;
    for (std::size_t t = 0; t < exps.size(); ++t) {
      double term = coefs[t];
      for (std::size_t i = 0; i < alpha.size(); ++i) {
        int e = exps[t][i];
        for (int c = 0; c < alpha[i]; ++c) term *= e--;
        if (e < 0) term = 0.0;
        else term *= std::pow(z(static_cast<Eigen::Index>(i)), e);
      }
      s += term;
    }
    return s;
  }
};

Poly random_poly(std::mt19937_64& rng, std::size_t d, int max_per_var) {
  Poly p;
  const int terms = testsupport::uniform_int(rng, 2, 6);
  for (int t = 0; t < terms; ++t) {
    std::vector<int> e(d);
    for (auto& x : e) x = testsupport::uniform_int(rng, 0, max_per_var);
    p.exps.push_back(e);
    p.coefs.push_back(testsupport::uniform(rng, -2.0, 2.0));
  }
  return p;
}

VectorFn scalar(std::function<double(const Vec&)> g) {
  return [g](const Vec& z) {
    Vec out(1);
    out(0) = g(z);
    return out;
  };
}

}  // namespace

TEST_CASE("jacobian examples") {
  auto rng = rng_for(1);
  const Mat a = testsupport::random_mat(rng, 3, 2);
  const Mat ja = jacobian_matrix([&](const Vec& z) { return Vec(a * z); }, v2(1, 1));
  CHECK((ja - a).cwiseAbs().maxCoeff() < 1e-10);

  const auto sq = [](const Vec& z) { return Vec(z.array().square().matrix()); };
  Mat expect(2, 2);
  expect << 2, 0, 0, 4;
  CHECK((jacobian_matrix(sq, v2(1, 2)) - expect).cwiseAbs().maxCoeff() < 1e-8);

  const auto sinz = scalar([](const Vec& z) { return std::sin(z(0)) * z(1); });
  const Mat js = jacobian_matrix(sinz, v2(0, 1));
  CHECK(std::abs(js(0, 0) - 1.0) < 1e-8);
  CHECK(std::abs(js(0, 1)) < 1e-12);

  const DerivativeTensor t = jacobian(sq, v2(1, 2));
  CHECK(t.order() == 1);
  CHECK(t.finite());
}

TEST_CASE("cross_partial examples") {
  const auto prod = scalar([](const Vec& z) { return z(0) * z(1); });
  const std::vector<std::size_t> i01{0, 1};
  CHECK(std::abs(cross_partial(prod, v2(-0.3, 2.2), i01)(0) - 1.0) < 1e-8);

  const auto cube = scalar([](const Vec& z) { return z(0) * z(0) * z(0); });
  const std::vector<std::size_t> i000{0, 0, 0};
  CHECK(std::abs(cross_partial(cube, v2(0.7, 0.0), i000)(0) - 6.0) < 1e-6);

  const auto sq2 = scalar([](const Vec& z) { return z(0) * z(0) * z(1); });
  const std::vector<std::size_t> i001{0, 0, 1};
  CHECK(std::abs(cross_partial(sq2, v2(2, 3), i001)(0) - 2.0) < 1e-6);

  const std::vector<std::size_t> bad{0};
  try {
    (void)cross_partial(prod, v2(0, 0), bad);
    FAIL("expected unsupported order");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedOrder);
  }
}

TEST_CASE("derivative_by_multiindex examples") {
  const auto f = [](const Vec& z) {
    Vec out(2);
    out << z(0) * z(1) + z(0), z(0) * z(0) * z(1);
    return out;
  };
  const Vec z = v2(0.4, -1.3);
  CHECK((derivative_by_multiindex(f, z, MultiIndex::zeros(2)) - f(z)).norm() == 0.0);
  CHECK(std::abs(derivative_by_multiindex(f, z, MultiIndex({1, 1}))(0) - 1.0) < 1e-8);
  CHECK(std::abs(derivative_by_multiindex(f, z, MultiIndex({2, 1}))(1) - 2.0) < 1e-6);
  try {
    (void)derivative_by_multiindex(f, z, MultiIndex({2, 2}));
    FAIL("expected unsupported order");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedOrder);
  }
}

TEST_CASE("non-finite stencil values are reported") {
  const auto f = scalar([](const Vec& z) { return 1.0 / z(0); });
  try {
    (void)jacobian_matrix(f, v2(1e-4, 0));
    FAIL("expected non-finite error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
}

TEST_CASE("step configuration is validated") {
  StencilConfig cfg;
  cfg.step[1] = 0.0;
  const auto f = scalar([](const Vec& z) { return z(0); });
  CHECK_THROWS_AS(derivative_by_multiindex(f, v2(0, 0), MultiIndex({1, 1}), cfg), Error);
  CHECK(StencilConfig{}.step_for_order(1) == 1e-4);
  CHECK(StencilConfig{}.step_for_order(2) == 1e-3);
  CHECK(StencilConfig{}.step_for_order(3) == 5e-3);
}

TEST_CASE("stencils are exact on polynomials of degree <= order + 1 per variable") {
  auto rng = rng_for(2);
  int checked = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t d = 3;
    for (int order = 1; order <= 3; ++order) {
      for (const auto& alpha : multi_indices_of_order(d, order)) {
        // Degree per differentiated variable bounded by alpha_i + 1.
        Poly p = random_poly(rng, d, 0);
        for (auto& e : p.exps)
          for (std::size_t i = 0; i < d; ++i)
            e[i] = testsupport::uniform_int(rng, 0, alpha[i] > 0 ? alpha[i] + 1 : 4);
        const Vec z = testsupport::random_vec(rng, 3);
        const double est = derivative_by_multiindex(scalar([&](const Vec& x) { return p.eval(x); }),
                                                    z, alpha)(0);
        std::vector<int> a(alpha.entries().begin(), alpha.entries().end());
        const double truth = p.derivative(z, a);
        double scale = 1.0;
        for (double c : p.coefs) scale += std::abs(c);
        // Truncation error is zero; what remains is rounding of O(eps * |f| / h^order).
        const double h = StencilConfig{}.step_for_order(order);
        const double rounding = 16.0 * 2.2e-16 * scale / std::pow(h, order);
        CHECK(std::abs(est - truth) <= 1e-9 * (1.0 + std::abs(truth)) + rounding);
        ++checked;
      }
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("jacobian relative error <= 1e-6 on degree-4 polynomials") {
  auto rng = rng_for(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Poly p = random_poly(rng, 2, 4);
    const Vec z = testsupport::random_vec(rng, 2);
    const Mat j = jacobian_matrix(scalar([&](const Vec& x) { return p.eval(x); }), z);
    for (int i = 0; i < 2; ++i) {
      std::vector<int> a{i == 0, i == 1};
      const double truth = p.derivative(z, a);
      CHECK(std::abs(j(0, i) - truth) <= 1e-6 * std::max(1.0, std::abs(truth)));
    }
  }
}

TEST_CASE("mixed partials are symmetric under index permutation") {
  auto rng = rng_for(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec w = testsupport::random_vec(rng, 3);
    const Vec z = testsupport::random_vec(rng, 3);
    const auto f = [&](const Vec& x) {
      Vec out(2);
      out << std::sin(w.dot(x)) * x(0), std::exp(0.5 * x(1)) * x(2) * x(2) + x(0) * x(1) * x(2);
      return out;
    };
    for (int order = 2; order <= 3; ++order) {
      const DerivativeTensor t = derivative_tensor(f, z, order);
      CHECK(t.symmetry_defect() <= StencilConfig{}.tol_sym);
      std::vector<std::size_t> idx(static_cast<std::size_t>(order));
      for (auto& i : idx) i = static_cast<std::size_t>(testsupport::uniform_int(rng, 0, 2));
      const Vec base = cross_partial(f, z, idx);
      std::vector<std::size_t> perm = idx;
      std::reverse(perm.begin(), perm.end());
      CHECK((cross_partial(f, z, perm) - base).cwiseAbs().maxCoeff() <= StencilConfig{}.tol_sym);
    }
  }
}

TEST_CASE("derivative tensor layout is row-major in the index tuple") {
  const auto f = scalar([](const Vec& z) { return z(0) * z(1) * z(1) + 3.0 * z(0) * z(0) * z(2); });
  Vec z(3);
  z << 0.2, 0.5, -0.1;
  const DerivativeTensor t = derivative_tensor(f, z, 3);
  const std::vector<std::size_t> i011{0, 1, 1}, i002{0, 0, 2};
  CHECK(t.flat_index(i011) == 0 * 9 + 1 * 3 + 1);
  CHECK(std::abs(t.values()(0, 4) - 2.0) < 1e-6);
  CHECK(std::abs(t.at(i002)(0) - 6.0) < 1e-6);
  const DerivativeTensor h = derivative_tensor(f, z, 2);
  CHECK(h.values().cols() == 9);
}

TEST_CASE("one Richardson level reduces error on smooth test functions") {
  auto rng = rng_for(5);
  StencilConfig plain, rich;
  rich.richardson_levels = 1;
  int improved = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double a = testsupport::uniform(rng, 0.5, 2.0), b = testsupport::uniform(rng, 0.5, 2.0);
    const Vec z = testsupport::random_vec(rng, 2);
    const auto f = scalar([&](const Vec& x) { return std::sin(a * x(0)) * std::exp(b * x(1)); });
    // Analytic D^alpha of sin(a x) exp(b y).
    for (const auto& alpha : {MultiIndex({1, 0}), MultiIndex({1, 1}), MultiIndex({2, 1}),
                              MultiIndex({3, 0}), MultiIndex({0, 2})}) {
      const int p = alpha[0], q = alpha[1];
      const double s = std::pow(a, p) * std::sin(a * z(0) + p * M_PI / 2.0);
      const double truth = s * std::pow(b, q) * std::exp(b * z(1));
      const double e0 = std::abs(derivative_by_multiindex(f, z, alpha, plain)(0) - truth);
      const double e1 = std::abs(derivative_by_multiindex(f, z, alpha, rich)(0) - truth);
      improved += e1 < e0;
      ++total;
    }
  }
  CHECK(improved >= 0.9 * total);
}
