#include "asymlab/attention.hpp"
#include "asymlab/derivatives.hpp"
#include "asymlab/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace asymlab;
using testsupport::random_mat;
using testsupport::random_vec;
using testsupport::rng_for;
using testsupport::uniform_int;

namespace {

struct Instance {
  std::vector<CrossAttentionLayer> layers;
  PixelHead head;
  Mat slots;
};

PixelHead random_head(std::mt19937_64& rng, Eigen::Index dq, Eigen::Index hidden,
                      Eigen::Index channels) {
  PixelHead h;
  h.w1 = random_mat(rng, hidden, dq);
  h.b1 = random_vec(rng, hidden);
  h.w2 = random_mat(rng, channels, hidden);
  h.b2 = random_vec(rng, channels);
  return h;
}

Instance random_instance(std::mt19937_64& rng, int layers, int heads) {
  const Eigen::Index pixels = uniform_int(rng, 1, 5), k = uniform_int(rng, 1, 4);
  const Eigen::Index s = uniform_int(rng, 1, 3), d_o = uniform_int(rng, 1, 4);
  const Eigen::Index dq = heads * uniform_int(rng, 1, 3);
  Instance in;
  Eigen::Index input = d_o;
  for (int l = 0; l < layers; ++l) {
    CrossAttentionLayer layer;
    layer.w_q = random_mat(rng, dq, input);
    layer.w_k = random_mat(rng, dq, s);
    layer.w_v = random_mat(rng, dq, s);
    layer.heads = heads;
    if (l == 0) layer.query_inputs = random_mat(rng, pixels, d_o);
    in.layers.push_back(layer);
    input = dq;
  }
  in.head = random_head(rng, dq, uniform_int(rng, 1, 4), 3);
  in.slots = random_mat(rng, k, s, -1.5, 1.5);
  return in;
}

// Loop-level reference forward pass.
Mat naive_forward(const Instance& in) {
  Mat queries = in.layers.front().query_inputs;
  const Eigen::Index kslots = in.slots.rows();
  for (const auto& layer : in.layers) {
    const Eigen::Index dq = layer.w_q.rows(), dh = dq / layer.heads;
    Mat tokens = Mat::Zero(queries.rows(), dq);
    for (Eigen::Index p = 0; p < queries.rows(); ++p) {
      const Vec q = layer.w_q * queries.row(p).transpose();
      for (int h = 0; h < layer.heads; ++h) {
        std::vector<double> logit(static_cast<std::size_t>(kslots));
        for (Eigen::Index m = 0; m < kslots; ++m) {
          const Vec key = layer.w_k * in.slots.row(m).transpose();
          double dot = 0.0;
          for (Eigen::Index r = h * dh; r < (h + 1) * dh; ++r) dot += q(r) * key(r);
          logit[static_cast<std::size_t>(m)] = dot / (layer.scale ? std::sqrt(double(dh)) : 1.0);
        }
        double norm = 0.0;
        for (double x : logit) norm += std::exp(x);
        for (Eigen::Index m = 0; m < kslots; ++m) {
          const double w = std::exp(logit[static_cast<std::size_t>(m)]) / norm;
          const Vec val = layer.w_v * in.slots.row(m).transpose();
          for (Eigen::Index r = h * dh; r < (h + 1) * dh; ++r) tokens(p, r) += w * val(r);
        }
      }
    }
    queries = tokens;
  }
  Mat out(queries.rows(), in.head.channels());
  for (Eigen::Index p = 0; p < queries.rows(); ++p) {
    const Vec t = (in.head.w1 * queries.row(p).transpose() + in.head.b1).array().tanh().matrix();
    out.row(p) = (in.head.w2 * t + in.head.b2).transpose();
  }
  return out;
}

double max_rel(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-12);
}

bool rows_one_hot(const Mat& a) {
  for (Eigen::Index l = 0; l < a.rows(); ++l) {
    int nz = 0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) nz += a(l, k) != 0.0;
    if (nz > 1) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("single slot gives an all-ones attention column") {
  auto rng = rng_for(1);
  for (int t = 0; t < 20; ++t) {
    Instance in = random_instance(rng, 1, 1);
    in.slots = random_mat(rng, 1, in.layers[0].slot_dim());
    const auto fw = cross_attention_forward(in.layers, in.head, in.slots);
    CHECK((fw.attention[0][0].array() == 1.0).all());
    const Vec v = in.layers[0].w_v * in.slots.row(0).transpose();
    const Mat broadcast = v.transpose().replicate(fw.pixels.rows(), 1);
    CHECK(max_rel(fw.pixels, in.head.eval(broadcast)) < 1e-14);
    const Mat jac = analytic_slot_jacobian(in.layers[0], in.head, in.slots);
    const Eigen::Index c = in.head.channels();
    for (Eigen::Index d = 0; d < fw.pixels.rows(); ++d)
      CHECK(max_rel(jac.block(d * c, 0, c, jac.cols()), in.head.jacobian(v) * in.layers[0].w_v) <
            1e-12);
  }
}

TEST_CASE("equal logits give uniform rows") {
  auto rng = rng_for(2);
  Instance in = random_instance(rng, 1, 1);
  in.slots = random_mat(rng, 4, in.layers[0].slot_dim());
  in.layers[0].w_k.setZero();
  const auto fw = cross_attention_forward(in.layers, in.head, in.slots);
  CHECK((fw.attention[0][0].array() - 0.25).abs().maxCoeff() < 1e-15);
}

TEST_CASE("hand-computed single pixel instance") {
  CrossAttentionLayer layer;
  layer.w_q = Mat::Identity(2, 2);
  layer.w_k = Mat::Identity(2, 2);
  layer.w_v = Mat::Identity(2, 2);
  layer.query_inputs = Mat(1, 2);
  layer.query_inputs << 1.0, 0.0;
  layer.scale = false;
  PixelHead head;
  head.w1 = Mat::Identity(2, 2);
  head.b1 = Vec::Zero(2);
  head.w2 = Mat(1, 2);
  head.w2 << 1.0, 1.0;
  head.b2 = Vec::Constant(1, 0.5);
  Mat slots(2, 2);
  slots << 1.0, 0.0, 0.0, 0.0;
  // logits (1, 0): a = e / (1 + e); token = (a, 0); pixel = tanh(a) + 0.5.
  const double a = std::exp(1.0) / (1.0 + std::exp(1.0));
  const auto fw = cross_attention_forward({layer}, head, slots);
  CHECK(fw.attention[0][0](0, 0) == doctest::Approx(a).epsilon(1e-15));
  CHECK(fw.pixels(0, 0) == doctest::Approx(std::tanh(a) + 0.5).epsilon(1e-15));
  layer.scale = true;  // sqrt(2) divisor
  const double b = 1.0 / (1.0 + std::exp(-1.0 / std::sqrt(2.0)));
  CHECK(cross_attention_forward({layer}, head, slots).attention[0][0](0, 0) ==
        doctest::Approx(b).epsilon(1e-15));
}

TEST_CASE("forward matches a loop-level reference, multi-head and multi-layer") {
  auto rng = rng_for(3);
  for (int t = 0; t < 200; ++t) {
    const int layers = uniform_int(rng, 1, 3), heads = uniform_int(rng, 1, 3);
    const Instance in = random_instance(rng, layers, heads);
    const auto fw = cross_attention_forward(in.layers, in.head, in.slots);
    CHECK(max_rel(fw.pixels, naive_forward(in)) < 1e-12);
    REQUIRE(fw.attention.size() == static_cast<std::size_t>(layers));
    CHECK(fw.attention[0].size() == static_cast<std::size_t>(heads));
  }
}

TEST_CASE("analytic Jacobian agrees with finite differences") {
  auto rng = rng_for(4);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Instance in = random_instance(rng, 1, 1);
    const Mat analytic = analytic_slot_jacobian(in.layers[0], in.head, in.slots);
    const Mat fd = jacobian_matrix(decoder_function(in.layers, in.head, in.slots.rows()),
                                   flatten_rows(in.slots));
    worst = std::max(worst, max_rel(analytic, fd));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("zero attention gives a zero Jacobian block") {
  auto rng = rng_for(5);
  for (int t = 0; t < 30; ++t) {
    Instance in = random_instance(rng, 1, 1);
    auto& layer = in.layers[0];
    // All queries share a positive first coordinate; slot 0's key is pushed far
    // negative along it, so its logit is about -60 below the others.
    layer.query_inputs = random_mat(rng, layer.query_inputs.rows(), layer.query_inputs.cols(),
                                    0.5, 1.0);
    layer.w_q = Mat::Zero(layer.w_q.rows(), layer.w_q.cols());
    layer.w_q.col(0).setConstant(1.0);
    layer.w_k.setZero();
    layer.w_k.col(0).setOnes();
    layer.scale = false;
    in.slots = random_mat(rng, 3, layer.slot_dim());
    in.slots(0, 0) = -200.0;
    const auto fw = cross_attention_forward(in.layers, in.head, in.slots);
    REQUIRE(fw.attention[0][0].col(0).maxCoeff() <= 1e-12);
    const Eigen::Index s = layer.slot_dim();
    const Mat fd = jacobian_matrix(decoder_function(in.layers, in.head, 3), flatten_rows(in.slots));
    CHECK(fd.leftCols(s).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(analytic_slot_jacobian(layer, in.head, in.slots).leftCols(s).cwiseAbs().maxCoeff() <=
          1e-12);
  }
}

TEST_CASE("softmax rows are stochastic for extreme finite logits") {
  auto rng = rng_for(6);
  for (int t = 0; t < 2000; ++t) {
    const double span = std::pow(10.0, uniform_int(rng, -3, 300));
    const Mat logits = random_mat(rng, 3, uniform_int(rng, 1, 6), -1.0, 1.0) * (span / 2.0);
    const Mat a = softmax_rows(logits);
    CHECK(a.allFinite());
    CHECK(a.minCoeff() >= 0.0);
    CHECK((a.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
  }
  Mat bad(1, 2);
  bad << 0.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(softmax_rows(bad), Error);
}

TEST_CASE("analytic Jacobian rejects multi-head layers") {
  auto rng = rng_for(7);
  const Instance in = random_instance(rng, 1, 2);
  CHECK_THROWS_AS(analytic_slot_jacobian(in.layers[0], in.head, in.slots), Error);
}

TEST_CASE("l_interact hand values") {
  Mat a(1, 2);
  a << 1.0, 0.0;
  CHECK(l_interact(a) == 0.0);
  a << 0.5, 0.5;
  CHECK(l_interact(a) == doctest::Approx(0.25).epsilon(1e-15));
  Mat third = Mat::Constant(1, 3, 1.0 / 3.0);
  CHECK(l_interact(third) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // Uniform K = 2 over P pixels: P / 4 per image; batch averaging divides by N.
  const Mat uniform = Mat::Constant(10, 2, 0.5);
  CHECK(l_interact(uniform) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(l_interact(std::vector<Mat>{uniform, Mat::Zero(10, 2)}) == doctest::Approx(1.25));
  a << -0.1, 1.1;
  CHECK_THROWS_AS(l_interact(a), Error);
}

TEST_CASE("aggregate_attention sums without renormalizing") {
  Mat one_hot(2, 2);
  one_hot << 1.0, 0.0, 0.0, 1.0;
  CHECK(aggregate_attention(std::vector<Mat>{one_hot}) == one_hot);
  const Mat twice = aggregate_attention(std::vector<Mat>{one_hot, one_hot});
  CHECK(twice == 2.0 * one_hot);
  CHECK(l_interact(twice) == 0.0);
  Mat other(2, 2);
  other << 0.0, 1.0, 1.0, 0.0;
  // Each row becomes (1, 1): one product per pixel.
  CHECK(l_interact(aggregate_attention(std::vector<Mat>{one_hot, other})) == 2.0);
  CHECK_THROWS_AS(aggregate_attention(std::vector<Mat>{one_hot, Mat::Zero(3, 2)}), Error);
}

TEST_CASE("l_interact is zero exactly on rows with at most one nonzero") {
  auto rng = rng_for(8);
  const double tiny = std::numeric_limits<double>::denorm_min();
  int false_verdicts = 0;
  for (int t = 0; t < 10000; ++t) {
    const Eigen::Index rows = uniform_int(rng, 1, 6), cols = uniform_int(rng, 1, 5);
    Mat a = random_mat(rng, rows, cols, 0.0, 1.0);
    switch (t % 5) {
      case 0: break;  // dense
      case 1:         // one-hot with random magnitudes
        a.setZero();
        for (Eigen::Index r = 0; r < rows; ++r)
          a(r, uniform_int(rng, 0, int(cols) - 1)) = testsupport::uniform(rng, 0.0, 3.0);
        break;
      case 2:  // near one-hot: one entry perturbed off zero by a denormal or tiny value
        a.setZero();
        for (Eigen::Index r = 0; r < rows; ++r) a(r, 0) = 1.0;
        if (cols > 1) a(uniform_int(rng, 0, int(rows) - 1), cols - 1) = (t % 2) ? tiny : 1e-300;
        break;
      case 3:  // sparse random zero pattern
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c)
            if (uniform_int(rng, 0, 2) != 0) a(r, c) = 0.0;
        break;
      case 4:  // softmax rows with saturated logits
        a = softmax_rows(random_mat(rng, rows, cols, -800.0, 800.0));
        break;
    }
    const bool zero = l_interact(a) == 0.0;
    false_verdicts += zero != rows_one_hot(a);
  }
  CHECK(false_verdicts == 0);
}

TEST_CASE("l_interact stays positive when the product underflows double") {
  const double tiny = std::numeric_limits<double>::denorm_min();
  Mat a(1, 2);
  a << 0.25, tiny;
  CHECK(l_interact(a) > 0.0);
  a << 1e-200, 1e-200;
  CHECK(l_interact(a) == tiny);
}
