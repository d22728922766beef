#include "asymlab/autoencoder.hpp"
#include "asymlab/error.hpp"
#include "asymlab/harness/scene.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace asymlab;
using testsupport::random_mat;
using testsupport::rng_for;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.image_size = 4;
  c.patch = 2;
  c.embed_dim = 5;
  c.encoder_layers = 1;
  c.slots = 2;
  c.slot_dim = 3;
  c.token_dim = 4;
  c.query_hidden = 4;
  c.head_hidden = 3;
  c.pe_frequencies = 2;
  return c;
}

std::vector<Image> random_images(std::mt19937_64& rng, const ModelConfig& c, int n) {
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) out.push_back(random_mat(rng, c.pixels(), c.channels, 0.0, 1.0));
  return out;
}

Mat& param(SlotAutoencoder& m, const char* name) {
  return m.parameters()[m.parameters().index_of(name)];
}

}  // namespace

TEST_CASE("gaussian KL closed form") {
  CHECK(gaussian_kl(Mat::Zero(2, 3), Mat::Zero(2, 3)) == 0.0);
  CHECK(gaussian_kl(Mat::Ones(1, 1), Mat::Zero(1, 1)) == doctest::Approx(0.5));
  auto rng = rng_for(31);
  for (int t = 0; t < 500; ++t) {
    const Mat mu = random_mat(rng, 2, 3, -3, 3), lv = random_mat(rng, 2, 3, -10, 10);
    CHECK(gaussian_kl(mu, lv) >= 0.0);
  }
}

TEST_CASE("patch extraction is a raster-order rearrangement") {
  const ModelConfig c = tiny_config();
  Image img(16, 3);
  for (int l = 0; l < 16; ++l)
    for (int ch = 0; ch < 3; ++ch) img(l, ch) = 10 * l + ch;
  const Mat p = extract_patches(img, 4, 2, 3);
  REQUIRE(p.rows() == 4);
  REQUIRE(p.cols() == 12);
  // Patch 1 (top right) starts at pixel (x=2, y=0) = 2, then 3, then row 1: 6, 7.
  CHECK(p(1, 0) == 20);
  CHECK(p(1, 3) == 30);
  CHECK(p(1, 6) == 60);
  CHECK(p(1, 11) == 72);
  CHECK(p.sum() == doctest::Approx(img.sum()));
  (void)c;
}

TEST_CASE("tape loss agrees with the attention-module decoder") {
  auto rng = rng_for(32);
  const ModelConfig c = tiny_config();
  const SlotAutoencoder model(c, 5);
  const auto batch = random_images(rng, c, 3);
  const auto eps = model.draw_noise(batch.size(), rng);
  double rec = 0.0, kl = 0.0, inter = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto post = model.encode(batch[i]);
    const Mat z = post.mu + (0.5 * post.logvar.array()).exp().matrix().cwiseProduct(eps[i]);
    const auto fw = model.decode(z);
    rec += (fw.pixels - batch[i]).rowwise().squaredNorm().mean();
    kl += gaussian_kl(post.mu, post.logvar);
    inter += l_interact(fw.attention[0][0]);
  }
  const double n = static_cast<double>(batch.size());
  const LossBreakdown lb = model.loss(batch, eps, 0.3, 0.7, 1.0);
  CHECK(lb.rec == doctest::Approx(rec / n).epsilon(1e-12));
  CHECK(lb.kl == doctest::Approx(kl / n).epsilon(1e-12));
  CHECK(lb.interact == doctest::Approx(inter / n).epsilon(1e-12));
  CHECK(lb.total == doctest::Approx(lb.rec + 0.3 * lb.interact + 0.7 * lb.kl).epsilon(1e-14));
}

TEST_CASE("zero-weight decoder: exact reconstruction and output-bias gradient") {
  auto rng = rng_for(33);
  const ModelConfig c = tiny_config();
  SlotAutoencoder model(c, 6);
  param(model, "head.w2").setZero();
  SUBCASE("perfect autoencoder on a constant image") {
    const Mat color = (Mat(1, 3) << 0.2, 0.5, 0.9).finished();
    param(model, "head.b2") = color;
    const std::vector<Image> batch{color.replicate(c.pixels(), 1)};
    const LossBreakdown lb = model.loss(batch, model.draw_noise(1, rng), 0.0, 0.0, 1.0);
    CHECK(lb.rec == 0.0);
    CHECK(lb.total == 0.0);
  }
  SUBCASE("bias gradient is twice the mean residual") {
    const auto batch = random_images(rng, c, 4);
    std::vector<Mat> grads;
    model.loss(batch, model.draw_noise(4, rng), 0.0, 0.0, 1.0, &grads);
    const Mat b = param(model, "head.b2");
    Mat mean_residual = Mat::Zero(1, 3);
    for (const auto& img : batch) mean_residual += (b.replicate(c.pixels(), 1) - img).colwise().sum();
    mean_residual /= static_cast<double>(batch.size() * static_cast<std::size_t>(c.pixels()));
    const Mat g = grads[model.parameters().index_of("head.b2")];
    CHECK((g - 2.0 * mean_residual).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("alpha = 0 removes the attention-product term from the gradient") {
  auto rng = rng_for(34);
  const ModelConfig c = tiny_config();
  const SlotAutoencoder model(c, 7);
  const auto batch = random_images(rng, c, 2);
  const auto eps = model.draw_noise(2, rng);
  std::vector<Mat> g0, g_rec_kl;
  model.loss(batch, eps, 0.0, 0.4, 1.0, &g0);
  // Same objective assembled as (rec + 0.4 kl) with a 1e-300 interaction weight.
  model.loss(batch, eps, 1e-300, 0.4, 1.0, &g_rec_kl);
  for (std::size_t i = 0; i < g0.size(); ++i)
    CHECK((g0[i] - g_rec_kl[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reverse-mode gradients agree with central differences on a frozen tiny model") {
  auto rng = rng_for(35);
  const ModelConfig c = tiny_config();
  const SlotAutoencoder model(c, 8);
  REQUIRE(model.parameters().scalar_count() >= 200);
  const auto batch = random_images(rng, c, 2);
  const auto eps = model.draw_noise(2, rng);
  const auto r = gradient_check(model, batch, eps, 0.5, 0.3, 250, 99);
  CAPTURE(r.worst_parameter);
  CHECK(r.checked == 250);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("training with lr = 0 leaves parameters unchanged") {
  auto rng = rng_for(36);
  const ModelConfig c = tiny_config();
  SlotAutoencoder model(c, 9);
  const auto before = model.parameters();
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.iterations = 5;
  tc.batch_size = 2;
  const auto res = train(model, random_images(rng, c, 4), tc);
  CHECK(res.log.size() == 5);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(model.parameters()[i] == before[i]);
}

TEST_CASE("training is deterministic given the seed and logs the warmup ramp") {
  auto rng = rng_for(37);
  const ModelConfig c = tiny_config();
  const auto data = random_images(rng, c, 6);
  TrainConfig tc;
  tc.iterations = 20;
  tc.batch_size = 3;
  tc.alpha_warmup = 10;
  tc.seed = 4;
  SlotAutoencoder a(c, 1), b(c, 1);
  const auto ra = train(a, data, tc), rb = train(b, data, tc);
  REQUIRE(ra.log.size() == rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    CHECK(ra.log[i].loss.total == rb.log[i].loss.total);
    CHECK(ra.log[i].loss.rec == rb.log[i].loss.rec);
  }
  CHECK(ra.log[0].alpha == 0.0);
  CHECK(ra.log[5].alpha == doctest::Approx(0.5 * tc.alpha));
  CHECK(ra.log[15].alpha == tc.alpha);
}

TEST_CASE("divergence aborts with a diagnostic") {
  auto rng = rng_for(38);
  const ModelConfig c = tiny_config();
  SlotAutoencoder model(c, 2);
  TrainConfig tc;
  tc.iterations = 10;
  tc.divergence_threshold = 1e-9;
  const auto res = train(model, random_images(rng, c, 2), tc);
  CHECK(res.diverged);
  CHECK(res.log.size() == 1);
  CHECK_FALSE(res.diagnostic.empty());
}

TEST_CASE("single-example overfit drives reconstruction error down") {
  const SpriteScene scene = render_scene(
      {{5.0, 6.0, 4.0, 0, SpriteShape::Square}, {10.5, 10.5, 5.0, 2, SpriteShape::Circle}}, 16);
  SlotAutoencoder model(ModelConfig{}, 3);
  TrainConfig tc;
  tc.alpha = 0.0;
  tc.beta = 0.0;
  tc.iterations = 5000;
  tc.batch_size = 1;
  const auto res = train(model, {scene.image}, tc);
  CHECK(res.log.back().loss.rec < 1e-3);
  CHECK(res.log.back().loss.rec < res.log.front().loss.rec);
}

TEST_CASE("config validation and JSON round trip") {
  ModelConfig bad = tiny_config();
  bad.patch = 3;
  CHECK_THROWS_AS(SlotAutoencoder(bad, 0), Error);
  TrainConfig tc;
  tc.alpha = -1.0;
  CHECK_THROWS_AS(tc.validate(), Error);
  tc.alpha = 0.25;
  tc.iterations = 17;
  const TrainConfig back = train_config_from_json(to_json(tc));
  CHECK(back.alpha == 0.25);
  CHECK(back.iterations == 17);
  const ModelConfig mc = model_config_from_json(to_json(tiny_config()));
  CHECK(mc.slot_dim == 3);
  CHECK(mc.image_size == 4);
}
