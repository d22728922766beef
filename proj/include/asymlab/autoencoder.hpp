#pragma once

// Toy slot autoencoder. Images are (H*W) x 3 matrices with pixel l = y*W + x.
//
// Encoder: p x p patches -> linear embedding + learned patch positions ->
// L_enc rounds of attention from learned slot queries (softmax over slots,
// then a weighted mean over patches) with a residual tanh feed-forward ->
// per-slot mean and log-variance (clamped to [-10, 10]).
//
// Decoder: one single-head cross-attention layer whose queries are a learned
// 2-layer map of fixed sinusoidal pixel encodings, followed by a tanh pixel
// head. It is exported as attention-module structs so the analytic slot
// Jacobian applies unchanged.

#include "asymlab/attention.hpp"
#include "asymlab/autodiff.hpp"
#include "asymlab/linalg.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace asymlab {

using Image = Mat;

struct ModelConfig {
  int image_size = 16;
  int channels = 3;
  int patch = 4;
  int embed_dim = 32;
  int encoder_layers = 2;
  int slots = 4;
  int slot_dim = 8;
  int token_dim = 32;
  int query_hidden = 32;
  int head_hidden = 32;
  /// Sinusoid frequencies per axis, geometric from 1 to image_size / 2.
  int pe_frequencies = 4;
  double init_scale = 1.0;

  int pixels() const { return image_size * image_size; }
  int patch_count() const { return (image_size / patch) * (image_size / patch); }
  void validate() const;
};

struct TrainConfig {
  double alpha = 0.05;
  double beta = 0.05;
  double learning_rate = 5e-4;
  int iterations = 3000;
  int batch_size = 16;
  int alpha_warmup = 1000;
  /// Reconstruction term weight; 1 means the plain mean squared pixel error.
  double rec_weight = 1.0;
  /// Multiply the learning rate by lr_drop_factor from this iteration on; 0 = off.
  int lr_drop_iteration = 0;
  double lr_drop_factor = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double divergence_threshold = 1e6;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossBreakdown {
  double rec = 0.0;
  double kl = 0.0;
  double interact = 0.0;
  double total = 0.0;
};

/// Closed-form KL(N(mu, exp(logvar)) || N(0, 1)) summed over entries.
double gaussian_kl(const Mat& mu, const Mat& logvar);

/// Fixed sinusoidal encodings of pixel centres, P x (4 * frequencies).
Mat pixel_encodings(int image_size, int frequencies);

/// Image -> (patch_count) x (p * p * channels), patches in raster order.
Mat extract_patches(const Image& img, int image_size, int patch, int channels);

class SlotAutoencoder {
 public:
  SlotAutoencoder(const ModelConfig& cfg, std::uint64_t seed);
  SlotAutoencoder(const ModelConfig& cfg, ad::ParameterSet params);

  const ModelConfig& config() const { return cfg_; }
  ad::ParameterSet& parameters() { return params_; }
  const ad::ParameterSet& parameters() const { return params_; }

  struct Posterior {
    Mat mu;      // K x slot_dim
    Mat logvar;  // K x slot_dim, clamped
  };
  Posterior encode(const Image& img) const;

  /// Decoder layer (with the current pixel queries) and head.
  CrossAttentionLayer decoder_layer() const;
  PixelHead pixel_head() const;
  AttentionForward decode(const Mat& slots) const;
  /// (P*C) x (K*slot_dim), analytic.
  Mat decoder_jacobian(const Mat& slots) const;
  VectorFn decoder_function() const;

  /// Loss for a batch with reparameterization noise eps[i] (K x slot_dim).
  /// When `grads` is non-null it receives d total / d parameter.
  LossBreakdown loss(const std::vector<Image>& batch, const std::vector<Mat>& eps, double alpha,
                     double beta, double rec_weight, std::vector<Mat>* grads = nullptr) const;

  /// Draws one eps per example from `rng`.
  std::vector<Mat> draw_noise(std::size_t batch, std::mt19937_64& rng) const;

 private:
  void init(std::uint64_t seed);
  Mat pe_;
  ModelConfig cfg_;
  ad::ParameterSet params_;
};

struct TrainLogRow {
  int iteration = 0;
  double alpha = 0.0;
  LossBreakdown loss;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  bool diverged = false;
  std::string diagnostic;
};

/// Adam on the three-part loss with alpha warmed linearly over alpha_warmup
/// iterations. Batches are drawn with replacement from the run's seeded stream.
/// `on_log` (optional) sees every row as it is produced.
TrainResult train(SlotAutoencoder& model, const std::vector<Image>& data, const TrainConfig& cfg,
                  const std::function<void(const TrainLogRow&)>& on_log = {});

/// Max over entries of |g_analytic - g_fd| / max(|g_analytic|, |g_fd|, floor)
/// for `count` parameter entries sampled uniformly, central differences of step h.
struct GradientCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_parameter;
};
GradientCheckResult gradient_check(const SlotAutoencoder& model, const std::vector<Image>& batch,
                                   const std::vector<Mat>& eps, double alpha, double beta,
                                   std::size_t count, std::uint64_t seed, double h = 1e-5,
                                   double floor = 1e-6);

}  // namespace asymlab
