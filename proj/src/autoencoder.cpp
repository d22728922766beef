#include "asymlab/autoencoder.hpp"

#include "asymlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

namespace asymlab {

using nlohmann::json;

void ModelConfig::validate() const {
  require(image_size > 0 && channels > 0 && patch > 0 && image_size % patch == 0,
          ErrorCode::ConfigError, "model: image_size must be a positive multiple of patch");
  require(embed_dim > 0 && encoder_layers >= 0 && slots >= 1 && slot_dim >= 1 && token_dim > 0 &&
              query_hidden > 0 && head_hidden > 0 && pe_frequencies >= 1,
          ErrorCode::ConfigError, "model: dimensions must be positive");
  require(init_scale > 0.0, ErrorCode::ConfigError, "model: init_scale must be positive");
}

void TrainConfig::validate() const {
  require(alpha >= 0.0 && beta >= 0.0, ErrorCode::ConfigError, "train: alpha, beta must be >= 0");
  require(learning_rate >= 0.0 && iterations >= 0 && batch_size >= 1 && alpha_warmup >= 0,
          ErrorCode::ConfigError, "train: invalid schedule");
  require(rec_weight > 0.0 && lr_drop_factor > 0.0, ErrorCode::ConfigError,
          "train: weights must be positive");
}

json to_json(const ModelConfig& c) {
  return {{"image_size", c.image_size},       {"channels", c.channels},
          {"patch", c.patch},                 {"embed_dim", c.embed_dim},
          {"encoder_layers", c.encoder_layers}, {"slots", c.slots},
          {"slot_dim", c.slot_dim},           {"token_dim", c.token_dim},
          {"query_hidden", c.query_hidden},   {"head_hidden", c.head_hidden},
          {"pe_frequencies", c.pe_frequencies}, {"init_scale", c.init_scale}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.image_size = j.value("image_size", c.image_size);
  c.channels = j.value("channels", c.channels);
  c.patch = j.value("patch", c.patch);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.slots = j.value("slots", c.slots);
  c.slot_dim = j.value("slot_dim", c.slot_dim);
  c.token_dim = j.value("token_dim", c.token_dim);
  c.query_hidden = j.value("query_hidden", c.query_hidden);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.pe_frequencies = j.value("pe_frequencies", c.pe_frequencies);
  c.init_scale = j.value("init_scale", c.init_scale);
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"learning_rate", c.learning_rate},
          {"iterations", c.iterations},
          {"batch_size", c.batch_size},
          {"alpha_warmup", c.alpha_warmup},
          {"rec_weight", c.rec_weight},
          {"lr_drop_iteration", c.lr_drop_iteration},
          {"lr_drop_factor", c.lr_drop_factor},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"divergence_threshold", c.divergence_threshold},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.iterations = j.value("iterations", c.iterations);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.alpha_warmup = j.value("alpha_warmup", c.alpha_warmup);
  c.rec_weight = j.value("rec_weight", c.rec_weight);
  c.lr_drop_iteration = j.value("lr_drop_iteration", c.lr_drop_iteration);
  c.lr_drop_factor = j.value("lr_drop_factor", c.lr_drop_factor);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.divergence_threshold = j.value("divergence_threshold", c.divergence_threshold);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

double gaussian_kl(const Mat& mu, const Mat& logvar) {
  require(mu.rows() == logvar.rows() && mu.cols() == logvar.cols(), ErrorCode::DimensionMismatch,
          "gaussian_kl: shape mismatch");
  return 0.5 * (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum();
}

Mat pixel_encodings(int image_size, int frequencies) {
  const int p = image_size * image_size;
  Mat pe(p, 4 * frequencies);
  const double top = std::max(1.0, image_size / 2.0);
  for (int f = 0; f < frequencies; ++f) {
    const double freq =
        frequencies == 1 ? 1.0 : std::pow(top, static_cast<double>(f) / (frequencies - 1));
    for (int y = 0; y < image_size; ++y)
      for (int x = 0; x < image_size; ++x) {
        const double u = (x + 0.5) / image_size, v = (y + 0.5) / image_size;
        const int l = y * image_size + x;
        pe(l, 4 * f + 0) = std::sin(std::numbers::pi * freq * u);
        pe(l, 4 * f + 1) = std::cos(std::numbers::pi * freq * u);
        pe(l, 4 * f + 2) = std::sin(std::numbers::pi * freq * v);
        pe(l, 4 * f + 3) = std::cos(std::numbers::pi * freq * v);
      }
  }
  return pe;
}

Mat extract_patches(const Image& img, int image_size, int patch, int channels) {
  require(img.rows() == image_size * image_size && img.cols() == channels,
          ErrorCode::DimensionMismatch, "extract_patches: image shape");
  const int per_side = image_size / patch;
  Mat out(per_side * per_side, patch * patch * channels);
  for (int py = 0; py < per_side; ++py)
    for (int px = 0; px < per_side; ++px) {
      int col = 0;
      for (int dy = 0; dy < patch; ++dy)
        for (int dx = 0; dx < patch; ++dx) {
          const int l = (py * patch + dy) * image_size + (px * patch + dx);
          for (int c = 0; c < channels; ++c) out(py * per_side + px, col++) = img(l, c);
        }
    }
  return out;
}

SlotAutoencoder::SlotAutoencoder(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  pe_ = pixel_encodings(cfg_.image_size, cfg_.pe_frequencies);
  init(seed);
}

SlotAutoencoder::SlotAutoencoder(const ModelConfig& cfg, ad::ParameterSet params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  pe_ = pixel_encodings(cfg_.image_size, cfg_.pe_frequencies);
  SlotAutoencoder reference(cfg_, 0);
  require(params_.size() == reference.params_.size(), ErrorCode::DimensionMismatch,
          "autoencoder: parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& want = reference.params_.params[i];
    const auto& got = params_.params[i];
    require(got.name == want.name && got.value.rows() == want.value.rows() &&
                got.value.cols() == want.value.cols(),
            ErrorCode::DimensionMismatch, "autoencoder: parameter " + want.name + " mismatch");
  }
}

void SlotAutoencoder::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto weight = [&](const std::string& name, int rows, int cols) {
    Mat w(rows, cols);
    const double sd = cfg_.init_scale / std::sqrt(static_cast<double>(cols));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = sd * normal(rng);
    params_.add(name, std::move(w));
  };
  auto zeros = [&](const std::string& name, int rows, int cols) {
    params_.add(name, Mat::Zero(rows, cols));
  };
  const int de = cfg_.embed_dim, feat = cfg_.patch * cfg_.patch * cfg_.channels;
  weight("enc.patch_w", de, feat);
  zeros("enc.patch_b", 1, de);
  weight("enc.pos", cfg_.patch_count(), de);
  weight("enc.slot_queries", cfg_.slots, de);
  for (int l = 0; l < cfg_.encoder_layers; ++l) {
    const std::string p = "enc." + std::to_string(l) + ".";
    weight(p + "wq", de, de);
    weight(p + "wk", de, de);
    weight(p + "wv", de, de);
    weight(p + "ff1_w", de, de);
    zeros(p + "ff1_b", 1, de);
    weight(p + "ff2_w", de, de);
    zeros(p + "ff2_b", 1, de);
  }
  weight("enc.mu_w", cfg_.slot_dim, de);
  zeros("enc.mu_b", 1, cfg_.slot_dim);
  weight("enc.lv_w", cfg_.slot_dim, de);
  zeros("enc.lv_b", 1, cfg_.slot_dim);
  const int pe_dim = static_cast<int>(pe_.cols());
  weight("dec.q1_w", cfg_.query_hidden, pe_dim);
  zeros("dec.q1_b", 1, cfg_.query_hidden);
  weight("dec.q2_w", cfg_.query_hidden, cfg_.query_hidden);
  zeros("dec.q2_b", 1, cfg_.query_hidden);
  weight("dec.wq", cfg_.token_dim, cfg_.query_hidden);
  weight("dec.wk", cfg_.token_dim, cfg_.slot_dim);
  weight("dec.wv", cfg_.token_dim, cfg_.slot_dim);
  weight("head.w1", cfg_.head_hidden, cfg_.token_dim);
  zeros("head.b1", 1, cfg_.head_hidden);
  weight("head.w2", cfg_.channels, cfg_.head_hidden);
  zeros("head.b2", 1, cfg_.channels);
}

namespace {

// Builds the model graph on a tape; parameter leaves are created once.
class Graph {
 public:
  Graph(ad::Tape& t, const ad::ParameterSet& ps) : t_(t), ps_(ps), leaf_(ps.size()) {}

  ad::Var p(const std::string& name) {
    const std::size_t i = ps_.index_of(name);
    if (!leaf_[i]) leaf_[i] = t_.parameter(ps_, i);
    return *leaf_[i];
  }

  ad::Var affine(ad::Var x, const std::string& w, const std::string& b) {
    return t_.add_row(t_.matmul_transposed(x, p(w)), p(b));
  }

  struct Encoded {
    ad::Var mu, logvar;
  };

  Encoded encode(const Mat& patches, const ModelConfig& cfg) {
    ad::Var e = t_.tanh(t_.add(affine(t_.constant(patches), "enc.patch_w", "enc.patch_b"),
                               p("enc.pos")));
    ad::Var s = p("enc.slot_queries");
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
    for (int l = 0; l < cfg.encoder_layers; ++l) {
      const std::string pre = "enc." + std::to_string(l) + ".";
      const ad::Var q = t_.matmul_transposed(s, p(pre + "wq"));
      const ad::Var k = t_.matmul_transposed(e, p(pre + "wk"));
      const ad::Var v = t_.matmul_transposed(e, p(pre + "wv"));
      // Softmax over slots makes slots compete for patches.
      const ad::Var a = t_.softmax_rows(t_.scale(t_.matmul_transposed(k, q), scale));
      const ad::Var w = t_.normalize_rows(t_.transpose(a), 1e-8);
      s = t_.add(s, t_.matmul(w, v));
      const ad::Var hidden = t_.tanh(affine(s, pre + "ff1_w", pre + "ff1_b"));
      s = t_.add(s, affine(hidden, pre + "ff2_w", pre + "ff2_b"));
    }
    return {affine(s, "enc.mu_w", "enc.mu_b"),
            t_.clamp(affine(s, "enc.lv_w", "enc.lv_b"), -10.0, 10.0)};
  }

  ad::Var queries(const Mat& pe) {
    const ad::Var h = t_.tanh(affine(t_.constant(pe), "dec.q1_w", "dec.q1_b"));
    return t_.matmul_transposed(affine(h, "dec.q2_w", "dec.q2_b"), p("dec.wq"));
  }

  struct Decoded {
    ad::Var pixels, attention;
  };

  Decoded decode(ad::Var q, ad::Var z, const ModelConfig& cfg) {
    const ad::Var k = t_.matmul_transposed(z, p("dec.wk"));
    const ad::Var v = t_.matmul_transposed(z, p("dec.wv"));
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.token_dim));
    const ad::Var a = t_.softmax_rows(t_.scale(t_.matmul_transposed(q, k), scale));
    const ad::Var tokens = t_.matmul(a, v);
    const ad::Var h = t_.tanh(affine(tokens, "head.w1", "head.b1"));
    return {affine(h, "head.w2", "head.b2"), a};
  }

 private:
  ad::Tape& t_;
  const ad::ParameterSet& ps_;
  std::vector<std::optional<ad::Var>> leaf_;
};

}  // namespace

SlotAutoencoder::Posterior SlotAutoencoder::encode(const Image& img) const {
  ad::Tape t;
  Graph g(t, params_);
  const auto enc = g.encode(extract_patches(img, cfg_.image_size, cfg_.patch, cfg_.channels), cfg_);
  return {t.value(enc.mu), t.value(enc.logvar)};
}

CrossAttentionLayer SlotAutoencoder::decoder_layer() const {
  const auto& ps = params_;
  auto get = [&](const char* n) -> const Mat& { return ps[ps.index_of(n)]; };
  const Mat h = ((pe_ * get("dec.q1_w").transpose()).rowwise() + get("dec.q1_b").row(0))
                    .array()
                    .tanh()
                    .matrix();
  CrossAttentionLayer layer;
  layer.query_inputs = (h * get("dec.q2_w").transpose()).rowwise() + get("dec.q2_b").row(0);
  layer.w_q = get("dec.wq");
  layer.w_k = get("dec.wk");
  layer.w_v = get("dec.wv");
  layer.heads = 1;
  layer.scale = true;
  return layer;
}

PixelHead SlotAutoencoder::pixel_head() const {
  const auto& ps = params_;
  PixelHead head;
  head.w1 = ps[ps.index_of("head.w1")];
  head.b1 = ps[ps.index_of("head.b1")].row(0).transpose();
  head.w2 = ps[ps.index_of("head.w2")];
  head.b2 = ps[ps.index_of("head.b2")].row(0).transpose();
  return head;
}

AttentionForward SlotAutoencoder::decode(const Mat& slots) const {
  return cross_attention_forward({decoder_layer()}, pixel_head(), slots);
}

Mat SlotAutoencoder::decoder_jacobian(const Mat& slots) const {
  return analytic_slot_jacobian(decoder_layer(), pixel_head(), slots);
}

VectorFn SlotAutoencoder::decoder_function() const {
  return asymlab::decoder_function({decoder_layer()}, pixel_head(), cfg_.slots);
}

std::vector<Mat> SlotAutoencoder::draw_noise(std::size_t batch, std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Mat> eps(batch, Mat(cfg_.slots, cfg_.slot_dim));
  for (auto& e : eps)
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = normal(rng);
  return eps;
}

LossBreakdown SlotAutoencoder::loss(const std::vector<Image>& batch, const std::vector<Mat>& eps,
                                    double alpha, double beta, double rec_weight,
                                    std::vector<Mat>* grads) const {
  require(!batch.empty(), ErrorCode::InvalidArgument, "loss: empty batch");
  require(eps.size() == batch.size(), ErrorCode::DimensionMismatch, "loss: noise count mismatch");
  ad::Tape t;
  Graph g(t, params_);
  const ad::Var q = g.queries(pe_);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::optional<ad::Var> rec, kl, inter;
  auto accumulate = [&](std::optional<ad::Var>& acc, ad::Var term) {
    acc = acc ? t.add(*acc, term) : term;
  };
  for (std::size_t i = 0; i < batch.size(); ++i) {
    require(eps[i].rows() == cfg_.slots && eps[i].cols() == cfg_.slot_dim,
            ErrorCode::DimensionMismatch, "loss: noise shape");
    const auto enc =
        g.encode(extract_patches(batch[i], cfg_.image_size, cfg_.patch, cfg_.channels), cfg_);
    const ad::Var sigma = t.exp(t.scale(enc.logvar, 0.5));
    const ad::Var z = t.add(enc.mu, t.hadamard(sigma, t.constant(eps[i])));
    const auto dec = g.decode(q, z, cfg_);
    const ad::Var err = t.sub(dec.pixels, t.constant(batch[i]));
    accumulate(rec, t.scale(t.sum(t.square(err)), 1.0 / static_cast<double>(cfg_.pixels())));
    // KL = 0.5 * sum(mu^2 + exp(lv) - 1 - lv)
    const ad::Var kl_terms =
        t.add_scalar(t.sub(t.add(t.square(enc.mu), t.exp(enc.logvar)), enc.logvar), -1.0);
    accumulate(kl, t.scale(t.sum(kl_terms), 0.5));
    // sum_{j<k} a_j a_k = 0.5 * ((sum_j a_j)^2 - sum_j a_j^2), per pixel.
    accumulate(inter, t.scale(t.sub(t.sum(t.square(t.row_sums(dec.attention))),
                                    t.sum(t.square(dec.attention))),
                              0.5));
  }
  const ad::Var rec_mean = t.scale(*rec, inv_n), kl_mean = t.scale(*kl, inv_n),
                inter_mean = t.scale(*inter, inv_n);
  const ad::Var total = t.add(t.add(t.scale(rec_mean, rec_weight), t.scale(inter_mean, alpha)),
                              t.scale(kl_mean, beta));
  LossBreakdown out{t.scalar(rec_mean), t.scalar(kl_mean), t.scalar(inter_mean), t.scalar(total)};
  if (grads) {
    require(std::isfinite(out.total), ErrorCode::NonFinite, "loss: non-finite total");
    t.backward(total);
    *grads = t.gradients();
    if (grads->size() != params_.size()) *grads = params_.zeros_like();
  }
  return out;
}

TrainResult train(SlotAutoencoder& model, const std::vector<Image>& data, const TrainConfig& cfg,
                  const std::function<void(const TrainLogRow&)>& on_log) {
  cfg.validate();
  require(!data.empty(), ErrorCode::InvalidArgument, "train: empty dataset");
  auto& ps = model.parameters();
  std::vector<Mat> m = ps.zeros_like(), v = ps.zeros_like();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  TrainResult result;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<Image> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(data[pick(rng)]);
    const auto eps = model.draw_noise(batch.size(), rng);
    const double ramp =
        cfg.alpha_warmup > 0 ? std::min(1.0, static_cast<double>(it) / cfg.alpha_warmup) : 1.0;
    const double alpha = cfg.alpha * ramp;
    std::vector<Mat> grads;
    const LossBreakdown lb = model.loss(batch, eps, alpha, cfg.beta, cfg.rec_weight, &grads);
    result.log.push_back({it, alpha, lb});
    if (on_log) on_log(result.log.back());
    if (!std::isfinite(lb.total) || lb.total > cfg.divergence_threshold) {
      std::ostringstream os;
      os << "diverged at iteration " << it << ": rec=" << lb.rec << " kl=" << lb.kl
         << " interact=" << lb.interact << " total=" << lb.total;
      result.diverged = true;
      result.diagnostic = os.str();
      return result;
    }
    double lr = cfg.learning_rate;
    if (cfg.lr_drop_iteration > 0 && it >= cfg.lr_drop_iteration) lr *= cfg.lr_drop_factor;
    const double step = static_cast<double>(it + 1);
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, step);
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, step);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grads[i];
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grads[i].cwiseAbs2();
      ps[i].array() -=
          lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + cfg.adam_eps);
    }
  }
  return result;
}

GradientCheckResult gradient_check(const SlotAutoencoder& model, const std::vector<Image>& batch,
                                   const std::vector<Mat>& eps, double alpha, double beta,
                                   std::size_t count, std::uint64_t seed, double h, double floor) {
  std::vector<Mat> grads;
  model.loss(batch, eps, alpha, beta, 1.0, &grads);
  const auto& ps = model.parameters();
  std::vector<std::pair<std::size_t, Eigen::Index>> entries;
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (Eigen::Index k = 0; k < ps[i].size(); ++k) entries.emplace_back(i, k);
  std::mt19937_64 rng(seed);
  std::shuffle(entries.begin(), entries.end(), rng);
  entries.resize(std::min(count, entries.size()));
  SlotAutoencoder probe = model;
  GradientCheckResult out;
  for (const auto& [i, k] : entries) {
    double& x = probe.parameters()[i].data()[k];
    const double x0 = x;
    x = x0 + h;
    const double up = probe.loss(batch, eps, alpha, beta, 1.0).total;
    x = x0 - h;
    const double down = probe.loss(batch, eps, alpha, beta, 1.0).total;
    x = x0;
    const double fd = (up - down) / (2.0 * h);
    const double an = grads[i].data()[k];
    const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), floor});
    if (rel >= out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst_parameter = ps.params[i].name + "[" + std::to_string(k) + "]";
    }
    ++out.checked;
  }
  return out;
}

}  // namespace asymlab
