#pragma once

// Cross-attention decoder: pixel queries attend over slots, the attended token
// is mapped to a pixel by a small smooth head.
//
// Layouts: slots are a K x slot_dim matrix; flattened latents are slot-major
// (z[m * slot_dim + r]). Pixels are P x C; flattened outputs are pixel-major
// (x[l * C + c]). Attention matrices are P x K and row-stochastic.

#include "asymlab/linalg.hpp"

#include <vector>

namespace asymlab {

struct CrossAttentionLayer {
  Mat w_q;  // d_q x d_in, d_in = query-input width (layer 0) or previous d_q
  Mat w_k;  // d_q x slot_dim
  Mat w_v;  // d_q x slot_dim
  /// P x d_o query inputs; consulted only by the first layer.
  Mat query_inputs;
  int heads = 1;
  /// Divide logits by sqrt(d_q / heads).
  bool scale = true;

  Eigen::Index token_dim() const { return w_q.rows(); }
  Eigen::Index slot_dim() const { return w_k.cols(); }
  double logit_scale() const;
  void validate(Eigen::Index input_dim) const;
};

/// psi(t) = W2 tanh(W1 t + b1) + b2.
struct PixelHead {
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;

  Eigen::Index channels() const { return w2.rows(); }
  void validate(Eigen::Index token_dim) const;
  /// Rows of `tokens` are mapped independently.
  Mat eval(const Mat& tokens) const;
  Mat jacobian(const Vec& token) const;  // C x d_q
};

/// Softmax per row after subtracting the row maximum.
Mat softmax_rows(const Mat& logits);

struct AttentionForward {
  Mat pixels;                             // P x C
  Mat tokens;                             // P x d_q of the last layer
  std::vector<std::vector<Mat>> attention;  // [layer][head], P x K each
};

AttentionForward cross_attention_forward(const std::vector<CrossAttentionLayer>& layers,
                                         const PixelHead& head, const Mat& slots);

/// Closed-form Jacobian of the flattened pixels w.r.t. the flattened slots,
/// (P*C) x (K*slot_dim). Single layer, single head only:
///   d xbar_d / d z_m = A_{d,m} (W_V + (V_m - xbar_d) M_d),  M_d = s q_d^T W_K,
/// followed by the head Jacobian at xbar_d.
Mat analytic_slot_jacobian(const CrossAttentionLayer& layer, const PixelHead& head,
                           const Mat& slots);

/// Decoder as a black-box map of the flattened slots.
VectorFn decoder_function(const std::vector<CrossAttentionLayer>& layers, const PixelHead& head,
                          Eigen::Index slot_count);

Vec flatten_rows(const Mat& m);
Mat unflatten_rows(const Vec& v, Eigen::Index rows, Eigen::Index cols);

/// Elementwise sum; not renormalized.
Mat aggregate_attention(const std::vector<Mat>& matrices);
Mat aggregate_attention(const std::vector<std::vector<Mat>>& per_layer);

/// sum_l sum_{j<k} A_{l,j} A_{l,k}; requires finite non-negative entries.
/// Products are accumulated in long double, so only a total below the
/// smallest positive double can round to zero.
double l_interact(const Mat& a);
double l_interact(const std::vector<Mat>& batch);

}  // namespace asymlab
