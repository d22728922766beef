#include "asymlab/attention.hpp"

#include "asymlab/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace asymlab {

double CrossAttentionLayer::logit_scale() const {
  return scale ? 1.0 / std::sqrt(static_cast<double>(w_q.rows() / heads)) : 1.0;
}

void CrossAttentionLayer::validate(Eigen::Index input_dim) const {
  require(heads >= 1, ErrorCode::InvalidArgument, "attention: heads must be >= 1");
  require(w_q.rows() > 0 && w_q.rows() % heads == 0, ErrorCode::DimensionMismatch,
          "attention: d_q must be a positive multiple of the head count");
  require(w_k.rows() == w_q.rows() && w_v.rows() == w_q.rows(), ErrorCode::DimensionMismatch,
          "attention: W_Q, W_K, W_V must share d_q rows");
  require(w_k.cols() == w_v.cols(), ErrorCode::DimensionMismatch,
          "attention: W_K and W_V must share the slot dimension");
  require(w_q.cols() == input_dim, ErrorCode::DimensionMismatch,
          "attention: W_Q has " + std::to_string(w_q.cols()) + " columns, queries have " +
              std::to_string(input_dim));
  require(all_finite(w_q) && all_finite(w_k) && all_finite(w_v), ErrorCode::NonFinite,
          "attention: non-finite weights");
}

void PixelHead::validate(Eigen::Index token_dim) const {
  require(w1.cols() == token_dim && b1.size() == w1.rows() && w2.cols() == w1.rows() &&
              b2.size() == w2.rows(),
          ErrorCode::DimensionMismatch, "pixel head: inconsistent shapes");
  require(all_finite(w1) && all_finite(w2) && b1.allFinite() && b2.allFinite(),
          ErrorCode::NonFinite, "pixel head: non-finite weights");
}

Mat PixelHead::eval(const Mat& tokens) const {
  Mat hidden = ((tokens * w1.transpose()).rowwise() + b1.transpose()).array().tanh().matrix();
  return (hidden * w2.transpose()).rowwise() + b2.transpose();
}

Mat PixelHead::jacobian(const Vec& token) const {
  const Vec t = (w1 * token + b1).array().tanh().matrix();
  const Vec dt = (1.0 - t.array().square()).matrix();
  return w2 * dt.asDiagonal() * w1;
}

Mat softmax_rows(const Mat& logits) {
  require(all_finite(logits), ErrorCode::NonFinite, "softmax: non-finite logits");
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

AttentionForward cross_attention_forward(const std::vector<CrossAttentionLayer>& layers,
                                         const PixelHead& head, const Mat& slots) {
  require(!layers.empty(), ErrorCode::InvalidArgument, "attention: no layers");
  require(slots.rows() >= 1, ErrorCode::InvalidArgument, "attention: need at least one slot");
  require(all_finite(slots), ErrorCode::NonFinite, "attention: non-finite slots");
  AttentionForward out;
  Mat queries_in = layers.front().query_inputs;
  require(queries_in.rows() > 0, ErrorCode::InvalidArgument,
          "attention: first layer has no query inputs");
  for (const auto& layer : layers) {
    layer.validate(queries_in.cols());
    require(layer.slot_dim() == slots.cols(), ErrorCode::DimensionMismatch,
            "attention: slot dimension mismatch");
    const Mat q = queries_in * layer.w_q.transpose();  // P x d_q
    const Mat k = slots * layer.w_k.transpose();       // K x d_q
    const Mat v = slots * layer.w_v.transpose();       // K x d_q
    const Eigen::Index dh = layer.token_dim() / layer.heads;
    Mat tokens(q.rows(), q.cols());
    std::vector<Mat> per_head;
    for (int h = 0; h < layer.heads; ++h) {
      const auto cols = Eigen::seqN(h * dh, dh);
      Mat a = softmax_rows(layer.logit_scale() * q(Eigen::all, cols) *
                           k(Eigen::all, cols).transpose());
      tokens(Eigen::all, cols) = a * v(Eigen::all, cols);
      per_head.push_back(std::move(a));
    }
    out.attention.push_back(std::move(per_head));
    queries_in = tokens;
  }
  head.validate(queries_in.cols());
  out.tokens = queries_in;
  out.pixels = head.eval(queries_in);
  return out;
}

Mat analytic_slot_jacobian(const CrossAttentionLayer& layer, const PixelHead& head,
                           const Mat& slots) {
  require(layer.heads == 1, ErrorCode::InvalidArgument,
          "analytic Jacobian: single-head layers only");
  const AttentionForward fw = cross_attention_forward({layer}, head, slots);
  const Mat& a = fw.attention[0][0];
  const Mat q = layer.query_inputs * layer.w_q.transpose();
  const Mat v = slots * layer.w_v.transpose();
  const Eigen::Index pixels = a.rows(), kslots = slots.rows(), s = slots.cols();
  const Eigen::Index c = head.channels();
  Mat jac = Mat::Zero(pixels * c, kslots * s);
  for (Eigen::Index d = 0; d < pixels; ++d) {
    const Vec xbar = fw.tokens.row(d).transpose();
    const Mat jpsi = head.jacobian(xbar);
    const Eigen::RowVectorXd md = layer.logit_scale() * q.row(d) * layer.w_k;  // 1 x s
    for (Eigen::Index m = 0; m < kslots; ++m) {
      const Vec dv = v.row(m).transpose() - xbar;
      jac.block(d * c, m * s, c, s) = a(d, m) * (jpsi * (layer.w_v + dv * md));
    }
  }
  return jac;
}

Vec flatten_rows(const Mat& m) {
  Vec v(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) v.segment(r * m.cols(), m.cols()) = m.row(r);
  return v;
}

Mat unflatten_rows(const Vec& v, Eigen::Index rows, Eigen::Index cols) {
  require(v.size() == rows * cols, ErrorCode::DimensionMismatch, "unflatten: size mismatch");
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = v.segment(r * cols, cols);
  return m;
}

VectorFn decoder_function(const std::vector<CrossAttentionLayer>& layers, const PixelHead& head,
                          Eigen::Index slot_count) {
  require(!layers.empty(), ErrorCode::InvalidArgument, "decoder: no layers");
  const Eigen::Index s = layers.front().slot_dim();
  return [layers, head, slot_count, s](const Vec& z) -> Vec {
    return flatten_rows(cross_attention_forward(layers, head, unflatten_rows(z, slot_count, s))
                            .pixels);
  };
}

Mat aggregate_attention(const std::vector<Mat>& matrices) {
  require(!matrices.empty(), ErrorCode::InvalidArgument, "aggregate_attention: empty input");
  Mat sum = matrices.front();
  for (std::size_t i = 1; i < matrices.size(); ++i) {
    require(matrices[i].rows() == sum.rows() && matrices[i].cols() == sum.cols(),
            ErrorCode::DimensionMismatch, "aggregate_attention: shape mismatch");
    sum += matrices[i];
  }
  return sum;
}

Mat aggregate_attention(const std::vector<std::vector<Mat>>& per_layer) {
  std::vector<Mat> flat;
  for (const auto& layer : per_layer) flat.insert(flat.end(), layer.begin(), layer.end());
  return aggregate_attention(flat);
}

double l_interact(const Mat& a) {
  require(all_finite(a), ErrorCode::NonFinite, "l_interact: non-finite entries");
  require(a.size() == 0 || a.minCoeff() >= 0.0, ErrorCode::DomainError,
          "l_interact: negative attention entry");
  long double total = 0.0L;
  for (Eigen::Index l = 0; l < a.rows(); ++l)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(l, j) == 0.0) continue;
      for (Eigen::Index k = j + 1; k < a.cols(); ++k)
        total += static_cast<long double>(a(l, j)) * static_cast<long double>(a(l, k));
    }
  // A positive sum below the double range rounds up, keeping "zero iff one-hot".
  if (total > 0.0L && static_cast<double>(total) == 0.0) return std::numeric_limits<double>::denorm_min();
  return static_cast<double>(total);
}

double l_interact(const std::vector<Mat>& batch) {
  require(!batch.empty(), ErrorCode::InvalidArgument, "l_interact: empty batch");
  double sum = 0.0;
  for (const auto& a : batch) sum += l_interact(a);
  return sum / static_cast<double>(batch.size());
}

}  // namespace asymlab
