#include "asymlab/autodiff.hpp"

#include "asymlab/attention.hpp"
#include "asymlab/error.hpp"

#include <cmath>

namespace asymlab::ad {

std::size_t ParameterSet::add(std::string name, Mat value) {
  params.push_back({std::move(name), std::move(value)});
  return params.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return i;
  throw Error(ErrorCode::InvalidArgument, "unknown parameter " + name);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::vector<Mat> ParameterSet::zeros_like() const {
  std::vector<Mat> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  return out;
}

Var Tape::push(Mat value, std::function<void()> backward) {
  nodes_.push_back({std::move(value), Mat(), std::move(backward)});
  return Var{nodes_.size() - 1};
}

Mat& Tape::g(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

double Tape::scalar(Var v) const {
  const Mat& m = value(v);
  require(m.rows() == 1 && m.cols() == 1, ErrorCode::DimensionMismatch, "tape: not a scalar");
  return m(0, 0);
}

Var Tape::constant(Mat value) { return push(std::move(value)); }

Var Tape::parameter(const ParameterSet& ps, std::size_t i) {
  if (param_grads_.size() != ps.size()) param_grads_ = ps.zeros_like();
  const Var out = push(ps[i]);
  node(out).backward = [this, out, i] { param_grads_[i] += nodes_[out.id].grad; };
  return out;
}

namespace {
void same_shape(const Mat& a, const Mat& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::DimensionMismatch,
          std::string("tape ") + op + ": shape mismatch");
}
}  // namespace

Var Tape::matmul(Var a, Var b) {
  require(value(a).cols() == value(b).rows(), ErrorCode::DimensionMismatch, "tape matmul: shape");
  const Var out = push(value(a) * value(b));
  node(out).backward = [this, a, b, out] {
    const Mat& go = nodes_[out.id].grad;
    g(a) += go * value(b).transpose();
    g(b) += value(a).transpose() * go;
  };
  return out;
}

Var Tape::matmul_transposed(Var a, Var b) {
  require(value(a).cols() == value(b).cols(), ErrorCode::DimensionMismatch,
          "tape matmul_transposed: shape");
  const Var out = push(value(a) * value(b).transpose());
  node(out).backward = [this, a, b, out] {
    const Mat& go = nodes_[out.id].grad;
    g(a) += go * value(b);
    g(b) += go.transpose() * value(a);
  };
  return out;
}

Var Tape::add(Var a, Var b) {
  same_shape(value(a), value(b), "add");
  const Var out = push(value(a) + value(b));
  node(out).backward = [this, a, b, out] {
    g(a) += nodes_[out.id].grad;
    g(b) += nodes_[out.id].grad;
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  same_shape(value(a), value(b), "sub");
  const Var out = push(value(a) - value(b));
  node(out).backward = [this, a, b, out] {
    g(a) += nodes_[out.id].grad;
    g(b) -= nodes_[out.id].grad;
  };
  return out;
}

Var Tape::hadamard(Var a, Var b) {
  same_shape(value(a), value(b), "hadamard");
  const Var out = push(value(a).cwiseProduct(value(b)));
  node(out).backward = [this, a, b, out] {
    const Mat& go = nodes_[out.id].grad;
    g(a) += go.cwiseProduct(value(b));
    g(b) += go.cwiseProduct(value(a));
  };
  return out;
}

Var Tape::scale(Var a, double s) {
  const Var out = push(s * value(a));
  node(out).backward = [this, a, out, s] { g(a) += s * nodes_[out.id].grad; };
  return out;
}

Var Tape::add_scalar(Var a, double s) {
  const Var out = push((value(a).array() + s).matrix());
  node(out).backward = [this, a, out] { g(a) += nodes_[out.id].grad; };
  return out;
}

Var Tape::add_row(Var a, Var b) {
  require(value(b).rows() == 1 && value(b).cols() == value(a).cols(),
          ErrorCode::DimensionMismatch, "tape add_row: shape");
  const Var out = push(value(a).rowwise() + value(b).row(0));
  node(out).backward = [this, a, b, out] {
    g(a) += nodes_[out.id].grad;
    g(b) += nodes_[out.id].grad.colwise().sum();
  };
  return out;
}

Var Tape::transpose(Var a) {
  const Var out = push(value(a).transpose());
  node(out).backward = [this, a, out] { g(a) += nodes_[out.id].grad.transpose(); };
  return out;
}

Var Tape::tanh(Var a) {
  const Var out = push(value(a).array().tanh().matrix());
  node(out).backward = [this, a, out] {
    const Mat& y = nodes_[out.id].value;
    g(a) += nodes_[out.id].grad.cwiseProduct((1.0 - y.array().square()).matrix());
  };
  return out;
}

Var Tape::exp(Var a) {
  const Var out = push(value(a).array().exp().matrix());
  node(out).backward = [this, a, out] {
    g(a) += nodes_[out.id].grad.cwiseProduct(nodes_[out.id].value);
  };
  return out;
}

Var Tape::square(Var a) {
  const Var out = push(value(a).array().square().matrix());
  node(out).backward = [this, a, out] {
    g(a) += 2.0 * nodes_[out.id].grad.cwiseProduct(value(a));
  };
  return out;
}

Var Tape::clamp(Var a, double lo, double hi) {
  const Var out = push(value(a).cwiseMax(lo).cwiseMin(hi));
  node(out).backward = [this, a, out, lo, hi] {
    const Mat& x = value(a);
    const Mat mask = ((x.array() >= lo) && (x.array() <= hi)).cast<double>().matrix();
    g(a) += nodes_[out.id].grad.cwiseProduct(mask);
  };
  return out;
}

Var Tape::softmax_rows(Var a) {
  const Var out = push(asymlab::softmax_rows(value(a)));
  node(out).backward = [this, a, out] {
    const Mat& y = nodes_[out.id].value;
    const Mat& go = nodes_[out.id].grad;
    const Vec dots = go.cwiseProduct(y).rowwise().sum();
    g(a) += y.cwiseProduct((go.colwise() - dots));
  };
  return out;
}

Var Tape::normalize_rows(Var a, double eps) {
  const Vec denom = (value(a).rowwise().sum().array() + eps).matrix();
  const Var out = push(denom.cwiseInverse().asDiagonal() * value(a));
  node(out).backward = [this, a, out, denom] {
    const Mat& y = nodes_[out.id].value;
    const Mat& go = nodes_[out.id].grad;
    const Vec dots = go.cwiseProduct(y).rowwise().sum();
    g(a) += denom.cwiseInverse().asDiagonal() * Mat(go.colwise() - dots);
  };
  return out;
}

Var Tape::row_sums(Var a) {
  const Var out = push(value(a).rowwise().sum());
  node(out).backward = [this, a, out] {
    g(a) += nodes_[out.id].grad.col(0).replicate(1, value(a).cols());
  };
  return out;
}

Var Tape::sum(Var a) {
  const Var out = push(Mat::Constant(1, 1, value(a).sum()));
  node(out).backward = [this, a, out] { g(a).array() += nodes_[out.id].grad(0, 0); };
  return out;
}

Var Tape::mean(Var a) {
  const double n = static_cast<double>(value(a).size());
  require(n > 0, ErrorCode::InvalidArgument, "tape mean: empty");
  const Var out = push(Mat::Constant(1, 1, value(a).sum() / n));
  node(out).backward = [this, a, out, n] { g(a).array() += nodes_[out.id].grad(0, 0) / n; };
  return out;
}

Var Tape::cols(Var a, Eigen::Index begin, Eigen::Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= value(a).cols(),
          ErrorCode::DimensionMismatch, "tape cols: range");
  const Var out = push(value(a).middleCols(begin, count));
  node(out).backward = [this, a, out, begin, count] {
    g(a).middleCols(begin, count) += nodes_[out.id].grad;
  };
  return out;
}

Var Tape::hcat(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorCode::InvalidArgument, "tape hcat: empty");
  const Eigen::Index rows = value(parts.front()).rows();
  Eigen::Index total = 0;
  for (const Var p : parts) {
    require(value(p).rows() == rows, ErrorCode::DimensionMismatch, "tape hcat: rows");
    total += value(p).cols();
  }
  Mat v(rows, total);
  Eigen::Index at = 0;
  for (const Var p : parts) {
    v.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  const Var out = push(std::move(v));
  node(out).backward = [this, parts, out] {
    Eigen::Index pos = 0;
    for (const Var p : parts) {
      const Eigen::Index c = value(p).cols();
      g(p) += nodes_[out.id].grad.middleCols(pos, c);
      pos += c;
    }
  };
  return out;
}

void Tape::backward(Var out) {
  require(value(out).size() == 1, ErrorCode::DimensionMismatch, "tape backward: non-scalar output");
  for (auto& p : param_grads_) p.setZero();
  for (auto& n : nodes_) n.grad.resize(0, 0);
  g(out)(0, 0) = 1.0;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward();
  }
}

}  // namespace asymlab::ad
