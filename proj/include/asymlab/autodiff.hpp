#pragma once

// Reverse-mode differentiation over dense matrices. Each operation appends a
// node holding its value and a closure that pushes the node's adjoint to its
// inputs; backward() runs the closures in reverse insertion order, which is a
// valid topological order because inputs always precede outputs.

#include "asymlab/linalg.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace asymlab::ad {

class Tape;

struct Var {
  std::size_t id = 0;
};

struct Parameter {
  std::string name;
  Mat value;
};

/// Named trainable matrices; the gradient set has the same shapes.
struct ParameterSet {
  std::vector<Parameter> params;

  std::size_t add(std::string name, Mat value);
  std::size_t index_of(const std::string& name) const;
  Mat& operator[](std::size_t i) { return params[i].value; }
  const Mat& operator[](std::size_t i) const { return params[i].value; }
  std::size_t size() const { return params.size(); }
  std::size_t scalar_count() const;
  std::vector<Mat> zeros_like() const;
};

class Tape {
 public:
  Var constant(Mat value);
  /// Leaf bound to parameter i; backward() accumulates into gradients()[i].
  Var parameter(const ParameterSet& ps, std::size_t i);

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const;

  Var matmul(Var a, Var b);
  Var matmul_transposed(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  /// a (r x c) plus the 1 x c row b broadcast over rows.
  Var add_row(Var a, Var b);
  Var transpose(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var square(Var a);
  /// Elementwise clamp; the derivative is zero where the bound is active.
  Var clamp(Var a, double lo, double hi);
  Var softmax_rows(Var a);
  /// Each row divided by (its sum + eps).
  Var normalize_rows(Var a, double eps);
  Var row_sums(Var a);  // r x 1
  Var sum(Var a);       // 1 x 1
  Var mean(Var a);      // 1 x 1
  Var cols(Var a, Eigen::Index begin, Eigen::Index count);
  Var hcat(const std::vector<Var>& parts);

  /// Seeds d(out)/d(out) = 1 for a 1 x 1 node.
  void backward(Var out);
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }
  std::vector<Mat>& gradients() { return param_grads_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> backward;
  };
  Var push(Mat value, std::function<void()> backward = {});
  Mat& g(Var v);
  Node& node(Var v) { return nodes_[v.id]; }

  std::vector<Node> nodes_;
  std::vector<Mat> param_grads_;
};

}  // namespace asymlab::ad
