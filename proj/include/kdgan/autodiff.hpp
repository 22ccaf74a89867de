// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "kdgan/tensor.hpp"

/// Reverse-mode automatic differentiation over dense matrices.
///
/// Each operation records a node holding its value and a closure that pushes
/// the node's gradient to its parents. Nodes that do not depend on any leaf
/// requiring gradients keep no parents, so constant subgraphs cost nothing
/// on the backward pass.
namespace kdgan::ad {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;

  static Var constant(Matrix value);
  static Var leaf(Matrix value, bool requires_grad = true);
  static Var scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

  const Matrix& value() const { return node_->value; }
  /// Gradient accumulated by the last backward(); zeros if none reached this node.
  Matrix grad() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  /// Value of a 1x1 result.
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }

  /// Creates a node whose parents are `inputs`; `backward` runs only when
  /// at least one input requires gradients.
  static Var make(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward);

 private:
  std::shared_ptr<Node> node_;
};

/// Accumulates d(root)/d(leaf) into every reachable leaf. Root must be 1x1.
void backward(const Var& root);

Var detach(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// Elementwise product with a constant matrix of the same shape.
Var mul_const(const Var& a, const Matrix& c);
/// Adds a [1 x C] row to every row of a.
Var add_row(const Var& a, const Var& row);

Var matmul(const Var& a, const Var& b);
/// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var concat_cols(const Var& a, const Var& b);

Var tanh(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.2);
Var relu(const Var& a);
/// log(1 + exp(a)), computed stably.
Var softplus(const Var& a);
/// log(clamp(a, eps, 1 - eps)); gradient is zero where clamping applies.
Var log_clamped(const Var& a, double eps);

Var sum(const Var& a);
Var mean(const Var& a);
/// Sum of the diagonal of a square matrix.
Var trace(const Var& a);

/// Mean absolute difference over all entries; the subgradient at 0 is 0.
Var l1_mean(const Var& a, const Var& b);

/// Divides every row by its L2 norm. Throws DegenerateInput naming the first
/// row whose norm is <= eps.
Var row_l2_normalize(const Var& a, double eps = 1e-12);

/// 2-D convolution on [B x Cin*H*W] inputs.
/// weight: [Cout x Cin*k*k], bias: [1 x Cout]. Output: [B x Cout*Ho*Wo].
struct ConvGeometry {
  ImageShape in;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  ImageShape out() const;
};
Var conv2d(const Var& x, const Var& weight, const Var& bias, const ConvGeometry& geo);

/// Nearest-neighbour 2x upsampling of [B x C*H*W] images.
Var upsample2x(const Var& x, const ImageShape& in);

/// Integer translation of each sample with zero fill. shifts[b] = (dx, dy).
Var translate(const Var& x, const ImageShape& shape, std::span<const std::pair<int, int>> shifts);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace kdgan::ad
