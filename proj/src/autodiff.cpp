// SPDX-License-Identifier: Apache-2.0
#include "kdgan/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "kdgan/errors.hpp"

namespace kdgan::ad {

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0)
    grad = g;
  else
    grad += g;
}

Var Var::constant(Matrix value) {
  Var v;
  v.node_ = std::make_shared<Node>();
  v.node_->value = std::move(value);
  return v;
}

Var Var::leaf(Matrix value, bool requires_grad) {
  Var v = constant(std::move(value));
  v.node_->requires_grad = requires_grad;
  return v;
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

double Var::item() const {
  if (rows() != 1 || cols() != 1)
    throw InvalidArgument("item() on non-scalar " + shape_string(value()));
  return value()(0, 0);
}

Var Var::make(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  Var out = constant(std::move(value));
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    out.node_->requires_grad = true;
    out.node_->parents.reserve(inputs.size());
    for (auto& in : inputs) out.node_->parents.push_back(in.node_);
    out.node_->backward = std::move(backward);
  }
  return out;
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1)
    throw InvalidArgument("backward() needs a scalar root, got " + shape_string(root.value()));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var detach(const Var& a) { return Var::constant(a.value()); }

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_string(a.value()) +
                          " vs " + shape_string(b.value()));
}

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return Var::make(a.value() + b.value(), {a, b}, [](Node& n) {
    parent(n, 0).accumulate(n.grad);
    parent(n, 1).accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return Var::make(a.value() - b.value(), {a, b}, [](Node& n) {
    parent(n, 0).accumulate(n.grad);
    parent(n, 1).accumulate(-n.grad);
  });
}

Var scale(const Var& a, double s) {
  return Var::make(a.value() * s, {a}, [s](Node& n) { parent(n, 0).accumulate(n.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  Matrix v = a.value().array() + s;
  return Var::make(std::move(v), {a}, [](Node& n) { parent(n, 0).accumulate(n.grad); });
}

Var mul_const(const Var& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols())
    throw InvalidArgument("mul_const: shape mismatch " + shape_string(a.value()) + " vs " +
                          shape_string(c));
  Matrix v = a.value().cwiseProduct(c);
  return Var::make(std::move(v), {a},
                   [c](Node& n) { parent(n, 0).accumulate(n.grad.cwiseProduct(c)); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw InvalidArgument("add_row: expected [1x" + std::to_string(a.cols()) + "] row, got " +
                          shape_string(row.value()));
  Matrix v = a.value().rowwise() + row.value().row(0);
  return Var::make(std::move(v), {a, row}, [](Node& n) {
    parent(n, 0).accumulate(n.grad);
    parent(n, 1).accumulate(n.grad.colwise().sum());
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows())
    throw InvalidArgument("matmul: " + shape_string(a.value()) + " * " + shape_string(b.value()));
  Matrix v = a.value() * b.value();
  return Var::make(std::move(v), {a, b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * n.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols())
    throw InvalidArgument("matmul_nt: " + shape_string(a.value()) + " * " +
                          shape_string(b.value()) + "^T");
  Matrix v = a.value() * b.value().transpose();
  return Var::make(std::move(v), {a, b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value);
    if (pb.requires_grad) pb.accumulate(n.grad.transpose() * pa.value);
  });
}

Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows())
    throw InvalidArgument("concat_cols: row mismatch " + shape_string(a.value()) + " vs " +
                          shape_string(b.value()));
  Matrix v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  const Index ca = a.cols();
  const Index cb = b.cols();
  return Var::make(std::move(v), {a, b}, [ca, cb](Node& n) {
    parent(n, 0).accumulate(n.grad.leftCols(ca));
    parent(n, 1).accumulate(n.grad.rightCols(cb));
  });
}

Var tanh(const Var& a) {
  Matrix v = a.value().array().tanh();
  return Var::make(v, {a}, [v](Node& n) {
    parent(n, 0).accumulate((n.grad.array() * (1.0 - v.array().square())).matrix());
  });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix v = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return Var::make(std::move(v), {a}, [slope](Node& n) {
    const Matrix& x = parent(n, 0).value;
    Matrix g = n.grad;
    for (Index i = 0; i < g.size(); ++i)
      if (!(x.data()[i] > 0.0)) g.data()[i] *= slope;
    parent(n, 0).accumulate(g);
  });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var softplus(const Var& a) {
  Matrix v = a.value().unaryExpr(
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  return Var::make(std::move(v), {a}, [](Node& n) {
    const Matrix& x = parent(n, 0).value;
    Matrix sig = x.unaryExpr([](double t) {
      return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
    });
    parent(n, 0).accumulate(n.grad.cwiseProduct(sig));
  });
}

Var log_clamped(const Var& a, double eps) {
  Matrix v = a.value().unaryExpr(
      [eps](double x) { return std::log(std::clamp(x, eps, 1.0 - eps)); });
  return Var::make(std::move(v), {a}, [eps](Node& n) {
    const Matrix& x = parent(n, 0).value;
    Matrix g = n.grad;
    for (Index i = 0; i < g.size(); ++i) {
      const double xi = x.data()[i];
      g.data()[i] = (xi >= eps && xi <= 1.0 - eps) ? g.data()[i] / xi : 0.0;
    }
    parent(n, 0).accumulate(g);
  });
}

Var sum(const Var& a) {
  const Index r = a.rows(), c = a.cols();
  return Var::make(Matrix::Constant(1, 1, a.value().sum()), {a}, [r, c](Node& n) {
    parent(n, 0).accumulate(Matrix::Constant(r, c, n.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const Index r = a.rows(), c = a.cols();
  const double inv = 1.0 / static_cast<double>(r * c);
  return Var::make(Matrix::Constant(1, 1, a.value().sum() * inv), {a}, [r, c, inv](Node& n) {
    parent(n, 0).accumulate(Matrix::Constant(r, c, n.grad(0, 0) * inv));
  });
}

Var trace(const Var& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("trace of non-square " + shape_string(a.value()));
  const Index r = a.rows();
  return Var::make(Matrix::Constant(1, 1, a.value().trace()), {a}, [r](Node& n) {
    Matrix g = Matrix::Zero(r, r);
    g.diagonal().setConstant(n.grad(0, 0));
    parent(n, 0).accumulate(g);
  });
}

Var l1_mean(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument("l1_mean: shape mismatch " + shape_string(a.value()) + " vs " +
                          shape_string(b.value()));
  const Matrix diff = a.value() - b.value();
  const double inv = 1.0 / static_cast<double>(diff.size());
  const double value = diff.cwiseAbs().sum() * inv;
  return Var::make(Matrix::Constant(1, 1, value), {a, b}, [diff, inv](Node& n) {
    const double s = n.grad(0, 0) * inv;
    Matrix g = diff.unaryExpr([s](double d) { return d > 0.0 ? s : (d < 0.0 ? -s : 0.0); });
    parent(n, 0).accumulate(g);
    parent(n, 1).accumulate(-g);
  });
}

Var row_l2_normalize(const Var& a, double eps) {
  const Matrix& x = a.value();
  Vector norms = x.rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i)
    if (!(norms(i) > eps))
      throw DegenerateInput("row " + std::to_string(i) + " has L2 norm " +
                                std::to_string(norms(i)) + " <= " + std::to_string(eps),
                            i);
  Matrix y = norms.cwiseInverse().asDiagonal() * x;
  return Var::make(y, {a}, [y, norms](Node& n) {
    // d/dx (x/|x|) applied to g: (g - y (y.g)) / |x|
    Vector dots = (y.cwiseProduct(n.grad)).rowwise().sum();
    Matrix g = n.grad - dots.asDiagonal() * y;
    parent(n, 0).accumulate(norms.cwiseInverse().asDiagonal() * g);
  });
}

ImageShape ConvGeometry::out() const {
  return ImageShape{out_channels, (in.height + 2 * pad - kernel) / stride + 1,
                    (in.width + 2 * pad - kernel) / stride + 1};
}

namespace {

// cols: [Cin*k*k x Ho*Wo] for one sample.
void im2col(const double* img, const ConvGeometry& g, const ImageShape& out, Matrix& cols) {
  const int k = g.kernel;
  cols.setZero(static_cast<Index>(g.in.channels) * k * k, static_cast<Index>(out.height) * out.width);
  for (int c = 0; c < g.in.channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Index row = (static_cast<Index>(c) * k + ky) * k + kx;
        for (int oy = 0; oy < out.height; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in.height) continue;
          for (int ox = 0; ox < out.width; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.in.width) continue;
            cols(row, static_cast<Index>(oy) * out.width + ox) =
                img[(static_cast<Index>(c) * g.in.height + iy) * g.in.width + ix];
          }
        }
      }
}

void col2im(const Matrix& cols, const ConvGeometry& g, const ImageShape& out, double* img) {
  const int k = g.kernel;
  for (int c = 0; c < g.in.channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Index row = (static_cast<Index>(c) * k + ky) * k + kx;
        for (int oy = 0; oy < out.height; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in.height) continue;
          for (int ox = 0; ox < out.width; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.in.width) continue;
            img[(static_cast<Index>(c) * g.in.height + iy) * g.in.width + ix] +=
                cols(row, static_cast<Index>(oy) * out.width + ox);
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, const ConvGeometry& geo) {
  const ImageShape out = geo.out();
  const Index patch = static_cast<Index>(geo.in.channels) * geo.kernel * geo.kernel;
  const Index plane = static_cast<Index>(out.height) * out.width;
  if (x.cols() != geo.in.size())
    throw InvalidArgument("conv2d: input " + shape_string(x.value()) + " does not match geometry");
  if (weight.rows() != geo.out_channels || weight.cols() != patch)
    throw InvalidArgument("conv2d: weight " + shape_string(weight.value()) + " expected [" +
                          std::to_string(geo.out_channels) + "x" + std::to_string(patch) + "]");
  if (bias.rows() != 1 || bias.cols() != geo.out_channels)
    throw InvalidArgument("conv2d: bias " + shape_string(bias.value()));
  if (out.height < 1 || out.width < 1) throw InvalidArgument("conv2d: empty output");

  const Index batch = x.rows();
  Matrix y(batch, static_cast<Index>(out.channels) * plane);
  Matrix cols;
  for (Index b = 0; b < batch; ++b) {
    im2col(x.value().row(b).data(), geo, out, cols);
    Matrix ob = weight.value() * cols;  // [Cout x plane]
    ob.colwise() += bias.value().row(0).transpose();
    y.row(b) = Eigen::Map<const RowVector>(ob.data(), ob.size());
  }
  return Var::make(std::move(y), {x, weight, bias}, [geo, out, plane](Node& n) {
    Node& px = parent(n, 0);
    Node& pw = parent(n, 1);
    Node& pb = parent(n, 2);
    const Index batch = n.grad.rows();
    Matrix gx = Matrix::Zero(batch, px.value.cols());
    Matrix gw = Matrix::Zero(pw.value.rows(), pw.value.cols());
    Matrix gb = Matrix::Zero(1, pb.value.cols());
    Matrix cols;
    for (Index b = 0; b < batch; ++b) {
      // grad rows are row-major [Cout x plane] blocks.
      Eigen::Map<const Matrix> go(n.grad.row(b).data(), out.channels, plane);
      if (pw.requires_grad || px.requires_grad) im2col(px.value.row(b).data(), geo, out, cols);
      if (pw.requires_grad) gw.noalias() += go * cols.transpose();
      if (pb.requires_grad) gb.row(0) += go.rowwise().sum().transpose();
      if (px.requires_grad) {
        Matrix gcols = pw.value.transpose() * go;
        col2im(gcols, geo, out, gx.row(b).data());
      }
    }
    px.accumulate(gx);
    pw.accumulate(gw);
    pb.accumulate(gb);
  });
}

Var upsample2x(const Var& x, const ImageShape& in) {
  if (x.cols() != in.size()) throw InvalidArgument("upsample2x: input does not match shape");
  const int H = in.height, W = in.width, C = in.channels;
  Matrix y(x.rows(), static_cast<Index>(C) * 4 * H * W);
  for (Index b = 0; b < x.rows(); ++b)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < 2 * H; ++oy)
        for (int ox = 0; ox < 2 * W; ++ox)
          y(b, (static_cast<Index>(c) * 2 * H + oy) * 2 * W + ox) =
              x.value()(b, (static_cast<Index>(c) * H + oy / 2) * W + ox / 2);
  return Var::make(std::move(y), {x}, [H, W, C](Node& n) {
    Matrix g = Matrix::Zero(n.grad.rows(), static_cast<Index>(C) * H * W);
    for (Index b = 0; b < g.rows(); ++b)
      for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < 2 * H; ++oy)
          for (int ox = 0; ox < 2 * W; ++ox)
            g(b, (static_cast<Index>(c) * H + oy / 2) * W + ox / 2) +=
                n.grad(b, (static_cast<Index>(c) * 2 * H + oy) * 2 * W + ox);
    parent(n, 0).accumulate(g);
  });
}

Var translate(const Var& x, const ImageShape& shape, std::span<const std::pair<int, int>> shifts) {
  if (x.cols() != shape.size()) throw InvalidArgument("translate: input does not match shape");
  if (static_cast<Index>(shifts.size()) != x.rows())
    throw InvalidArgument("translate: one shift per sample required");
  std::vector<std::pair<int, int>> sh(shifts.begin(), shifts.end());
  const int H = shape.height, W = shape.width, C = shape.channels;
  auto move = [H, W, C](const Matrix& src, Matrix& dst, const std::vector<std::pair<int, int>>& s,
                        int sign) {
    for (Index b = 0; b < src.rows(); ++b) {
      const int dx = sign * s[b].first, dy = sign * s[b].second;
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y) {
          const int sy = y - dy;
          if (sy < 0 || sy >= H) continue;
          for (int xx = 0; xx < W; ++xx) {
            const int sx = xx - dx;
            if (sx < 0 || sx >= W) continue;
            dst(b, (static_cast<Index>(c) * H + y) * W + xx) +=
                src(b, (static_cast<Index>(c) * H + sy) * W + sx);
          }
        }
    }
  };
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  move(x.value(), y, sh, +1);
  return Var::make(std::move(y), {x}, [sh, move](Node& n) {
    Matrix g = Matrix::Zero(n.grad.rows(), n.grad.cols());
    move(n.grad, g, sh, -1);
    parent(n, 0).accumulate(g);
  });
}

}  // namespace kdgan::ad
