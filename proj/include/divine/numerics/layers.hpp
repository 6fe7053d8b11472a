#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "divine/numerics/tensor.hpp"

namespace divine {

// ---------------------------------------------------------------------------
// Dense: y = x W^T + b, rows of x are samples. W is (out x in), b is (1 x out).
// ---------------------------------------------------------------------------

inline void check_dense(const Matrix& x, const Matrix& w, const Matrix& b) {
  if (x.cols() != w.cols()) {
    throw DimensionError("dense input x: expected " + std::to_string(w.cols()) + " columns, got " + shape_str(x));
  }
  require_shape(b, 1, w.rows(), "dense bias b");
}

inline Matrix dense_forward(const Matrix& x, const Matrix& w, const Matrix& b) {
  check_dense(x, w, b);
  Matrix y(x.rows(), w.rows());
  y.noalias() = x * w.transpose();
  y.rowwise() += b.row(0);
  return y;
}

inline Vector dense_forward(const Vector& x, const Matrix& w, const Vector& b) {
  if (x.size() != w.cols()) throw DimensionError("dense input x: length " + std::to_string(x.size()) + " vs W " + shape_str(w));
  if (b.size() != w.rows()) throw DimensionError("dense bias b: length " + std::to_string(b.size()) + " vs W " + shape_str(w));
  return w * x + b;
}

struct DenseGrads {
  Matrix dx;
  Matrix dw;
  Matrix db;
};

inline DenseGrads dense_backward(const Matrix& x, const Matrix& w, const Matrix& dy) {
  if (dy.rows() != x.rows() || dy.cols() != w.rows()) throw DimensionError("dense upstream gradient dy: got " + shape_str(dy));
  DenseGrads g;
  g.dx.noalias() = dy * w;
  g.dw.noalias() = dy.transpose() * x;
  g.db = dy.colwise().sum();
  return g;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class Activation { relu, sigmoid, softmax, tanh };

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

inline Matrix sigmoid(const Matrix& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }

// Row-wise softmax, shifted by the row max.
inline Matrix softmax(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - mx).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

inline Vector softmax(const Vector& x) {
  const Matrix row = x.transpose();
  return softmax(row).transpose();
}

inline Matrix activation(const Matrix& x, Activation kind) {
  switch (kind) {
    case Activation::relu: return relu(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::softmax: return softmax(x);
    case Activation::tanh: return x.array().tanh().matrix();
  }
  return x;
}

inline Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  return (x.array() > 0.0).select(dy, 0.0);
}

// y is the sigmoid output.
inline Matrix sigmoid_backward(const Matrix& y, const Matrix& dy) {
  return (dy.array() * y.array() * (1.0 - y.array())).matrix();
}

inline Matrix tanh_backward(const Matrix& y, const Matrix& dy) {
  return (dy.array() * (1.0 - y.array().square())).matrix();
}

// y is the softmax output; row-wise Jacobian-vector product.
inline Matrix softmax_backward(const Matrix& y, const Matrix& dy) {
  Matrix dx(y.rows(), y.cols());
  for (Index r = 0; r < y.rows(); ++r) {
    const double dot = y.row(r).dot(dy.row(r));
    dx.row(r) = (y.row(r).array() * (dy.row(r).array() - dot)).matrix();
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Conv1d, stride 1, odd kernel, zero "same" padding per sequence.
// Kernels are stored (d_out x k*d_in); column j*d_in + c holds tap j
// (relative offset j - k/2) for input channel c.
// ---------------------------------------------------------------------------

inline void check_conv(const Ragged& x, const Matrix& kernels, const Matrix& bias, Index k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("conv1d kernel size must be odd, got " + std::to_string(k));
  if (kernels.cols() != k * x.width()) {
    throw DimensionError("conv1d kernels: expected " + std::to_string(k * x.width()) + " columns, got " + shape_str(kernels));
  }
  require_shape(bias, 1, kernels.rows(), "conv1d bias");
  for (std::size_t i = 0; i < x.count(); ++i) {
    const Index t = x.length(i);
    if (t < 1) throw SequenceTooShort("conv1d needs a non-empty sequence");
    if (k > 2 * t - 1) {
      throw ConfigError("conv1d kernel size " + std::to_string(k) + " exceeds 2T-1 for sequence of length " + std::to_string(t));
    }
  }
}

// Unfold every sequence into rows of k stacked input steps.
inline Matrix im2col(const Ragged& x, Index k) {
  const Index d = x.width();
  const Index half = k / 2;
  Matrix cols = Matrix::Zero(x.total_steps(), k * d);
  for (std::size_t s = 0; s < x.count(); ++s) {
    const Index begin = x.starts[s];
    const Index len = x.length(s);
    for (Index t = 0; t < len; ++t) {
      for (Index j = 0; j < k; ++j) {
        const Index src = t + j - half;
        if (src < 0 || src >= len) continue;
        cols.block(begin + t, j * d, 1, d) = x.data.row(begin + src);
      }
    }
  }
  return cols;
}

inline Ragged col2im(const Matrix& cols, const std::vector<Index>& starts, Index d, Index k) {
  const Index half = k / 2;
  Ragged out;
  out.starts = starts;
  out.data = Matrix::Zero(starts.back(), d);
  for (std::size_t s = 0; s + 1 < starts.size(); ++s) {
    const Index begin = starts[s];
    const Index len = starts[s + 1] - begin;
    for (Index t = 0; t < len; ++t) {
      for (Index j = 0; j < k; ++j) {
        const Index src = t + j - half;
        if (src < 0 || src >= len) continue;
        out.data.row(begin + src) += cols.block(begin + t, j * d, 1, d);
      }
    }
  }
  return out;
}

struct ConvResult {
  Ragged output;
  Matrix columns;  // cached im2col of the input
};

inline ConvResult conv1d_forward(const Ragged& x, const Matrix& kernels, const Matrix& bias, Index k) {
  check_conv(x, kernels, bias, k);
  ConvResult r;
  r.columns = im2col(x, k);
  r.output.starts = x.starts;
  r.output.data.resize(x.total_steps(), kernels.rows());
  r.output.data.noalias() = r.columns * kernels.transpose();
  r.output.data.rowwise() += bias.row(0);
  return r;
}

// Single-sequence convenience overload.
inline Matrix conv1d_forward(const Matrix& x, const Matrix& kernels, const Matrix& bias, Index k) {
  return conv1d_forward(Ragged::stack({&x}), kernels, bias, k).output.data;
}

struct ConvGrads {
  Ragged dx;
  Matrix dkernels;
  Matrix dbias;
};

inline ConvGrads conv1d_backward(const Matrix& columns, const std::vector<Index>& starts, Index d_in, const Matrix& kernels,
                                 Index k, const Matrix& dy) {
  ConvGrads g;
  g.dkernels.noalias() = dy.transpose() * columns;
  g.dbias = dy.colwise().sum();
  Matrix dcols(dy.rows(), kernels.cols());
  dcols.noalias() = dy * kernels;
  g.dx = col2im(dcols, starts, d_in, k);
  return g;
}

// ---------------------------------------------------------------------------
// BatchNorm over channels; statistics pooled over all rows (batch x time).
// ---------------------------------------------------------------------------

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

struct BatchNormCache {
  Matrix xhat;
  Matrix inv_std;  // 1 x C
  bool batch_stats = false;
};

struct BatchNormResult {
  Matrix y;
  BatchNormCache cache;
};

// Normalizes with the batch statistics. When update_running is set the
// running mean/var move with momentum 0.1 (variance stored unbiased).
inline BatchNormResult batchnorm_train_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                                               Matrix& running_mean, Matrix& running_var, bool update_running = true) {
  require_shape(gamma, 1, x.cols(), "batchnorm gamma");
  require_shape(beta, 1, x.cols(), "batchnorm beta");
  const Index n = x.rows();
  if (n < 2) throw ConfigError("batchnorm in train mode needs at least 2 samples per channel, got " + std::to_string(n));
  const Matrix mean = x.colwise().mean();
  Matrix centered = x.rowwise() - mean.row(0);
  const Matrix var = centered.array().square().colwise().sum().matrix() / static_cast<double>(n);
  BatchNormResult r;
  r.cache.batch_stats = true;
  r.cache.inv_std = (var.array() + kBatchNormEps).rsqrt().matrix();
  r.cache.xhat = centered.array().rowwise() * r.cache.inv_std.row(0).array();
  r.y = (r.cache.xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
  if (update_running) {
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    running_mean = (1.0 - kBatchNormMomentum) * running_mean + kBatchNormMomentum * mean;
    running_var = (1.0 - kBatchNormMomentum) * running_var + kBatchNormMomentum * unbias * var;
  }
  return r;
}

inline BatchNormResult batchnorm_eval_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                                              const Matrix& running_mean, const Matrix& running_var) {
  require_shape(gamma, 1, x.cols(), "batchnorm gamma");
  require_shape(beta, 1, x.cols(), "batchnorm beta");
  require_shape(running_mean, 1, x.cols(), "batchnorm running mean");
  require_shape(running_var, 1, x.cols(), "batchnorm running var");
  BatchNormResult r;
  r.cache.batch_stats = false;
  r.cache.inv_std = (running_var.array() + kBatchNormEps).rsqrt().matrix();
  r.cache.xhat = (x.rowwise() - running_mean.row(0)).array().rowwise() * r.cache.inv_std.row(0).array();
  r.y = (r.cache.xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
  return r;
}

struct BatchNormGrads {
  Matrix dx;
  Matrix dgamma;
  Matrix dbeta;
};

inline BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Matrix& gamma, const Matrix& dy) {
  BatchNormGrads g;
  g.dbeta = dy.colwise().sum();
  g.dgamma = (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  const Matrix dxhat = dy.array().rowwise() * gamma.row(0).array();
  if (!cache.batch_stats) {
    g.dx = dxhat.array().rowwise() * cache.inv_std.row(0).array();
    return g;
  }
  const double n = static_cast<double>(dy.rows());
  const Matrix sum_dxhat = dxhat.colwise().sum();
  const Matrix sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).colwise().sum().matrix();
  Matrix inner = (n * dxhat.array()) - (cache.xhat.array().rowwise() * sum_dxhat_xhat.row(0).array());
  inner.rowwise() -= sum_dxhat.row(0);
  g.dx = (inner.array().rowwise() * cache.inv_std.row(0).array()) / n;
  return g;
}

// ---------------------------------------------------------------------------
// MaxPool1d, window 2, stride 2, per sequence. A trailing odd step is
// dropped; ties resolve to the first index.
// ---------------------------------------------------------------------------

using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PoolResult {
  Ragged output;
  IndexMatrix argmax;  // absolute input row of each output element
};

inline PoolResult maxpool1d_forward(const Ragged& x) {
  PoolResult r;
  Index total = 0;
  for (std::size_t s = 0; s < x.count(); ++s) {
    if (x.length(s) < 2) throw SequenceTooShort("maxpool needs at least 2 steps, got " + std::to_string(x.length(s)));
    total += x.length(s) / 2;
    r.output.starts.push_back(total);
  }
  r.output.data.resize(total, x.width());
  r.argmax.resize(total, x.width());
  for (std::size_t s = 0; s < x.count(); ++s) {
    const Index in0 = x.starts[s];
    const Index out0 = r.output.starts[s];
    const Index len = x.length(s) / 2;
    for (Index t = 0; t < len; ++t) {
      const Index a = in0 + 2 * t;
      const Index b = a + 1;
      for (Index c = 0; c < x.width(); ++c) {
        const bool first = x.data(a, c) >= x.data(b, c);
        r.output.data(out0 + t, c) = first ? x.data(a, c) : x.data(b, c);
        r.argmax(out0 + t, c) = first ? a : b;
      }
    }
  }
  return r;
}

inline Matrix maxpool1d_forward(const Matrix& x) { return maxpool1d_forward(Ragged::stack({&x})).output.data; }

inline Matrix maxpool1d_backward(const IndexMatrix& argmax, Index input_rows, const Matrix& dy) {
  Matrix dx = Matrix::Zero(input_rows, dy.cols());
  for (Index r = 0; r < dy.rows(); ++r) {
    for (Index c = 0; c < dy.cols(); ++c) dx(argmax(r, c), c) += dy(r, c);
  }
  return dx;
}

}  // namespace divine
