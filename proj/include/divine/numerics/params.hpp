#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "divine/numerics/tensor.hpp"

namespace divine {

// A named parameter tensor with its gradient accumulator. Non-trainable
// entries (batchnorm running statistics) live here too so that checkpoints
// capture the full model state.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

// Ordered parameter registry. Handles are stable indices.
class ParamSet {
 public:
  std::size_t add(std::string name, Matrix init, bool trainable = true) {
    for (const auto& p : params_) {
      if (p.name == name) throw InvariantViolation("duplicate parameter name: " + name);
    }
    Param p{std::move(name), std::move(init), Matrix(), trainable};
    p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    params_.push_back(std::move(p));
    return params_.size() - 1;
  }

  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }

  Matrix& value(std::size_t i) { return params_[i].value; }
  const Matrix& value(std::size_t i) const { return params_[i].value; }
  Matrix& grad(std::size_t i) { return params_[i].grad; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return i;
    }
    throw InvariantViolation("no parameter named " + name);
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::size_t trainable_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) {
      if (p.trainable) n += static_cast<std::size_t>(p.value.size());
    }
    return n;
  }

  // Values only; used for best-epoch snapshots.
  std::vector<Matrix> snapshot() const {
    std::vector<Matrix> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
  }

  void restore(const std::vector<Matrix>& values) {
    if (values.size() != params_.size()) throw InvariantViolation("snapshot size mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].value = values[i];
  }

 private:
  std::vector<Param> params_;
};

// Glorot-uniform in +-sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(Index rows, Index cols, Index fan_in, Index fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

inline Matrix dense_weight(Index out, Index in, std::mt19937_64& rng) { return glorot_uniform(out, in, in, out, rng); }

// Encoder producing [mu | logvar]: the logvar rows start at zero so the
// initial posterior variance is exactly 1.
inline Matrix gaussian_encoder_weight(Index latent, Index in, std::mt19937_64& rng) {
  Matrix w = glorot_uniform(2 * latent, in, in, 2 * latent, rng);
  w.bottomRows(latent).setZero();
  return w;
}

inline Matrix zero_bias(Index n) { return Matrix::Zero(1, n); }

}  // namespace divine
