#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "divine/numerics/tensor.hpp"

namespace divine {

inline constexpr double kProbClamp = 1e-12;

// -sum target * log(clamp(probs)). target must be one-hot.
inline double cross_entropy(const Vector& probs, const Vector& target) {
  if (probs.size() != target.size()) throw DimensionError("cross_entropy target: length mismatch with probs");
  Index hot = -1;
  for (Index i = 0; i < target.size(); ++i) {
    if (target[i] == 1.0) {
      if (hot >= 0) throw LabelError("cross_entropy target is not one-hot (several ones)");
      hot = i;
    } else if (target[i] != 0.0) {
      throw LabelError("cross_entropy target is not one-hot (entry " + std::to_string(i) + ")");
    }
  }
  if (hot < 0) throw LabelError("cross_entropy target is not one-hot (no one)");
  if (std::abs(probs.sum() - 1.0) > 1e-6) throw DimensionError("cross_entropy probs do not sum to 1");
  return -std::log(std::clamp(probs[hot], kProbClamp, 1.0));
}

// Mean cross-entropy over rows of probs against class indices.
inline double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != probs.rows()) throw DimensionError("cross_entropy labels: count mismatch");
  double total = 0.0;
  for (Index r = 0; r < probs.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= probs.cols()) throw LabelError("cross_entropy label " + std::to_string(y) + " out of range");
    total -= std::log(std::clamp(probs(r, y), kProbClamp, 1.0));
  }
  return probs.rows() > 0 ? total / static_cast<double>(probs.rows()) : 0.0;
}

// KL(N(mu, exp(logvar)) || N(0, I)) = 0.5 sum(exp(logvar) + mu^2 - 1 - logvar).
template <typename A, typename B>
double gaussian_kl(const Eigen::MatrixBase<A>& mu, const Eigen::MatrixBase<B>& logvar) {
  return 0.5 * (logvar.array().exp() + mu.array().square() - 1.0 - logvar.array()).sum();
}

// Per-row KL for a batch of posteriors.
inline Vector gaussian_kl_rows(const Matrix& mu, const Matrix& logvar) {
  return (0.5 * (logvar.array().exp() + mu.array().square() - 1.0 - logvar.array())).rowwise().sum().matrix();
}

// Gradients of the (summed) KL with respect to mu and logvar.
inline Matrix gaussian_kl_grad_mu(const Matrix& mu) { return mu; }
inline Matrix gaussian_kl_grad_logvar(const Matrix& logvar) { return (0.5 * (logvar.array().exp() - 1.0)).matrix(); }

// z = mu + exp(0.5 logvar) * noise. The noise is treated as a constant.
template <typename A, typename B, typename C>
Matrix reparameterize(const Eigen::MatrixBase<A>& mu, const Eigen::MatrixBase<B>& logvar, const Eigen::MatrixBase<C>& noise) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) throw DimensionError("reparameterize logvar: shape mismatch with mu");
  if (mu.rows() != noise.rows() || mu.cols() != noise.cols()) throw DimensionError("reparameterize noise: shape mismatch with mu");
  return (mu.array() + (0.5 * logvar.array()).exp() * noise.array()).matrix();
}

// Gradients of a scalar through z = reparameterize(mu, logvar, noise).
struct ReparamGrads {
  Matrix dmu;
  Matrix dlogvar;
};

inline ReparamGrads reparameterize_backward(const Matrix& logvar, const Matrix& noise, const Matrix& dz) {
  return {dz, (dz.array() * 0.5 * (0.5 * logvar.array()).exp() * noise.array()).matrix()};
}

inline Matrix standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace divine
