#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "divine/numerics/params.hpp"

namespace divine {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

// One bias-corrected Adam update over parallel lists of parameters and
// gradients. group_names is used in the NaN diagnostic only.
inline void adam_step(std::vector<Matrix*> params, const std::vector<const Matrix*>& grads, AdamState& state,
                      const std::vector<std::string>& group_names = {}) {
  if (params.size() != grads.size()) throw DimensionError("adam grads: count mismatch with params");
  auto name = [&](std::size_t i) { return i < group_names.size() ? group_names[i] : "#" + std::to_string(i); };
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols()) {
      throw DimensionError("adam grad for " + name(i) + ": shape mismatch");
    }
    if (!grads[i]->allFinite()) throw NumericalError("non-finite gradient in parameter group " + name(i));
  }
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam state: moment count mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
    const auto mhat = state.m[i].array() / c1;
    const auto vhat = state.v[i].array() / c2;
    params[i]->array() -= state.lr * mhat / (vhat.sqrt() + state.eps);
  }
}

// Updates every trainable entry of the set from its accumulated gradient.
inline void adam_step(ParamSet& params, AdamState& state) {
  std::vector<Matrix*> values;
  std::vector<const Matrix*> grads;
  std::vector<std::string> names;
  for (auto& p : params) {
    if (!p.trainable) continue;
    values.push_back(&p.value);
    grads.push_back(&p.grad);
    names.push_back(p.name);
  }
  adam_step(std::move(values), grads, state, names);
}

}  // namespace divine
