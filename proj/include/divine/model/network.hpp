#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "divine/data/dataset.hpp"
#include "divine/model/config.hpp"
#include "divine/numerics/params.hpp"

namespace divine {

// A mini-batch view over dataset clips plus their labels.
struct Batch {
  std::vector<const EmbeddingClip*> clips;
  std::vector<int> diagnosis;
  std::vector<int> severity;

  std::size_t size() const { return clips.size(); }
};

inline Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  Batch b;
  for (std::size_t i : indices) {
    const auto& c = ds.clips.at(i);
    b.clips.push_back(&c);
    b.diagnosis.push_back(c.diagnosis);
    b.severity.push_back(c.severity_level);
  }
  return b;
}

struct Prediction {
  Matrix cls_probs;
  Matrix sev_probs;
  LossBreakdown losses;
};

// Common surface of DIVINE and the baselines, used by the trainer,
// the checkpoint writer and the CLI.
class Network {
 public:
  virtual ~Network() = default;

  virtual std::string kind() const = 0;

  // In the train phase batchnorm running statistics may be updated.
  virtual Prediction forward(const Batch& batch, const ForwardOptions& opts) = 0;

  // Forward plus analytic backward of L_total; gradients are written into
  // params() (previous gradients are discarded).
  virtual Prediction forward_backward(const Batch& batch, const ForwardOptions& opts) = 0;

  virtual nlohmann::json config_json() const = 0;

  virtual const LossConfig& loss_config() const = 0;
  virtual void set_loss_config(const LossConfig& c) = 0;

  // Whether predictions for this modality mode are defined.
  virtual bool supports(Modality m) const = 0;

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 protected:
  ParamSet params_;
};

// Cross-entropy of softmax outputs (mean over rows) and the gradient with
// respect to the logits, scaled by `weight`.
struct SoftmaxCE {
  double loss = 0.0;
  Matrix dlogits;
};

inline SoftmaxCE softmax_cross_entropy(const Matrix& probs, const std::vector<int>& labels, double weight) {
  SoftmaxCE r;
  const Index n = probs.rows();
  r.dlogits = probs;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= probs.cols()) throw LabelError("label " + std::to_string(y) + " outside head range");
    r.loss -= std::log(std::clamp(probs(i, y), 1e-12, 1.0));
    r.dlogits(i, y) -= 1.0;
  }
  if (n > 0) {
    r.loss /= static_cast<double>(n);
    r.dlogits *= weight / static_cast<double>(n);
  }
  return r;
}

}  // namespace divine
