#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "divine/model/network.hpp"
#include "divine/numerics/adam.hpp"
#include "divine/numerics/grad_check.hpp"
#include "divine/train_eval/metrics.hpp"

namespace divine {

struct TrainConfig {
  double lr = 1e-3;
  int batch = 32;
  int max_epochs = 50;
  int patience = 5;
  std::uint64_t seed = 0;
  double alpha = 2.0;
  double epsilon = 0.1;
  double lambda = 0.4;
  double dropout = 0.1;
  bool no_cycle = false;
  bool no_sparse = false;
  bool no_token = false;
  bool flat = false;
  bool single_level = false;
  Modality modality = Modality::both;  // evaluation mode used by single-mode consumers

  void validate() const {
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (lr < 0 || alpha < 0 || epsilon < 0 || lambda < 0) throw ConfigError("learning rate and loss coefficients must be >= 0");
    if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must be in [0, 1)");
    if (flat && single_level) throw ConfigError("--flat and --single-level are mutually exclusive");
  }

  // Loss coefficients and per-term switches implied by this config.
  LossConfig loss(TokenWeightMode mode = TokenWeightMode::literal) const {
    LossConfig c;
    c.alpha = alpha;
    c.epsilon = epsilon;
    c.lambda = lambda;
    c.token_mode = mode;
    c.use_cycle = !no_cycle;
    c.use_sparse = !no_sparse;
    c.use_token = !no_token;
    return c;
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, lr, batch, max_epochs, patience, seed, alpha, epsilon, lambda, dropout,
                                                no_cycle, no_sparse, no_token, flat, single_level, modality)

// Training stopped on a non-finite loss; carries the last finite breakdown.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, LossBreakdown last_finite, int epoch)
      : NumericalError(what), last_finite_(last_finite), epoch_(epoch) {}
  const LossBreakdown& last_finite() const noexcept { return last_finite_; }
  int epoch() const noexcept { return epoch_; }

 private:
  LossBreakdown last_finite_;
  int epoch_;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;  // mean over the epoch's batches
  LossBreakdown val;    // eval mode, both modalities
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EpochRecord, epoch, train, val)

struct TrainResult {
  std::vector<EpochRecord> curves;
  int best_epoch = 0;
  double best_val = 0.0;
  int epochs_run = 0;
  bool stopped_early = false;
};

inline nlohmann::json to_json(const TrainResult& r) {
  return {{"curves", r.curves}, {"best_epoch", r.best_epoch}, {"best_val", r.best_val}, {"epochs_run", r.epochs_run},
          {"stopped_early", r.stopped_early}};
}

// Accumulates a size-weighted mean of loss breakdowns.
class LossMean {
 public:
  void add(const LossBreakdown& l, std::size_t n) {
    const double w = static_cast<double>(n);
    sum_.cls += w * l.cls;
    sum_.sev += w * l.sev;
    sum_.cycle += w * l.cycle;
    sum_.sparse += w * l.sparse;
    sum_.token += w * l.token;
    sum_.window_v += w * l.window_v;
    sum_.window_a += w * l.window_a;
    sum_.utter_v += w * l.utter_v;
    sum_.utter_a += w * l.utter_a;
    sum_.total += w * l.total;
    sum_.alpha = l.alpha;
    sum_.epsilon = l.epsilon;
    sum_.lambda = l.lambda;
    n_ += w;
  }

  LossBreakdown mean() const {
    LossBreakdown m = sum_;
    if (n_ == 0) return m;
    for (double* v : {&m.cls, &m.sev, &m.cycle, &m.sparse, &m.token, &m.window_v, &m.window_a, &m.utter_v, &m.utter_a, &m.total}) {
      *v /= n_;
    }
    return m;
  }

 private:
  LossBreakdown sum_;
  double n_ = 0.0;
};

struct EvalOutput {
  Matrix cls_probs;
  Matrix sev_probs;
  LossBreakdown losses;  // size-weighted mean over batches
};

// Eval-mode forward over `indices` in chunks; predictions are per clip so
// chunking does not change them.
inline EvalOutput predict(Network& net, const Dataset& ds, const std::vector<std::size_t>& indices, const ForwardOptions& opts,
                          std::size_t chunk = 64) {
  if (indices.empty()) throw ConfigError("cannot evaluate an empty split");
  EvalOutput out;
  std::vector<Matrix> cls, sev;
  LossMean mean;
  for (std::size_t at = 0; at < indices.size(); at += chunk) {
    const std::size_t n = std::min(chunk, indices.size() - at);
    const Batch b = make_batch(ds, std::span<const std::size_t>(indices.data() + at, n));
    Prediction p = net.forward(b, opts);
    mean.add(p.losses, n);
    cls.push_back(std::move(p.cls_probs));
    sev.push_back(std::move(p.sev_probs));
  }
  auto vstack = [](const std::vector<Matrix>& parts) {
    Index rows = 0;
    for (const auto& m : parts) rows += m.rows();
    Matrix out(rows, parts.front().cols());
    Index r = 0;
    for (const auto& m : parts) {
      out.middleRows(r, m.rows()) = m;
      r += m.rows();
    }
    return out;
  };
  out.cls_probs = vstack(cls);
  out.sev_probs = vstack(sev);
  out.losses = mean.mean();
  return out;
}

inline MetricsReport evaluate(Network& net, const Dataset& ds, const std::vector<std::size_t>& indices, const ForwardOptions& opts) {
  const EvalOutput e = predict(net, ds, indices, opts);
  std::vector<int> labels;
  std::vector<double> targets;
  for (std::size_t i : indices) {
    labels.push_back(ds.clips[i].diagnosis);
    targets.push_back(ds.target_score(ds.clips[i]));
  }
  return compute_metrics(e.cls_probs, labels, e.sev_probs, targets, ds.manifest.severity_scores());
}

// Per-batch noise/dropout stream derived from (seed, epoch, batch).
inline std::uint64_t step_seed(std::uint64_t seed, int epoch, std::size_t batch) {
  return hash_combine(hash_combine(hash_combine(0x243f6a8885a308d3ULL, seed), static_cast<std::uint64_t>(epoch)), batch);
}

// Mini-batch Adam on L_total with validation early stopping. On return the
// network holds the parameters of the best validation epoch.
inline TrainResult train(Network& net, const Dataset& ds, const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& val_idx,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (train_idx.empty()) throw ConfigError("training split is empty");
  if (val_idx.empty()) throw ConfigError("validation split is empty");

  AdamState adam;
  adam.lr = cfg.lr;
  std::mt19937_64 shuffle_rng(hash_combine(cfg.seed, 0x5eed));
  std::vector<std::size_t> order = train_idx;

  TrainResult result;
  std::vector<Matrix> best = net.params().snapshot();
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  LossBreakdown last_finite;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    LossMean train_mean;
    const std::size_t bs = static_cast<std::size_t>(cfg.batch);
    for (std::size_t at = 0, bi = 0; at < order.size(); at += bs, ++bi) {
      const std::size_t n = std::min(bs, order.size() - at);
      const Batch b = make_batch(ds, std::span<const std::size_t>(order.data() + at, n));
      Prediction p;
      try {
        p = net.forward_backward(b, ForwardOptions::train(step_seed(cfg.seed, epoch, bi), cfg.dropout));
      } catch (const NumericalError& e) {
        throw TrainingDiverged(std::string("training diverged in epoch ") + std::to_string(epoch) + ": " + e.what(), last_finite, epoch);
      }
      if (!std::isfinite(p.losses.total)) {
        throw TrainingDiverged("non-finite L_total in epoch " + std::to_string(epoch), last_finite, epoch);
      }
      last_finite = p.losses;
      try {
        adam_step(net.params(), adam);
      } catch (const NumericalError& e) {
        throw TrainingDiverged(std::string("training diverged in epoch ") + std::to_string(epoch) + ": " + e.what(), last_finite, epoch);
      }
      train_mean.add(p.losses, n);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = train_mean.mean();
    rec.val = predict(net, ds, val_idx, ForwardOptions::eval(Modality::both)).losses;
    result.curves.push_back(rec);
    result.epochs_run = epoch;
    if (!std::isfinite(rec.val.total)) throw TrainingDiverged("non-finite validation L_total in epoch " + std::to_string(epoch), last_finite, epoch);

    if (rec.val.total < best_val) {
      best_val = rec.val.total;
      best = net.params().snapshot();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      result.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  net.params().restore(best);
  result.best_val = best_val;
  return result;
}

}  // namespace divine
