#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "divine/model/network.hpp"
#include "divine/numerics/layers.hpp"
#include "divine/numerics/losses.hpp"

namespace divine {

enum class BaselineKind { fcn, cnn, concat };
enum class Task { classification, regression, multitask };

NLOHMANN_JSON_SERIALIZE_ENUM(BaselineKind, {{BaselineKind::fcn, "fcn"}, {BaselineKind::cnn, "cnn"}, {BaselineKind::concat, "concat"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Task, {{Task::classification, "classification"}, {Task::regression, "regression"}, {Task::multitask, "multitask"}})

struct BaselineConfig {
  BaselineKind kind = BaselineKind::fcn;
  Modality input = Modality::video_only;  // fcn/cnn: which stream feeds the head
  Index d_v = 64;
  Index d_a = 64;
  Index fixed_steps = 32;  // cnn: sequences cropped / zero-padded to this length before flattening
  std::vector<Index> hidden{256, 128, 64};
  Index conv1_filters = 256;
  Index conv2_filters = 128;
  Index kernel = 3;
  Index n_classes = 3;
  Index n_severity = 4;
  Task task = Task::multitask;

  void validate() const {
    if (kind != BaselineKind::concat && input == Modality::both) throw ConfigError("fcn/cnn baselines take a single modality");
    if (kind == BaselineKind::cnn && fixed_steps < 4) throw ConfigError("cnn baseline needs fixed_steps >= 4");
    if (hidden.empty()) throw ConfigError("baseline needs at least one hidden layer");
    if (n_classes < 2 || n_severity < 2) throw ConfigError("heads need >= 2 outputs");
  }

  Index input_dim() const {
    switch (kind) {
      case BaselineKind::concat: return d_v + d_a;
      case BaselineKind::fcn: return input == Modality::audio_only ? d_a : d_v;
      case BaselineKind::cnn: return (fixed_steps / 4) * conv2_filters;
    }
    return 0;
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BaselineConfig, kind, input, d_v, d_a, fixed_steps, hidden, conv1_filters,
                                                conv2_filters, kernel, n_classes, n_severity, task)

// Closed-form trainable parameter count of the dense stack plus both heads.
inline std::size_t fcn_parameter_count(Index d_in, const std::vector<Index>& hidden, Index n_classes, Index n_severity) {
  std::size_t n = 0;
  Index prev = d_in;
  for (Index h : hidden) {
    n += static_cast<std::size_t>(prev * h + h);
    prev = h;
  }
  n += static_cast<std::size_t>(prev * n_classes + n_classes + prev * n_severity + n_severity);
  return n;
}

// Unimodal FCN / CNN heads and simple concatenation fusion.
class BaselineNetwork : public Network {
 public:
  BaselineNetwork(BaselineConfig cfg, LossConfig loss, std::uint64_t init_seed) : cfg_(std::move(cfg)), loss_(loss) {
    cfg_.validate();
    std::mt19937_64 rng(init_seed);
    if (cfg_.kind == BaselineKind::cnn) {
      const Index d_in = cfg_.input == Modality::audio_only ? cfg_.d_a : cfg_.d_v;
      conv_.push_back(make_conv("cnn/block1", d_in, cfg_.conv1_filters, rng));
      conv_.push_back(make_conv("cnn/block2", cfg_.conv1_filters, cfg_.conv2_filters, rng));
    }
    Index prev = cfg_.input_dim();
    for (std::size_t i = 0; i < cfg_.hidden.size(); ++i) {
      const std::string p = "fcn/dense" + std::to_string(i + 1);
      dense_w_.push_back(params_.add(p + "_w", dense_weight(cfg_.hidden[i], prev, rng)));
      dense_b_.push_back(params_.add(p + "_b", zero_bias(cfg_.hidden[i])));
      prev = cfg_.hidden[i];
    }
    cls_w_ = params_.add("head/cls_w", dense_weight(cfg_.n_classes, prev, rng));
    cls_b_ = params_.add("head/cls_b", zero_bias(cfg_.n_classes));
    sev_w_ = params_.add("head/sev_w", dense_weight(cfg_.n_severity, prev, rng));
    sev_b_ = params_.add("head/sev_b", zero_bias(cfg_.n_severity));
  }

  std::string kind() const override { return nlohmann::json(cfg_.kind).get<std::string>(); }
  const BaselineConfig& config() const { return cfg_; }
  const LossConfig& loss_config() const override { return loss_; }
  void set_loss_config(const LossConfig& c) override { loss_ = c; }
  nlohmann::json config_json() const override { return {{"kind", kind()}, {"baseline", cfg_}, {"loss", loss_}}; }

  bool supports(Modality m) const override {
    if (cfg_.kind == BaselineKind::concat) return true;
    return m == Modality::both || m == cfg_.input;
  }

  Prediction forward(const Batch& batch, const ForwardOptions& opts) override {
    if (batch.size() == 0) throw ConfigError("empty batch");
    if (!supports(opts.modality)) {
      throw UnsupportedConfiguration(kind() + " baseline on " + to_string(cfg_.input) + " cannot be evaluated in mode " + to_string(opts.modality));
    }
    cache_ = Cache{};
    Matrix x = input_features(batch, opts);
    for (std::size_t i = 0; i < dense_w_.size(); ++i) {
      cache_.dense_in.push_back(x);
      Matrix pre = dense_forward(x, params_.value(dense_w_[i]), params_.value(dense_b_[i]));
      cache_.dense_pre.push_back(pre);
      x = relu(pre);
    }
    cache_.head_in = x;
    Prediction p;
    p.cls_probs = softmax(dense_forward(x, params_.value(cls_w_), params_.value(cls_b_)));
    p.sev_probs = softmax(dense_forward(x, params_.value(sev_w_), params_.value(sev_b_)));
    cache_.cls_probs = p.cls_probs;
    cache_.sev_probs = p.sev_probs;
    p.losses.alpha = loss_.alpha;
    p.losses.epsilon = loss_.epsilon;
    p.losses.lambda = loss_.lambda;
    p.losses.cls = cross_entropy(p.cls_probs, batch.diagnosis);
    p.losses.sev = cross_entropy(p.sev_probs, batch.severity);
    const auto [wc, ws] = task_weights();
    p.losses.total = wc * p.losses.cls + ws * p.losses.sev;
    return p;
  }

  Prediction forward_backward(const Batch& batch, const ForwardOptions& opts) override {
    Prediction p = forward(batch, opts);
    params_.zero_grad();
    const auto [wc, ws] = task_weights();
    const SoftmaxCE ce_c = softmax_cross_entropy(cache_.cls_probs, batch.diagnosis, wc);
    const SoftmaxCE ce_s = softmax_cross_entropy(cache_.sev_probs, batch.severity, ws);
    DenseGrads gc = dense_backward(cache_.head_in, params_.value(cls_w_), ce_c.dlogits);
    DenseGrads gs = dense_backward(cache_.head_in, params_.value(sev_w_), ce_s.dlogits);
    params_.grad(cls_w_) += gc.dw;
    params_.grad(cls_b_) += gc.db;
    params_.grad(sev_w_) += gs.dw;
    params_.grad(sev_b_) += gs.db;
    Matrix d = gc.dx + gs.dx;
    for (std::size_t i = dense_w_.size(); i-- > 0;) {
      d = relu_backward(cache_.dense_pre[i], d);
      DenseGrads g = dense_backward(cache_.dense_in[i], params_.value(dense_w_[i]), d);
      params_.grad(dense_w_[i]) += g.dw;
      params_.grad(dense_b_[i]) += g.db;
      d = std::move(g.dx);
    }
    if (cfg_.kind == BaselineKind::cnn) {
      // flatten -> last pooled block
      Matrix dp(cache_.conv.back().pooled.total_steps(), cfg_.conv2_filters);
      const Index steps = cfg_.fixed_steps / 4;
      for (Index b = 0; b < d.rows(); ++b) {
        for (Index t = 0; t < steps; ++t) dp.row(b * steps + t) = d.block(b, t * cfg_.conv2_filters, 1, cfg_.conv2_filters);
      }
      for (std::size_t i = conv_.size(); i-- > 0;) {
        const ConvCache& c = cache_.conv[i];
        const ConvBlock& blk = conv_[i];
        const Matrix d_act = maxpool1d_backward(c.argmax, c.bn_out.rows(), dp);
        const Matrix d_bn = relu_backward(c.bn_out, d_act);
        BatchNormGrads gb = batchnorm_backward(c.bn, params_.value(blk.gamma), d_bn);
        params_.grad(blk.gamma) += gb.dgamma;
        params_.grad(blk.beta) += gb.dbeta;
        ConvGrads gcv = conv1d_backward(c.columns, c.starts, c.width, params_.value(blk.w), cfg_.kernel, gb.dx);
        params_.grad(blk.w) += gcv.dkernels;
        params_.grad(blk.b) += gcv.dbias;
        dp = std::move(gcv.dx.data);
      }
    }
    return p;
  }

 private:
  struct ConvBlock {
    std::size_t w, b, gamma, beta, mean, var, updates;
  };
  struct ConvCache {
    std::vector<Index> starts;
    Index width = 0;
    Matrix columns;
    BatchNormCache bn;
    Matrix bn_out;
    IndexMatrix argmax;
    Ragged pooled;
  };
  struct Cache {
    std::vector<ConvCache> conv;
    std::vector<Matrix> dense_in, dense_pre;
    Matrix head_in, cls_probs, sev_probs;
  };

  std::pair<double, double> task_weights() const {
    switch (cfg_.task) {
      case Task::classification: return {1.0, 0.0};
      case Task::regression: return {0.0, 1.0};
      case Task::multitask: return {1.0, loss_.alpha};
    }
    return {1.0, loss_.alpha};
  }

  ConvBlock make_conv(const std::string& p, Index d_in, Index d_out, std::mt19937_64& rng) {
    const Index k = cfg_.kernel;
    ConvBlock b{};
    b.w = params_.add(p + "/conv_w", glorot_uniform(d_out, k * d_in, k * d_in, k * d_out, rng));
    b.b = params_.add(p + "/conv_b", zero_bias(d_out));
    b.gamma = params_.add(p + "/bn_gamma", Matrix::Ones(1, d_out));
    b.beta = params_.add(p + "/bn_beta", zero_bias(d_out));
    b.mean = params_.add(p + "/bn_running_mean", zero_bias(d_out), false);
    b.var = params_.add(p + "/bn_running_var", Matrix::Ones(1, d_out), false);
    b.updates = params_.add(p + "/bn_updates", Matrix::Zero(1, 1), false);
    return b;
  }

  static Matrix mean_or_zero(const Batch& batch, bool video, Index dim, bool present) {
    Matrix m = Matrix::Zero(static_cast<Index>(batch.size()), dim);
    if (!present) return m;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto* c = batch.clips[i];
      if (!video && !c->audio) throw ConfigError("clip " + c->clip_id + " has no audio");
      const Matrix& x = video ? c->video : *c->audio;
      m.row(static_cast<Index>(i)) = x.colwise().mean();
    }
    return m;
  }

  Matrix input_features(const Batch& batch, const ForwardOptions& opts) {
    const Index nb = static_cast<Index>(batch.size());
    if (cfg_.kind == BaselineKind::concat) {
      Matrix x(nb, cfg_.d_v + cfg_.d_a);
      x << mean_or_zero(batch, true, cfg_.d_v, opts.modality != Modality::audio_only),
          mean_or_zero(batch, false, cfg_.d_a, opts.modality != Modality::video_only);
      return x;
    }
    const bool video = cfg_.input != Modality::audio_only;
    if (cfg_.kind == BaselineKind::fcn) return mean_or_zero(batch, video, video ? cfg_.d_v : cfg_.d_a, true);

    // cnn: fixed-length crops, two conv blocks, flatten
    const Index steps = cfg_.fixed_steps;
    const Index d_in = video ? cfg_.d_v : cfg_.d_a;
    Ragged x;
    x.data = Matrix::Zero(nb * steps, d_in);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto* c = batch.clips[i];
      if (!video && !c->audio) throw ConfigError("clip " + c->clip_id + " has no audio");
      const Matrix& s = video ? c->video : *c->audio;
      const Index n = std::min(steps, s.rows());
      x.data.middleRows(static_cast<Index>(i) * steps, n) = s.topRows(n);
      x.starts.push_back(static_cast<Index>(i + 1) * steps);
    }
    const bool batch_stats = opts.phase == Phase::train && !opts.freeze_batchnorm;
    for (const ConvBlock& blk : conv_) {
      ConvCache c;
      c.starts = x.starts;
      c.width = x.width();
      ConvResult conv = conv1d_forward(x, params_.value(blk.w), params_.value(blk.b), cfg_.kernel);
      c.columns = std::move(conv.columns);
      BatchNormResult bn = batch_stats ? batchnorm_train_forward(conv.output.data, params_.value(blk.gamma), params_.value(blk.beta),
                                                                 params_.value(blk.mean), params_.value(blk.var))
                                       : batchnorm_eval_forward(conv.output.data, params_.value(blk.gamma), params_.value(blk.beta),
                                                                params_.value(blk.mean), params_.value(blk.var));
      if (batch_stats) params_.value(blk.updates)(0, 0) += 1.0;
      c.bn = std::move(bn.cache);
      c.bn_out = std::move(bn.y);
      PoolResult pool = maxpool1d_forward(Ragged{relu(c.bn_out), x.starts});
      c.argmax = std::move(pool.argmax);
      c.pooled = pool.output;
      x = std::move(pool.output);
      cache_.conv.push_back(std::move(c));
    }
    const Index out_steps = steps / 4;
    Matrix flat(nb, out_steps * cfg_.conv2_filters);
    for (Index b = 0; b < nb; ++b) {
      for (Index t = 0; t < out_steps; ++t) flat.block(b, t * cfg_.conv2_filters, 1, cfg_.conv2_filters) = x.data.row(b * out_steps + t);
    }
    return flat;
  }

  BaselineConfig cfg_;
  LossConfig loss_;
  std::vector<ConvBlock> conv_;
  std::vector<std::size_t> dense_w_, dense_b_;
  std::size_t cls_w_ = 0, cls_b_ = 0, sev_w_ = 0, sev_b_ = 0;
  Cache cache_;
};

}  // namespace divine
