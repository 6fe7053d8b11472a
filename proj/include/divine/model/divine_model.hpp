#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "divine/model/network.hpp"
#include "divine/numerics/grad_check.hpp"
#include "divine/numerics/layers.hpp"
#include "divine/numerics/losses.hpp"

namespace divine {

// Intermediate values of one modality branch for one batch.
struct ModalityTrace {
  bool present = false;
  std::vector<Index> input_starts;
  Index input_width = 0;

  // refiner: conv -> batchnorm -> relu -> maxpool
  Matrix conv_columns;
  BatchNormCache bn;
  Matrix bn_out;
  Ragged pooled;  // X'_m
  IndexMatrix pool_argmax;

  // window VAE, one row per refined step
  Matrix mu_w, logvar_w, noise_w, z_sig, recon_w;

  Matrix zbar;  // utterance input, one row per clip

  // utterance VAE
  Matrix mu_s, logvar_s, noise_s, z_shared;
  Matrix mu_p, logvar_p, noise_p, z_priv;
  Matrix utter_in;     // [z_shared | z_priv]
  Matrix utter_recon;  // reconstruction of zbar

  Matrix gate;  // g_m
};

struct ForwardTrace {
  ModalityTrace video;
  ModalityTrace audio;
  Matrix cycle_to_audio;  // D_a(z_shared^v)
  Matrix cycle_to_video;  // D_v(z_shared^a), symmetric mode
  Matrix fused;           // h_fused
  Matrix dropout_mask;
  Matrix fused_dropped;
  Matrix flat_in;      // flat architecture: [GAP(X'_v) | GAP(X'_a)]
  Matrix token_out;    // dense(T_k), K x d_s
  Matrix head_in;      // h
  Matrix cls_probs;
  Matrix sev_probs;
  bool bn_initial_stats = false;  // eval-time batchnorm ran on never-updated running statistics

  // Signature of every ReLU sign and pooling argmax; changes iff a
  // piecewise-linear kink was crossed.
  std::uint64_t activation_pattern() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const ModalityTrace* m : {&video, &audio}) {
      if (!m->present) continue;
      for (Index i = 0; i < m->bn_out.size(); ++i) h = hash_combine(h, m->bn_out.data()[i] > 0.0 ? 1u : 2u);
      for (Index i = 0; i < m->pool_argmax.size(); ++i) h = hash_combine(h, static_cast<std::uint64_t>(m->pool_argmax.data()[i]));
    }
    return h;
  }
};

// Handles of one modality's parameter groups.
struct BranchParams {
  std::size_t conv_w, conv_b, bn_gamma, bn_beta, bn_mean, bn_var, bn_updates;
  std::optional<std::size_t> win_enc_w, win_enc_b, win_dec_w, win_dec_b;
  std::optional<std::size_t> priv_w, priv_b, udec_w, udec_b;
  std::optional<std::size_t> gate_w, gate_b;
};

// The disentangled audio-visual network plus its two structural variants
// (flat fusion and single-level latent fusion), selected by config.arch.
class DivineModel : public Network {
 public:
  DivineModel(ModelConfig cfg, LossConfig loss, std::uint64_t init_seed) : cfg_(cfg), loss_(loss) {
    cfg_.validate();
    std::mt19937_64 rng(init_seed);
    video_ = make_branch("video", cfg_.d_v, rng);
    audio_ = make_branch("audio", cfg_.d_a, rng);
    const Index ds = cfg_.d_shared;
    if (cfg_.arch == Architecture::flat) {
      flat_w_ = params_.add("flat/w", dense_weight(ds, 2 * cfg_.d_refined, rng));
      flat_b_ = params_.add("flat/b", zero_bias(ds));
    } else {
      const Index du = utter_input_dim();
      shared_w_ = params_.add("shared/enc_w", gaussian_encoder_weight(ds, du, rng));
      shared_b_ = params_.add("shared/enc_b", zero_bias(2 * ds));
      for (BranchParams* b : {&video_, &audio_}) {
        const std::string p = b == &video_ ? "video" : "audio";
        b->priv_w = params_.add(p + "/private/enc_w", gaussian_encoder_weight(cfg_.d_private, du, rng));
        b->priv_b = params_.add(p + "/private/enc_b", zero_bias(2 * cfg_.d_private));
        b->udec_w = params_.add(p + "/utterance/dec_w", dense_weight(du, ds + cfg_.d_private, rng));
        b->udec_b = params_.add(p + "/utterance/dec_b", zero_bias(du));
        if (cfg_.sparse_gating) {
          b->gate_w = params_.add(p + "/gate/w", dense_weight(ds, cfg_.d_private, rng));
          b->gate_b = params_.add(p + "/gate/b", zero_bias(ds));
        }
      }
      cyc_a_w_ = params_.add("cycle/to_audio_w", dense_weight(ds, ds, rng));
      cyc_a_b_ = params_.add("cycle/to_audio_b", zero_bias(ds));
      if (cfg_.cycle == CycleMode::symmetric) {
        cyc_v_w_ = params_.add("cycle/to_video_w", dense_weight(ds, ds, rng));
        cyc_v_b_ = params_.add("cycle/to_video_b", zero_bias(ds));
      }
      tokens_ = params_.add("tokens/T", glorot_uniform(cfg_.n_tokens, ds, cfg_.n_tokens, ds, rng));
      tok_w_ = params_.add("tokens/dense_w", dense_weight(ds, ds, rng));
      tok_b_ = params_.add("tokens/dense_b", zero_bias(ds));
    }
    cls_w_ = params_.add("head/cls_w", dense_weight(cfg_.n_classes, ds, rng));
    cls_b_ = params_.add("head/cls_b", zero_bias(cfg_.n_classes));
    sev_w_ = params_.add("head/sev_w", dense_weight(cfg_.n_severity, ds, rng));
    sev_b_ = params_.add("head/sev_b", zero_bias(cfg_.n_severity));
  }

  std::string kind() const override {
    switch (cfg_.arch) {
      case Architecture::divine: return "divine";
      case Architecture::flat: return "flat";
      case Architecture::single_level: return "single_level";
    }
    return "divine";
  }

  const ModelConfig& config() const { return cfg_; }
  const LossConfig& loss_config() const override { return loss_; }
  void set_loss_config(const LossConfig& c) override { loss_ = c; }

  nlohmann::json config_json() const override {
    return {{"kind", kind()}, {"model", cfg_}, {"loss", loss_}};
  }

  // Every mode is defined; audio-only with an asymmetric cycle falls back to
  // z_shared^v := z_shared^a unless ForwardOptions::strict is set.
  bool supports(Modality) const override { return true; }

  // The weight-tied shared encoder: both modalities read this one tensor.
  const Matrix& shared_encoder_weight(Modality /*m*/) const { return params_.value(*shared_w_); }

  // Per-modality contributions to the shared-encoder weight gradient from
  // the last backward pass (video, audio). Their sum is the stored gradient.
  const std::array<Matrix, 2>& shared_grad_contributions() const { return shared_grad_parts_; }

  const ForwardTrace& last_trace() const { return trace_; }

  Prediction forward(const Batch& batch, const ForwardOptions& opts) override {
    Prediction p;
    p.losses = run_forward(batch, opts);
    p.cls_probs = trace_.cls_probs;
    p.sev_probs = trace_.sev_probs;
    return p;
  }

  // Forward returning the full trace.
  std::pair<ForwardTrace, LossBreakdown> trace(const Batch& batch, const ForwardOptions& opts) {
    LossBreakdown l = run_forward(batch, opts);
    return {trace_, l};
  }

  Prediction forward_backward(const Batch& batch, const ForwardOptions& opts) override {
    if (opts.modality != Modality::both) throw UnsupportedConfiguration("backward pass requires both modalities");
    Prediction p = forward(batch, opts);
    params_.zero_grad();
    backward(batch);
    return p;
  }

 private:
  Index utter_input_dim() const { return cfg_.arch == Architecture::single_level ? cfg_.d_refined : cfg_.d_window; }

  BranchParams make_branch(const std::string& p, Index d_in, std::mt19937_64& rng) {
    BranchParams b{};
    const Index dr = cfg_.d_refined;
    const Index k = cfg_.kernel;
    b.conv_w = params_.add(p + "/refine/conv_w", glorot_uniform(dr, k * d_in, k * d_in, k * dr, rng));
    b.conv_b = params_.add(p + "/refine/conv_b", zero_bias(dr));
    b.bn_gamma = params_.add(p + "/refine/bn_gamma", Matrix::Ones(1, dr));
    b.bn_beta = params_.add(p + "/refine/bn_beta", zero_bias(dr));
    b.bn_mean = params_.add(p + "/refine/bn_running_mean", zero_bias(dr), false);
    b.bn_var = params_.add(p + "/refine/bn_running_var", Matrix::Ones(1, dr), false);
    b.bn_updates = params_.add(p + "/refine/bn_updates", Matrix::Zero(1, 1), false);
    if (cfg_.arch == Architecture::divine) {
      b.win_enc_w = params_.add(p + "/window/enc_w", gaussian_encoder_weight(cfg_.d_window, dr, rng));
      b.win_enc_b = params_.add(p + "/window/enc_b", zero_bias(2 * cfg_.d_window));
      b.win_dec_w = params_.add(p + "/window/dec_w", dense_weight(dr, cfg_.d_window, rng));
      b.win_dec_b = params_.add(p + "/window/dec_b", zero_bias(dr));
    }
    return b;
  }

  // ---------------------------------------------------------------- forward

  void refine(ModalityTrace& t, const BranchParams& b, const Ragged& x, const ForwardOptions& opts) {
    t.present = true;
    t.input_starts = x.starts;
    t.input_width = x.width();
    ConvResult conv = conv1d_forward(x, params_.value(b.conv_w), params_.value(b.conv_b), cfg_.kernel);
    t.conv_columns = std::move(conv.columns);
    BatchNormResult bn;
    const bool batch_stats = opts.phase == Phase::train && !opts.freeze_batchnorm;
    if (batch_stats) {
      bn = batchnorm_train_forward(conv.output.data, params_.value(b.bn_gamma), params_.value(b.bn_beta), params_.value(b.bn_mean),
                                   params_.value(b.bn_var));
      params_.value(b.bn_updates)(0, 0) += 1.0;
    } else {
      bn = batchnorm_eval_forward(conv.output.data, params_.value(b.bn_gamma), params_.value(b.bn_beta), params_.value(b.bn_mean),
                                  params_.value(b.bn_var));
      if (params_.value(b.bn_updates)(0, 0) == 0.0) trace_.bn_initial_stats = true;
    }
    t.bn = std::move(bn.cache);
    t.bn_out = std::move(bn.y);
    Ragged act{relu(t.bn_out), x.starts};
    PoolResult pool = maxpool1d_forward(act);
    t.pooled = std::move(pool.output);
    t.pool_argmax = std::move(pool.argmax);
  }

  Matrix noise_like(Index rows, Index cols, bool sample, std::mt19937_64& rng) const {
    return sample ? standard_normal(rows, cols, rng) : Matrix::Zero(rows, cols);
  }

  void window_vae(ModalityTrace& t, const BranchParams& b, bool sample, std::mt19937_64& rng) {
    const Index dw = cfg_.d_window;
    const Matrix enc = dense_forward(t.pooled.data, params_.value(*b.win_enc_w), params_.value(*b.win_enc_b));
    t.mu_w = enc.leftCols(dw);
    t.logvar_w = enc.rightCols(dw);
    t.noise_w = noise_like(enc.rows(), dw, sample, rng);
    t.z_sig = reparameterize(t.mu_w, t.logvar_w, t.noise_w);
    t.recon_w = dense_forward(t.z_sig, params_.value(*b.win_dec_w), params_.value(*b.win_dec_b));
    t.zbar = segment_mean(Ragged{t.z_sig, t.pooled.starts});
  }

  void utterance_vae(ModalityTrace& t, const BranchParams& b, bool sample, std::mt19937_64& rng) {
    const Index ds = cfg_.d_shared;
    const Index dp = cfg_.d_private;
    const Matrix es = dense_forward(t.zbar, params_.value(*shared_w_), params_.value(*shared_b_));
    t.mu_s = es.leftCols(ds);
    t.logvar_s = es.rightCols(ds);
    t.noise_s = noise_like(es.rows(), ds, sample, rng);
    t.z_shared = reparameterize(t.mu_s, t.logvar_s, t.noise_s);
    const Matrix ep = dense_forward(t.zbar, params_.value(*b.priv_w), params_.value(*b.priv_b));
    t.mu_p = ep.leftCols(dp);
    t.logvar_p = ep.rightCols(dp);
    t.noise_p = noise_like(ep.rows(), dp, sample, rng);
    t.z_priv = reparameterize(t.mu_p, t.logvar_p, t.noise_p);
    t.utter_in.resize(t.z_shared.rows(), ds + dp);
    t.utter_in << t.z_shared, t.z_priv;
    t.utter_recon = dense_forward(t.utter_in, params_.value(*b.udec_w), params_.value(*b.udec_b));
  }

  Matrix gate_of(const ModalityTrace& t, const BranchParams& b) const {
    return sigmoid(dense_forward(t.z_priv, params_.value(*b.gate_w), params_.value(*b.gate_b)));
  }

  static double window_loss(const ModalityTrace& t) {
    const Index n = static_cast<Index>(t.pooled.count());
    const Vector kl = gaussian_kl_rows(t.mu_w, t.logvar_w);
    const Vector rec = (t.pooled.data - t.recon_w).rowwise().squaredNorm();
    double total = 0.0;
    for (std::size_t i = 0; i < t.pooled.count(); ++i) {
      const Index s = t.pooled.starts[i];
      const Index len = t.pooled.length(i);
      total += (rec.segment(s, len).sum() + kl.segment(s, len).sum()) / static_cast<double>(len);
    }
    return n > 0 ? total / static_cast<double>(n) : 0.0;
  }

  double utterance_loss(const ModalityTrace& t) const {
    const double b = static_cast<double>(t.zbar.rows());
    const double rec = (t.zbar - t.utter_recon).squaredNorm();
    return (rec + cfg_.beta_shared * gaussian_kl(t.mu_s, t.logvar_s) + cfg_.beta_private * gaussian_kl(t.mu_p, t.logvar_p)) / b;
  }

  double token_loss() const {
    const Index k = cfg_.n_tokens;
    const Matrix mean_row = trace_.token_out.colwise().mean();
    const double b = static_cast<double>(trace_.fused_dropped.rows());
    const double rec = (trace_.fused_dropped.rowwise() - mean_row.row(0)).squaredNorm() / b;
    double decor = 0.0;
    if (k > 1) {
      for (Index i = 0; i < k; ++i) {
        for (Index j = i + 1; j < k; ++j) decor += std::pow(cosine(trace_.token_out.row(i), trace_.token_out.row(j)), 2);
      }
      decor *= 2.0 / static_cast<double>(k * (k - 1));
    }
    return rec + decor;
  }

  template <typename A, typename B>
  static double cosine(const A& a, const B& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
  }

  static Ragged stack_modality(const Batch& batch, bool video) {
    std::vector<const Matrix*> seqs;
    for (const auto* c : batch.clips) {
      if (video) {
        seqs.push_back(&c->video);
      } else {
        if (!c->audio) throw ConfigError("clip " + c->clip_id + " has no audio but audio was requested");
        seqs.push_back(&*c->audio);
      }
    }
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      if (seqs[i]->rows() < 2) {
        throw SequenceTooShort("clip " + batch.clips[i]->clip_id + ": " + (video ? "video" : "audio") + " has " +
                               std::to_string(seqs[i]->rows()) + " step(s), need >= 2");
      }
    }
    return Ragged::stack(seqs);
  }

  LossBreakdown run_forward(const Batch& batch, const ForwardOptions& opts) {
    if (batch.size() == 0) throw ConfigError("empty batch");
    trace_ = ForwardTrace{};
    const bool train = opts.phase == Phase::train;
    std::mt19937_64 rng(opts.seed);
    const bool use_v = opts.modality != Modality::audio_only;
    const bool use_a = opts.modality != Modality::video_only;
    const Index nb = static_cast<Index>(batch.size());
    const Index ds = cfg_.d_shared;

    if (opts.modality == Modality::audio_only && cfg_.arch != Architecture::flat && cfg_.cycle == CycleMode::asymmetric &&
        opts.strict) {
      throw UnsupportedConfiguration("audio-only inference needs an audio->video shared decoder; checkpoint uses asymmetric cycle");
    }

    if (use_v) refine(trace_.video, video_, stack_modality(batch, true), opts);
    if (use_a) refine(trace_.audio, audio_, stack_modality(batch, false), opts);

    LossBreakdown l;
    l.alpha = loss_.alpha;
    l.epsilon = loss_.epsilon;
    l.lambda = loss_.lambda;
    const LossWeights w = loss_weights(loss_);

    if (cfg_.arch == Architecture::flat) {
      const Index dr = cfg_.d_refined;
      trace_.flat_in = Matrix::Zero(nb, 2 * dr);
      if (use_v) trace_.flat_in.leftCols(dr) = segment_mean(trace_.video.pooled);
      if (use_a) trace_.flat_in.rightCols(dr) = segment_mean(trace_.audio.pooled);
      trace_.fused = dense_forward(trace_.flat_in, params_.value(*flat_w_), params_.value(*flat_b_));
      apply_dropout(opts, rng);
      trace_.head_in = trace_.fused_dropped;
    } else {
      for (auto [t, b, on] : {std::tuple{&trace_.video, &video_, use_v}, std::tuple{&trace_.audio, &audio_, use_a}}) {
        if (!on) continue;
        if (cfg_.arch == Architecture::divine) {
          window_vae(*t, *b, train, rng);
        } else {
          t->zbar = segment_mean(t->pooled);
        }
        utterance_vae(*t, *b, train, rng);
      }
      ModalityTrace& v = trace_.video;
      ModalityTrace& a = trace_.audio;
      if (use_v) trace_.cycle_to_audio = dense_forward(v.z_shared, params_.value(*cyc_a_w_), params_.value(*cyc_a_b_));
      if (use_a && cyc_v_w_) trace_.cycle_to_video = dense_forward(a.z_shared, params_.value(*cyc_v_w_), params_.value(*cyc_v_b_));

      // Missing-modality substitution: zero private latent, shared latent
      // imputed through the cross-modal decoder.
      if (!use_a) {
        a.z_priv = Matrix::Zero(nb, cfg_.d_private);
        a.z_shared = trace_.cycle_to_audio;
      }
      if (!use_v) {
        v.z_priv = Matrix::Zero(nb, cfg_.d_private);
        v.z_shared = cyc_v_w_ ? trace_.cycle_to_video : a.z_shared;
      }

      if (cfg_.sparse_gating) {
        v.gate = gate_of(v, video_);
        a.gate = gate_of(a, audio_);
      } else {
        v.gate = Matrix::Ones(nb, ds);
        a.gate = Matrix::Ones(nb, ds);
      }
      trace_.fused = v.gate.cwiseProduct(v.z_shared) + a.gate.cwiseProduct(a.z_shared);
      apply_dropout(opts, rng);
      trace_.token_out = dense_forward(params_.value(*tokens_), params_.value(*tok_w_), params_.value(*tok_b_));
      trace_.head_in = dense_forward(trace_.fused_dropped, params_.value(*tok_w_), params_.value(*tok_b_));

      if (use_v && cfg_.arch == Architecture::divine) l.window_v = window_loss(v);
      if (use_a && cfg_.arch == Architecture::divine) l.window_a = window_loss(a);
      if (use_v) l.utter_v = utterance_loss(v);
      if (use_a) l.utter_a = utterance_loss(a);
      if (use_v && use_a) {
        l.cycle = (trace_.cycle_to_audio - a.z_shared).squaredNorm() / static_cast<double>(nb);
        if (cyc_v_w_) l.cycle += (trace_.cycle_to_video - v.z_shared).squaredNorm() / static_cast<double>(nb);
      }
      if (cfg_.sparse_gating) l.sparse = (v.gate.sum() + a.gate.sum()) / (static_cast<double>(nb) * static_cast<double>(ds));
      l.token = token_loss();
    }

    trace_.cls_probs = softmax(dense_forward(trace_.head_in, params_.value(cls_w_), params_.value(cls_b_)));
    trace_.sev_probs = softmax(dense_forward(trace_.head_in, params_.value(sev_w_), params_.value(sev_b_)));
    l.cls = cross_entropy(trace_.cls_probs, batch.diagnosis);
    l.sev = cross_entropy(trace_.sev_probs, batch.severity);
    l.total = total_loss(l, w);
    return l;
  }

  void apply_dropout(const ForwardOptions& opts, std::mt19937_64& rng) {
    const Matrix& h = trace_.fused;
    if (opts.phase == Phase::train && opts.dropout > 0.0) {
      if (opts.dropout >= 1.0) throw ConfigError("dropout rate must be < 1");
      std::bernoulli_distribution keep(1.0 - opts.dropout);
      trace_.dropout_mask.resize(h.rows(), h.cols());
      const double scale = 1.0 / (1.0 - opts.dropout);
      for (Index i = 0; i < h.size(); ++i) trace_.dropout_mask.data()[i] = keep(rng) ? scale : 0.0;
    } else {
      trace_.dropout_mask = Matrix::Ones(h.rows(), h.cols());
    }
    trace_.fused_dropped = h.cwiseProduct(trace_.dropout_mask);
  }

  // --------------------------------------------------------------- backward

  void accumulate(std::size_t idx, const Matrix& g) { params_.grad(idx) += g; }

  void backward(const Batch& batch) {
    const LossWeights w = loss_weights(loss_);
    const ForwardTrace& tr = trace_;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const Index ds = cfg_.d_shared;

    // heads
    const SoftmaxCE ce_cls = softmax_cross_entropy(tr.cls_probs, batch.diagnosis, w.cls);
    const SoftmaxCE ce_sev = softmax_cross_entropy(tr.sev_probs, batch.severity, w.sev);
    DenseGrads gc = dense_backward(tr.head_in, params_.value(cls_w_), ce_cls.dlogits);
    DenseGrads gs = dense_backward(tr.head_in, params_.value(sev_w_), ce_sev.dlogits);
    accumulate(cls_w_, gc.dw);
    accumulate(cls_b_, gc.db);
    accumulate(sev_w_, gs.dw);
    accumulate(sev_b_, gs.db);
    const Matrix d_head = gc.dx + gs.dx;

    if (cfg_.arch == Architecture::flat) {
      const Matrix d_fused = d_head.cwiseProduct(tr.dropout_mask);
      DenseGrads gf = dense_backward(tr.flat_in, params_.value(*flat_w_), d_fused);
      accumulate(*flat_w_, gf.dw);
      accumulate(*flat_b_, gf.db);
      const Index dr = cfg_.d_refined;
      const Matrix dp_v = segment_mean_backward(gf.dx.leftCols(dr), tr.video.pooled.starts);
      const Matrix dp_a = segment_mean_backward(gf.dx.rightCols(dr), tr.audio.pooled.starts);
      refine_backward(tr.video, video_, dp_v);
      refine_backward(tr.audio, audio_, dp_a);
      return;
    }

    // token dense, shared by the K token rows and the fused row
    DenseGrads gh = dense_backward(tr.fused_dropped, params_.value(*tok_w_), d_head);
    Matrix d_fused_dropped = gh.dx;
    Matrix d_token_out = Matrix::Zero(cfg_.n_tokens, ds);
    if (w.token != 0.0) {
      const Index k = cfg_.n_tokens;
      const Matrix mean_row = tr.token_out.colwise().mean();
      const Matrix resid = (-tr.fused_dropped).rowwise() + mean_row.row(0);  // Hbar - h_i
      d_fused_dropped -= (2.0 * w.token * inv_b) * resid;
      const Matrix d_mean = (2.0 * w.token * inv_b) * resid.colwise().sum();
      d_token_out.rowwise() += d_mean.row(0) / static_cast<double>(k);
      if (k > 1) {
        const double coef = w.token * 2.0 / static_cast<double>(k * (k - 1));
        for (Index i = 0; i < k; ++i) {
          for (Index j = i + 1; j < k; ++j) {
            const auto hi = tr.token_out.row(i);
            const auto hj = tr.token_out.row(j);
            const double ni = hi.norm();
            const double nj = hj.norm();
            if (ni == 0.0 || nj == 0.0) continue;
            const double c = hi.dot(hj) / (ni * nj);
            d_token_out.row(i) += coef * 2.0 * c * (hj / (ni * nj) - c * hi / (ni * ni));
            d_token_out.row(j) += coef * 2.0 * c * (hi / (ni * nj) - c * hj / (nj * nj));
          }
        }
      }
    }
    DenseGrads gt = dense_backward(params_.value(*tokens_), params_.value(*tok_w_), d_token_out);
    accumulate(*tok_w_, gh.dw + gt.dw);
    accumulate(*tok_b_, gh.db + gt.db);
    accumulate(*tokens_, gt.dx);

    const Matrix d_fused = d_fused_dropped.cwiseProduct(tr.dropout_mask);
    const ModalityTrace& v = tr.video;
    const ModalityTrace& a = tr.audio;
    Matrix dzs_v, dzs_a;
    Matrix dzp_v = Matrix::Zero(v.z_priv.rows(), v.z_priv.cols());
    Matrix dzp_a = Matrix::Zero(a.z_priv.rows(), a.z_priv.cols());

    if (cfg_.sparse_gating) {
      const double sparse_grad = w.sparse * inv_b / static_cast<double>(ds);
      for (auto [t, b, dzs, dzp] : {std::tuple{&v, &video_, &dzs_v, &dzp_v}, std::tuple{&a, &audio_, &dzs_a, &dzp_a}}) {
        *dzs = d_fused.cwiseProduct(t->gate);
        Matrix dg = d_fused.cwiseProduct(t->z_shared).array() + sparse_grad;
        const Matrix dpre = sigmoid_backward(t->gate, dg);
        DenseGrads gg = dense_backward(t->z_priv, params_.value(*b->gate_w), dpre);
        accumulate(*b->gate_w, gg.dw);
        accumulate(*b->gate_b, gg.db);
        *dzp += gg.dx;
      }
    } else {
      dzs_v = d_fused;
      dzs_a = d_fused;
    }

    // cross-modal alignment
    {
      const Matrix d_to_a = (2.0 * w.cycle * inv_b) * (tr.cycle_to_audio - a.z_shared);
      DenseGrads g = dense_backward(v.z_shared, params_.value(*cyc_a_w_), d_to_a);
      accumulate(*cyc_a_w_, g.dw);
      accumulate(*cyc_a_b_, g.db);
      dzs_v += g.dx;
      dzs_a -= d_to_a;
      if (cyc_v_w_) {
        const Matrix d_to_v = (2.0 * w.cycle * inv_b) * (tr.cycle_to_video - v.z_shared);
        DenseGrads gv = dense_backward(a.z_shared, params_.value(*cyc_v_w_), d_to_v);
        accumulate(*cyc_v_w_, gv.dw);
        accumulate(*cyc_v_b_, gv.db);
        dzs_a += gv.dx;
        dzs_v -= d_to_v;
      }
    }

    shared_grad_parts_[0] = utterance_backward(v, video_, dzs_v, dzp_v, w, inv_b);
    shared_grad_parts_[1] = utterance_backward(a, audio_, dzs_a, dzp_a, w, inv_b);
  }

  // Returns this modality's contribution to the shared-encoder weight gradient.
  Matrix utterance_backward(const ModalityTrace& t, const BranchParams& b, Matrix dzs, Matrix dzp, const LossWeights& w,
                            double inv_b) {
    const Index ds = cfg_.d_shared;
    const Index dp = cfg_.d_private;
    const Matrix d_recon = (2.0 * w.utterance * inv_b) * (t.utter_recon - t.zbar);
    DenseGrads gu = dense_backward(t.utter_in, params_.value(*b.udec_w), d_recon);
    accumulate(*b.udec_w, gu.dw);
    accumulate(*b.udec_b, gu.db);
    dzs += gu.dx.leftCols(ds);
    dzp += gu.dx.rightCols(dp);
    Matrix dzbar = -d_recon;

    auto encoder_grad = [&](const Matrix& dz, const Matrix& mu, const Matrix& lv, const Matrix& noise, double beta) {
      ReparamGrads r = reparameterize_backward(lv, noise, dz);
      const double kl = w.utterance * beta * inv_b;
      r.dmu += kl * gaussian_kl_grad_mu(mu);
      r.dlogvar += kl * gaussian_kl_grad_logvar(lv);
      Matrix d(mu.rows(), 2 * mu.cols());
      d << r.dmu, r.dlogvar;
      return d;
    };
    DenseGrads gsh = dense_backward(t.zbar, params_.value(*shared_w_), encoder_grad(dzs, t.mu_s, t.logvar_s, t.noise_s, cfg_.beta_shared));
    accumulate(*shared_w_, gsh.dw);
    accumulate(*shared_b_, gsh.db);
    DenseGrads gpr = dense_backward(t.zbar, params_.value(*b.priv_w), encoder_grad(dzp, t.mu_p, t.logvar_p, t.noise_p, cfg_.beta_private));
    accumulate(*b.priv_w, gpr.dw);
    accumulate(*b.priv_b, gpr.db);
    dzbar += gsh.dx + gpr.dx;

    Matrix d_pooled;
    if (cfg_.arch == Architecture::divine) {
      const Matrix dz_sig = segment_mean_backward(dzbar, t.pooled.starts);
      d_pooled = window_backward(t, b, dz_sig, w);
    } else {
      d_pooled = segment_mean_backward(dzbar, t.pooled.starts);
    }
    refine_backward(t, b, d_pooled);
    return gsh.dw;
  }

  Matrix window_backward(const ModalityTrace& t, const BranchParams& b, Matrix dz, const LossWeights& w) {
    const double nb = static_cast<double>(t.pooled.count());
    Vector scale(t.pooled.total_steps());
    for (std::size_t i = 0; i < t.pooled.count(); ++i) {
      scale.segment(t.pooled.starts[i], t.pooled.length(i)).setConstant(w.window / (nb * static_cast<double>(t.pooled.length(i))));
    }
    const Matrix d_recon = (2.0 * (t.recon_w - t.pooled.data)).array().colwise() * scale.array();
    DenseGrads gd = dense_backward(t.z_sig, params_.value(*b.win_dec_w), d_recon);
    accumulate(*b.win_dec_w, gd.dw);
    accumulate(*b.win_dec_b, gd.db);
    dz += gd.dx;
    ReparamGrads r = reparameterize_backward(t.logvar_w, t.noise_w, dz);
    r.dmu += (gaussian_kl_grad_mu(t.mu_w).array().colwise() * scale.array()).matrix();
    r.dlogvar += (gaussian_kl_grad_logvar(t.logvar_w).array().colwise() * scale.array()).matrix();
    Matrix d_enc(r.dmu.rows(), 2 * r.dmu.cols());
    d_enc << r.dmu, r.dlogvar;
    DenseGrads ge = dense_backward(t.pooled.data, params_.value(*b.win_enc_w), d_enc);
    accumulate(*b.win_enc_w, ge.dw);
    accumulate(*b.win_enc_b, ge.db);
    return ge.dx - d_recon;
  }

  void refine_backward(const ModalityTrace& t, const BranchParams& b, const Matrix& d_pooled) {
    const Matrix d_act = maxpool1d_backward(t.pool_argmax, t.bn_out.rows(), d_pooled);
    const Matrix d_bn = relu_backward(t.bn_out, d_act);
    BatchNormGrads gb = batchnorm_backward(t.bn, params_.value(b.bn_gamma), d_bn);
    accumulate(b.bn_gamma, gb.dgamma);
    accumulate(b.bn_beta, gb.dbeta);
    ConvGrads gcv = conv1d_backward(t.conv_columns, t.input_starts, t.input_width, params_.value(b.conv_w), cfg_.kernel, gb.dx);
    accumulate(b.conv_w, gcv.dkernels);
    accumulate(b.conv_b, gcv.dbias);
  }

  ModelConfig cfg_;
  LossConfig loss_;
  BranchParams video_{}, audio_{};
  std::optional<std::size_t> shared_w_, shared_b_;
  std::optional<std::size_t> cyc_a_w_, cyc_a_b_, cyc_v_w_, cyc_v_b_;
  std::optional<std::size_t> tokens_, tok_w_, tok_b_;
  std::optional<std::size_t> flat_w_, flat_b_;
  std::size_t cls_w_ = 0, cls_b_ = 0, sev_w_ = 0, sev_b_ = 0;
  ForwardTrace trace_;
  std::array<Matrix, 2> shared_grad_parts_;
};

}  // namespace divine
