#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "divine/numerics/tensor.hpp"

namespace divine {

enum class Architecture { divine, flat, single_level };
enum class CycleMode { symmetric, asymmetric };
enum class TokenWeightMode { literal, flat };
enum class Modality { both, video_only, audio_only };
enum class Phase { train, eval };

NLOHMANN_JSON_SERIALIZE_ENUM(Architecture, {{Architecture::divine, "divine"},
                                            {Architecture::flat, "flat"},
                                            {Architecture::single_level, "single_level"}})
NLOHMANN_JSON_SERIALIZE_ENUM(CycleMode, {{CycleMode::symmetric, "symmetric"}, {CycleMode::asymmetric, "asymmetric"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TokenWeightMode, {{TokenWeightMode::literal, "literal"}, {TokenWeightMode::flat, "flat"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Modality, {{Modality::both, "both"}, {Modality::video_only, "video_only"}, {Modality::audio_only, "audio_only"}})

inline std::string to_string(Modality m) {
  switch (m) {
    case Modality::both: return "both";
    case Modality::video_only: return "video_only";
    case Modality::audio_only: return "audio_only";
  }
  return "?";
}

// Accepts both the CLI spelling (video/audio) and the long form.
inline Modality parse_modality(const std::string& s) {
  if (s == "both") return Modality::both;
  if (s == "video" || s == "video_only") return Modality::video_only;
  if (s == "audio" || s == "audio_only") return Modality::audio_only;
  throw ConfigError("unknown modality '" + s + "' (expected both|video|audio)");
}

struct ModelConfig {
  Index d_v = 64;
  Index d_a = 64;
  Index d_refined = 128;
  Index d_window = 64;
  Index d_shared = 64;
  Index d_private = 32;
  Index n_tokens = 4;
  Index n_classes = 3;
  Index n_severity = 4;
  Index kernel = 3;
  double beta_shared = 1.0;
  double beta_private = 1.0;
  CycleMode cycle = CycleMode::symmetric;
  Architecture arch = Architecture::divine;
  bool sparse_gating = true;  // false: gates fixed at 1 (h_fused = z_s^v + z_s^a)

  void validate() const {
    if (d_v < 1 || d_a < 1 || d_refined < 1 || d_window < 1 || d_shared < 1 || d_private < 1) {
      throw ConfigError("all model dimensions must be >= 1");
    }
    if (n_tokens < 1) throw ConfigError("token count K must be >= 1");
    if (n_classes < 2) throw ConfigError("need at least 2 diagnosis classes");
    if (n_severity < 2) throw ConfigError("need at least 2 severity levels");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("refiner kernel must be odd");
    if (beta_shared < 0 || beta_private < 0) throw ConfigError("KL weights must be >= 0");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, d_v, d_a, d_refined, d_window, d_shared, d_private, n_tokens,
                                                n_classes, n_severity, kernel, beta_shared, beta_private, cycle, arch,
                                                sparse_gating)

// Coefficients of the joint objective plus the per-term ablation switches.
struct LossConfig {
  double alpha = 2.0;
  double epsilon = 0.1;
  double lambda = 0.4;
  TokenWeightMode token_mode = TokenWeightMode::literal;
  bool use_cycle = true;
  bool use_sparse = true;
  bool use_token = true;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LossConfig, alpha, epsilon, lambda, token_mode, use_cycle, use_sparse, use_token)

// Effective multiplier of each named term in L_total.
struct LossWeights {
  double cls = 1.0;
  double sev = 2.0;
  double cycle = 0.1;
  double sparse = 0.1;
  double token = 0.004;
  double window = 1.0;
  double utterance = 1.0;
};

// L_total = L_cls + a L_sev + e (L_cycle + L_sparse + e l L_token) + sum_m (L_w^m + L_u^m)
// In flat token mode the token coefficient is e*l instead of e*e*l.
inline LossWeights loss_weights(const LossConfig& c) {
  LossWeights w;
  w.cls = 1.0;
  w.sev = c.alpha;
  w.cycle = c.use_cycle ? c.epsilon : 0.0;
  w.sparse = c.use_sparse ? c.epsilon : 0.0;
  const double token = c.token_mode == TokenWeightMode::literal ? c.epsilon * c.epsilon * c.lambda : c.epsilon * c.lambda;
  w.token = c.use_token ? token : 0.0;
  return w;
}

struct LossBreakdown {
  double cls = 0.0;
  double sev = 0.0;
  double cycle = 0.0;
  double sparse = 0.0;
  double token = 0.0;
  double window_v = 0.0;
  double window_a = 0.0;
  double utter_v = 0.0;
  double utter_a = 0.0;
  double total = 0.0;
  double alpha = 2.0;
  double epsilon = 0.1;
  double lambda = 0.4;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LossBreakdown, cls, sev, cycle, sparse, token, window_v, window_a, utter_v,
                                                utter_a, total, alpha, epsilon, lambda)

inline double total_loss(const LossBreakdown& t, const LossWeights& w) {
  const std::pair<const char*, double> terms[] = {{"L_cls", t.cls},         {"L_sev", t.sev},       {"L_cycle", t.cycle},
                                                  {"L_sparse", t.sparse},   {"L_token", t.token},   {"L_w^v", t.window_v},
                                                  {"L_w^a", t.window_a},    {"L_u^v", t.utter_v},   {"L_u^a", t.utter_a}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite loss term ") + name);
  }
  return w.cls * t.cls + w.sev * t.sev + w.cycle * t.cycle + w.sparse * t.sparse + w.token * t.token +
         w.window * (t.window_v + t.window_a) + w.utterance * (t.utter_v + t.utter_a);
}

inline double total_loss(const LossBreakdown& t, const LossConfig& c) { return total_loss(t, loss_weights(c)); }

struct ForwardOptions {
  Phase phase = Phase::eval;
  Modality modality = Modality::both;
  std::uint64_t seed = 0;          // reparameterization noise and dropout stream
  bool freeze_batchnorm = false;   // train phase, but normalize with running stats and do not update them
  double dropout = 0.0;            // on h_fused, train phase only
  bool strict = false;             // refuse audio-only inference without an audio->video decoder

  static ForwardOptions eval(Modality m = Modality::both) {
    ForwardOptions o;
    o.modality = m;
    return o;
  }

  static ForwardOptions train(std::uint64_t seed, double dropout = 0.0) {
    ForwardOptions o;
    o.phase = Phase::train;
    o.seed = seed;
    o.dropout = dropout;
    return o;
  }
};

}  // namespace divine
