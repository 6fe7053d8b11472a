#pragma once

#include <string>
#include <vector>

#include "divine/train_eval/experiment.hpp"

namespace divine {

struct AblationVariant {
  std::string name;
  ExperimentRecord record;
};

struct AblationResult {
  std::string suite;
  std::vector<AblationVariant> variants;
  std::vector<ComparisonRow> rows;
};

inline const std::vector<std::string>& ablation_suites() {
  static const std::vector<std::string> names{"modalities", "regularization", "disentanglement", "baselines"};
  return names;
}

// Baseline network configs sized from a DIVINE model config.
inline nlohmann::json baseline_network(BaselineKind kind, Modality input, const ModelConfig& m, const LossConfig& loss) {
  BaselineConfig b;
  b.kind = kind;
  b.input = input;
  b.d_v = m.d_v;
  b.d_a = m.d_a;
  b.n_classes = m.n_classes;
  b.n_severity = m.n_severity;
  return {{"kind", nlohmann::json(kind).get<std::string>()}, {"baseline", b}, {"loss", loss}};
}

// modalities: one training run per (seed, fold), evaluated in all three modes.
// regularization: full, no_cycle, no_sparse, no_token (both modalities).
// disentanglement: full, flat, single_level (both modalities).
// baselines: DIVINE against FCN/CNN per modality and concatenation fusion.
inline AblationResult run_ablation(const Dataset& ds, const ExperimentConfig& base, const std::string& suite) {
  AblationResult out;
  out.suite = suite;
  auto run = [&](const std::string& name, ExperimentConfig cfg, const std::vector<Modality>& modes) {
    cfg.modes = modes;
    AblationVariant v{name, cross_validate(ds, cfg)};
    for (auto& row : comparison_rows(name, v.record, modes)) out.rows.push_back(std::move(row));
    out.variants.push_back(std::move(v));
  };
  const std::vector<Modality> both{Modality::both};

  if (suite == "modalities") {
    run("full", base, {Modality::both, Modality::audio_only, Modality::video_only});
  } else if (suite == "regularization") {
    run("full", base, both);
    for (const char* flag : {"no_cycle", "no_sparse", "no_token"}) {
      ExperimentConfig c = base;
      c.train.no_cycle = std::string(flag) == "no_cycle";
      c.train.no_sparse = std::string(flag) == "no_sparse";
      c.train.no_token = std::string(flag) == "no_token";
      run(flag, c, both);
    }
  } else if (suite == "disentanglement") {
    ExperimentConfig full = base;
    full.train.flat = full.train.single_level = false;
    run("full", full, both);
    ExperimentConfig flat = full;
    flat.train.flat = true;
    run("flat", flat, both);
    ExperimentConfig single = full;
    single.train.single_level = true;
    run("single_level", single, both);
  } else if (suite == "baselines") {
    if (!base.network.contains("model")) throw ConfigError("baselines suite needs a DIVINE network config");
    const ModelConfig m = base.network.at("model").get<ModelConfig>();
    const LossConfig loss = base.network.value("loss", LossConfig{});
    run("divine", base, both);
    for (auto [kind, input, name] : {std::tuple{BaselineKind::fcn, Modality::video_only, "fcn_video"},
                                     std::tuple{BaselineKind::fcn, Modality::audio_only, "fcn_audio"},
                                     std::tuple{BaselineKind::cnn, Modality::video_only, "cnn_video"},
                                     std::tuple{BaselineKind::cnn, Modality::audio_only, "cnn_audio"},
                                     std::tuple{BaselineKind::concat, Modality::both, "concat"}}) {
      ExperimentConfig c = base;
      c.network = baseline_network(kind, input, m, loss);
      run(name, c, {input == Modality::both ? Modality::both : input});
    }
  } else {
    std::string known;
    for (const auto& s : ablation_suites()) known += (known.empty() ? "" : "|") + s;
    throw ConfigError("unknown ablation suite '" + suite + "' (expected " + known + ")");
  }
  return out;
}

}  // namespace divine
