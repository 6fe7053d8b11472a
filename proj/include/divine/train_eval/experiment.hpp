#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "divine/data/folds.hpp"
#include "divine/model/checkpoint.hpp"
#include "divine/train_eval/trainer.hpp"

namespace divine {

inline const std::vector<Modality>& all_modes() {
  static const std::vector<Modality> modes{Modality::both, Modality::video_only, Modality::audio_only};
  return modes;
}

// Folds the TrainConfig ablation switches into a network config: the
// architecture flags pick the model variant and the loss switches follow.
inline nlohmann::json apply_train_flags(nlohmann::json net, const TrainConfig& tc) {
  LossConfig loss = net.value("loss", LossConfig{});
  const LossConfig flags = tc.loss(loss.token_mode);
  net["loss"] = flags;
  if (net.contains("model")) {
    ModelConfig m = net.at("model").get<ModelConfig>();
    if (tc.flat) m.arch = Architecture::flat;
    if (tc.single_level) m.arch = Architecture::single_level;
    if (tc.no_sparse) m.sparse_gating = false;
    net["model"] = m;
    net["kind"] = DivineModel(m, flags, 0).kind();
  }
  return net;
}

struct ExperimentConfig {
  nlohmann::json network;  // config_json() layout: {"kind", "model"|"baseline", "loss"}
  TrainConfig train;
  int k = 5;
  std::vector<std::uint64_t> seeds{0};
  std::vector<int> folds;  // test-fold rotations to run; empty = all k
  std::vector<Modality> modes = all_modes();
  std::optional<std::filesystem::path> checkpoint_dir;
  int jobs = 1;
  bool strict = false;  // audio-only with an asymmetric cycle is reported unsupported instead of substituted
};

struct RunRecord {
  std::uint64_t seed = 0;
  int fold = 0;
  int val_fold = 0;
  std::vector<std::string> test_subjects;
  std::vector<std::string> val_subjects;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  TrainResult training;
  std::vector<std::pair<Modality, MetricsReport>> metrics;  // only supported modes
  std::vector<std::pair<Modality, std::string>> unsupported;
  std::string checkpoint;
  double wall_seconds = 0.0;
  std::string error;  // non-empty when the run failed

  const MetricsReport* metrics_for(Modality m) const {
    for (const auto& [mode, rep] : metrics) {
      if (mode == m) return &rep;
    }
    return nullptr;
  }
};

struct ExperimentRecord {
  nlohmann::json config;  // effective ExperimentConfig snapshot
  std::vector<std::pair<std::uint64_t, FoldPlan>> plans;
  std::vector<RunRecord> runs;
  std::vector<std::string> diagnosis_labels;
  std::vector<double> severity_scores;

  std::vector<const RunRecord*> failed() const {
    std::vector<const RunRecord*> out;
    for (const auto& r : runs) {
      if (!r.error.empty()) out.push_back(&r);
    }
    return out;
  }

  std::vector<MetricsReport> reports(Modality m) const {
    std::vector<MetricsReport> out;
    for (const auto& r : runs) {
      if (const auto* rep = r.metrics_for(m)) out.push_back(*rep);
    }
    return out;
  }

  std::optional<MetricsSummary> summary(Modality m) const {
    auto reps = reports(m);
    if (reps.empty()) return std::nullopt;
    return aggregate(reps);
  }
};

inline nlohmann::json experiment_config_json(const ExperimentConfig& c) {
  nlohmann::json modes = nlohmann::json::array();
  for (Modality m : c.modes) modes.push_back(m);
  return {{"network", c.network}, {"train", c.train}, {"k", c.k}, {"seeds", c.seeds}, {"folds", c.folds}, {"modes", modes},
          {"strict", c.strict}, {"fold_rotation", "test = fold i, validation = fold (i+1) mod k, train = rest"},
          {"severity_normalization", kSeverityNormalization}};
}

inline nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [m, rep] : r.metrics) metrics[to_string(m)] = to_json(rep);
  nlohmann::json unsupported = nlohmann::json::object();
  for (const auto& [m, why] : r.unsupported) unsupported[to_string(m)] = why;
  return {{"seed", r.seed},
          {"fold", r.fold},
          {"val_fold", r.val_fold},
          {"test_subjects", r.test_subjects},
          {"val_subjects", r.val_subjects},
          {"sizes", {{"train", r.n_train}, {"val", r.n_val}, {"test", r.n_test}}},
          {"training", to_json(r.training)},
          {"metrics", metrics},
          {"unsupported", unsupported},
          {"checkpoint", r.checkpoint},
          {"wall_seconds", r.wall_seconds},
          {"error", r.error}};
}

inline nlohmann::json to_json(const ExperimentRecord& rec) {
  nlohmann::json plans = nlohmann::json::array();
  for (const auto& [seed, plan] : rec.plans) plans.push_back({{"seed", seed}, {"k", plan.k}, {"assignments", plan.assignments}});
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : rec.runs) runs.push_back(to_json(r));
  nlohmann::json agg = nlohmann::json::object();
  for (Modality m : all_modes()) {
    if (auto s = rec.summary(m)) agg[to_string(m)] = to_json(*s);
  }
  return {{"format", "divine-experiment-1"},
          {"config", rec.config},
          {"diagnosis_labels", rec.diagnosis_labels},
          {"severity_scores", rec.severity_scores},
          {"fold_plans", plans},
          {"runs", runs},
          {"aggregate", agg}};
}

// Rebuilds the parts of a record needed for reporting (metrics per run).
inline ExperimentRecord record_from_json(const nlohmann::json& j) {
  ExperimentRecord rec;
  rec.config = j.at("config");
  rec.diagnosis_labels = j.at("diagnosis_labels").get<std::vector<std::string>>();
  rec.severity_scores = j.at("severity_scores").get<std::vector<double>>();
  for (const auto& p : j.at("fold_plans")) {
    FoldPlan plan;
    plan.k = p.at("k").get<int>();
    plan.seed = p.at("seed").get<std::uint64_t>();
    plan.assignments = p.at("assignments").get<std::map<std::string, int>>();
    rec.plans.emplace_back(plan.seed, plan);
  }
  for (const auto& r : j.at("runs")) {
    RunRecord run;
    run.seed = r.at("seed").get<std::uint64_t>();
    run.fold = r.at("fold").get<int>();
    run.val_fold = r.at("val_fold").get<int>();
    run.test_subjects = r.at("test_subjects").get<std::vector<std::string>>();
    run.val_subjects = r.at("val_subjects").get<std::vector<std::string>>();
    run.checkpoint = r.value("checkpoint", std::string());
    run.error = r.value("error", std::string());
    for (const auto& [mode, rep] : r.at("metrics").items()) run.metrics.emplace_back(parse_modality(mode), metrics_from_json(rep));
    std::sort(run.metrics.begin(), run.metrics.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    rec.runs.push_back(std::move(run));
  }
  return rec;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

inline std::uint64_t init_seed(std::uint64_t seed, int fold) { return hash_combine(hash_combine(0x13198a2e03707344ULL, seed), fold); }

inline std::vector<std::string> subjects_of(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::set<std::string> s;
  for (std::size_t i : idx) s.insert(ds.clips[i].subject_id);
  return {s.begin(), s.end()};
}

// Evaluates a trained network on `test` in each requested mode.
inline void evaluate_modes(Network& net, const Dataset& ds, const std::vector<std::size_t>& test, const std::vector<Modality>& modes,
                           RunRecord& run, bool strict = false) {
  for (Modality m : modes) {
    if (!net.supports(m)) {
      run.unsupported.emplace_back(m, net.kind() + " does not define predictions for " + to_string(m));
      continue;
    }
    ForwardOptions opts = ForwardOptions::eval(m);
    opts.strict = strict;
    try {
      run.metrics.emplace_back(m, evaluate(net, ds, test, opts));
    } catch (const UnsupportedConfiguration& e) {
      run.unsupported.emplace_back(m, e.what());
    }
  }
}

// One train/validate/test run; returns the trained network.
inline std::unique_ptr<Network> run_fold(const Dataset& ds, const ExperimentConfig& cfg, const FoldPlan& plan, std::uint64_t seed, int fold,
                                         RunRecord& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const Split split = make_split(ds, plan, fold);
  run.seed = seed;
  run.fold = fold;
  run.val_fold = split.val_fold;
  run.test_subjects = subjects_of(ds, split.test);
  run.val_subjects = subjects_of(ds, split.val);
  run.n_train = split.train.size();
  run.n_val = split.val.size();
  run.n_test = split.test.size();
  if (count_leaking_subjects(ds, {split.train, split.val, split.test}) != 0) throw InvariantViolation("subject leakage in split");

  TrainConfig tc = cfg.train;
  tc.seed = seed;
  const nlohmann::json net_cfg = apply_train_flags(cfg.network, tc);
  std::unique_ptr<Network> net = make_network(net_cfg, init_seed(seed, fold));
  run.training = train(*net, ds, split.train, split.val, tc);
  evaluate_modes(*net, ds, split.test, cfg.modes, run, cfg.strict);

  if (cfg.checkpoint_dir) {
    std::filesystem::create_directories(*cfg.checkpoint_dir);
    const auto path = *cfg.checkpoint_dir / ("seed" + std::to_string(seed) + "_fold" + std::to_string(fold) + ".ckpt");
    std::vector<std::string> test_clips;
    for (std::size_t i : split.test) test_clips.push_back(ds.clips[i].clip_id);
    save_checkpoint(path, *net,
                    {{"seed", seed}, {"fold", fold}, {"k", plan.k}, {"test_subjects", run.test_subjects}, {"test_clips", test_clips},
                     {"train", tc}});
    run.checkpoint = path.filename().string();
  }
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return net;
}

// Subject-wise cross-validation over seeds x folds. Failed runs are kept
// in the record with their error message; aggregates use completed runs.
inline ExperimentRecord cross_validate(const Dataset& ds, const ExperimentConfig& cfg) {
  cfg.train.validate();
  if (cfg.seeds.empty()) throw ConfigError("cross_validate needs at least one seed");
  ExperimentRecord rec;
  rec.config = experiment_config_json(cfg);
  rec.diagnosis_labels = ds.manifest.diagnosis_labels;
  rec.severity_scores = ds.manifest.severity_scores();

  std::vector<int> folds = cfg.folds;
  if (folds.empty()) {
    for (int f = 0; f < cfg.k; ++f) folds.push_back(f);
  }
  for (int f : folds) {
    if (f < 0 || f >= cfg.k) throw ConfigError("fold " + std::to_string(f) + " outside [0, k)");
  }
  struct Job {
    std::size_t plan;
    std::uint64_t seed;
    int fold;
  };
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.seeds) {
    rec.plans.emplace_back(seed, subject_kfold(ds, cfg.k, seed));
    for (int f : folds) jobs.push_back({rec.plans.size() - 1, seed, f});
  }
  rec.runs.resize(jobs.size());

  auto work = [&](std::size_t j) {
    RunRecord& run = rec.runs[j];
    try {
      run_fold(ds, cfg, rec.plans[jobs[j].plan].second, jobs[j].seed, jobs[j].fold, run);
    } catch (const std::exception& e) {
      run.seed = jobs[j].seed;
      run.fold = jobs[j].fold;
      run.metrics.clear();
      run.error = e.what();
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.jobs)), 1, jobs.size());
  if (n_workers == 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) work(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) work(j);
      });
    }
    for (auto& t : pool) t.join();
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Comparison tables
// ---------------------------------------------------------------------------

struct ComparisonRow {
  std::string variant;
  Modality mode = Modality::both;
  MetricsSummary summary;
};

inline std::vector<ComparisonRow> comparison_rows(const std::string& variant, const ExperimentRecord& rec,
                                                  const std::vector<Modality>& modes = all_modes()) {
  std::vector<ComparisonRow> rows;
  for (Modality m : modes) {
    if (auto s = rec.summary(m)) rows.push_back({variant, m, *s});
  }
  return rows;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "variant,mode,A,F1,M,R,A_std,F1_std,M_std,R_std\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    auto sev = [&](const Stat& st, bool mean) { return s.severity_applicable ? fmt(mean ? st.mean : st.std) : std::string("NA"); };
    out += r.variant + "," + to_string(r.mode) + "," + fmt(s.accuracy.mean) + "," + fmt(s.macro_f1.mean) + "," + sev(s.mae, true) + "," +
           sev(s.rmse, true) + "," + fmt(s.accuracy.std) + "," + fmt(s.macro_f1.std) + "," + sev(s.mae, false) + "," + sev(s.rmse, false) +
           "\n";
  }
  return out;
}

// Console table in the A / F1 / M / R layout.
inline std::string comparison_table(const std::vector<ComparisonRow>& rows) {
  auto cell = [](const std::string& s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
  std::size_t vw = 7;
  for (const auto& r : rows) vw = std::max(vw, r.variant.size());
  std::string out = cell("variant", vw) + cell("mode", 12) + cell("A", 16) + cell("F1", 16) + cell("M", 16) + cell("R", 16) + "\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    auto pm = [](const Stat& st) { return fmt(st.mean, 2) + " +- " + fmt(st.std, 2); };
    out += cell(r.variant, vw) + cell(to_string(r.mode), 12) + cell(pm(s.accuracy), 16) + cell(pm(s.macro_f1), 16) +
           cell(s.severity_applicable ? pm(s.mae) : "NA", 16) + cell(s.severity_applicable ? pm(s.rmse) : "NA", 16) + "\n";
  }
  return out;
}

}  // namespace divine
