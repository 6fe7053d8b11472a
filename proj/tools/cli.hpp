#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "divine/divine.hpp"

namespace divine::cli {

namespace fs = std::filesystem;

// Every recognized key with its default. Config files and `--key value`
// overrides may only name keys from this table.
inline const std::vector<std::pair<std::string, std::string>>& default_settings() {
  static const std::vector<std::pair<std::string, std::string>> table{
      // paths and protocol
      {"data", ""},
      {"out", "divine_out"},
      {"checkpoint", ""},
      {"clips", "test"},
      {"suite", ""},
      {"seed", "0"},
      {"seeds", ""},
      {"k", "5"},
      {"folds", ""},
      {"jobs", "1"},
      {"strict", "false"},
      {"modality", "both"},
      // synthetic generator
      {"n_subjects", "40"},
      {"clips_per_subject", "30"},
      {"n_classes", "3"},
      {"d_shared0", "8"},
      {"d_priv0_v", "8"},
      {"d_priv0_a", "8"},
      {"d_v", "64"},
      {"d_a", "64"},
      {"t_min_v", "28"},
      {"t_max_v", "36"},
      {"t_min_a", "28"},
      {"t_max_a", "36"},
      {"delta", "4"},
      {"noise", "0.5"},
      {"drift", "0.1"},
      {"hc_none_level", "true"},
      // model
      {"network", "divine"},
      {"input", "both"},
      {"d_refined", "128"},
      {"d_window", "64"},
      {"d_shared", "64"},
      {"d_private", "32"},
      {"n_tokens", "4"},
      {"beta_shared", "1"},
      {"beta_private", "1"},
      {"cycle", "symmetric"},
      {"token_weight_mode", "literal"},
      // training
      {"lr", "0.001"},
      {"batch", "32"},
      {"max_epochs", "50"},
      {"patience", "5"},
      {"alpha", "2"},
      {"epsilon", "0.1"},
      {"lambda", "0.4"},
      {"dropout", "0.1"},
      {"no_cycle", "false"},
      {"no_sparse", "false"},
      {"no_token", "false"},
      {"flat", "false"},
      {"single_level", "false"},
  };
  return table;
}

inline std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Flat key=value settings: defaults, then a config file, then flags.
class RunConfig {
 public:
  RunConfig() {
    for (const auto& [k, v] : default_settings()) values_[k] = v;
  }

  void set(const std::string& raw_key, const std::string& value, const std::string& origin = "flag") {
    const std::string key = normalize_key(raw_key);
    if (!values_.count(key)) throw ConfigError("unknown setting '" + raw_key + "' (" + origin + ")");
    values_[key] = value;
    explicit_.insert(key);
  }

  void load_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
      const std::string t = trim(line.substr(0, line.find('#')));
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key=value");
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)), path.string() + ":" + std::to_string(n));
    }
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }
  bool is_explicit(const std::string& key) const { return explicit_.count(key) > 0; }

  long long integer(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("setting " + key + ": expected an integer, got '" + v + "'");
  }

  double real(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("setting " + key + ": expected a number, got '" + v + "'");
  }

  bool boolean(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("setting " + key + ": expected true|false, got '" + v + "'");
  }

  std::vector<long long> integers(const std::string& key) const {
    std::vector<long long> out;
    std::stringstream ss(str(key));
    for (std::string item; std::getline(ss, item, ',');) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        std::size_t used = 0;
        out.push_back(std::stoll(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError("setting " + key + ": expected a comma-separated integer list, got '" + str(key) + "'");
      }
    }
    return out;
  }

  // key=value lines in table order; written verbatim next to every output.
  std::string echo() const {
    std::string out;
    for (const auto& [k, v] : default_settings()) out += k + "=" + values_.at(k) + "\n";
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : default_settings()) j[k] = values_.at(k);
    return j;
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

inline SyntheticSpec synthetic_spec(const RunConfig& rc) {
  SyntheticSpec s;
  s.n_subjects = static_cast<int>(rc.integer("n_subjects"));
  s.clips_per_subject = static_cast<int>(rc.integer("clips_per_subject"));
  s.n_classes = static_cast<int>(rc.integer("n_classes"));
  s.d_shared0 = static_cast<int>(rc.integer("d_shared0"));
  s.d_priv0_v = static_cast<int>(rc.integer("d_priv0_v"));
  s.d_priv0_a = static_cast<int>(rc.integer("d_priv0_a"));
  s.d_v = static_cast<int>(rc.integer("d_v"));
  s.d_a = static_cast<int>(rc.integer("d_a"));
  s.t_min_v = static_cast<int>(rc.integer("t_min_v"));
  s.t_max_v = static_cast<int>(rc.integer("t_max_v"));
  s.t_min_a = static_cast<int>(rc.integer("t_min_a"));
  s.t_max_a = static_cast<int>(rc.integer("t_max_a"));
  s.delta = rc.real("delta");
  s.noise = rc.real("noise");
  s.drift = rc.real("drift");
  s.hc_none_level = rc.boolean("hc_none_level");
  s.seed = static_cast<std::uint64_t>(rc.integer("seed"));
  return s;
}

inline TrainConfig train_config(const RunConfig& rc) {
  TrainConfig t;
  t.lr = rc.real("lr");
  t.batch = static_cast<int>(rc.integer("batch"));
  t.max_epochs = static_cast<int>(rc.integer("max_epochs"));
  t.patience = static_cast<int>(rc.integer("patience"));
  t.seed = static_cast<std::uint64_t>(rc.integer("seed"));
  t.alpha = rc.real("alpha");
  t.epsilon = rc.real("epsilon");
  t.lambda = rc.real("lambda");
  t.dropout = rc.real("dropout");
  t.no_cycle = rc.boolean("no_cycle");
  t.no_sparse = rc.boolean("no_sparse");
  t.no_token = rc.boolean("no_token");
  t.flat = rc.boolean("flat");
  t.single_level = rc.boolean("single_level");
  t.modality = parse_modality(rc.str("modality"));
  t.validate();
  return t;
}

template <class E>
E parse_enum(const std::string& key, const std::string& value) {
  const E e = nlohmann::json(value).get<E>();
  if (nlohmann::json(e).get<std::string>() != value) throw ConfigError("setting " + key + ": unknown value '" + value + "'");
  return e;
}

// Model dimensions come from the manifest; explicit settings must agree.
inline ModelConfig model_config(const RunConfig& rc, const Manifest& m) {
  auto agree = [&](const char* key, Index actual) {
    if (rc.is_explicit(key) && rc.integer(key) != actual) {
      throw ConfigError(std::string("setting ") + key + "=" + rc.str(key) + " disagrees with the dataset manifest (" + std::to_string(actual) + ")");
    }
  };
  ModelConfig c;
  c.d_v = m.d_v;
  c.d_a = m.d_a;
  c.n_classes = static_cast<Index>(m.diagnosis_labels.size());
  c.n_severity = static_cast<Index>(m.severity_levels.size());
  agree("d_v", c.d_v);
  agree("d_a", c.d_a);
  agree("n_classes", c.n_classes);
  c.d_refined = rc.integer("d_refined");
  c.d_window = rc.integer("d_window");
  c.d_shared = rc.integer("d_shared");
  c.d_private = rc.integer("d_private");
  c.n_tokens = rc.integer("n_tokens");
  c.beta_shared = rc.real("beta_shared");
  c.beta_private = rc.real("beta_private");
  c.cycle = parse_enum<CycleMode>("cycle", rc.str("cycle"));
  c.validate();
  return c;
}

inline nlohmann::json network_config(const RunConfig& rc, const Manifest& manifest) {
  const ModelConfig m = model_config(rc, manifest);
  LossConfig loss;
  loss.token_mode = parse_enum<TokenWeightMode>("token_weight_mode", rc.str("token_weight_mode"));
  const std::string& kind = rc.str("network");
  if (kind == "divine") return DivineModel(m, loss, 0).config_json();
  const BaselineKind b = parse_enum<BaselineKind>("network", kind);
  const Modality input = parse_modality(rc.str("input"));
  nlohmann::json j = baseline_network(b, input, m, loss);
  j.at("baseline").get<BaselineConfig>().validate();
  return j;
}

inline fs::path manifest_path(const RunConfig& rc) {
  const std::string& d = rc.str("data");
  if (d.empty()) throw ConfigError("no dataset given (use --data PATH to a manifest or dataset directory)");
  fs::path p(d);
  if (fs::is_directory(p)) p /= "manifest.json";
  return p;
}

inline ExperimentConfig experiment_config(const RunConfig& rc, const Dataset& ds) {
  ExperimentConfig cfg;
  cfg.network = network_config(rc, ds.manifest);
  cfg.train = train_config(rc);
  cfg.k = static_cast<int>(rc.integer("k"));
  if (cfg.k < 2) throw ConfigError("k must be >= 2");
  cfg.seeds.clear();
  for (long long s : rc.integers("seeds")) {
    if (s < 0) throw ConfigError("seeds must be non-negative");
    cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (cfg.seeds.empty()) cfg.seeds = {cfg.train.seed};
  for (long long f : rc.integers("folds")) cfg.folds.push_back(static_cast<int>(f));
  cfg.jobs = static_cast<int>(rc.integer("jobs"));
  if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
  cfg.strict = rc.boolean("strict");
  return cfg;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline fs::path prepare_out(const RunConfig& rc) {
  const fs::path out(rc.str("out"));
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw std::runtime_error("cannot create output directory " + out.string());
  return out;
}

inline std::string failed_runs(const ExperimentRecord& rec) {
  std::string msg;
  for (const RunRecord* r : rec.failed()) msg += "  seed " + std::to_string(r->seed) + " fold " + std::to_string(r->fold) + ": " + r->error + "\n";
  return msg;
}

inline std::string confusion_report(const ExperimentRecord& rec) {
  std::string out;
  for (Modality m : all_modes()) {
    if (auto s = rec.summary(m)) out += "confusion (" + to_string(m) + ", summed over runs)\n" + render_confusion(s->confusion, rec.diagnosis_labels) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_synth(const RunConfig& rc, std::ostream& out) {
  const SyntheticSpec spec = synthetic_spec(rc);
  const SyntheticDataset sd = synth_generate(spec);
  const fs::path dir = prepare_out(rc);
  save_dataset(sd.dataset, dir);
  write_factor_table(sd, dir / "factors.csv");
  write_text(dir / "config.txt", rc.echo());

  std::vector<long> per_class(sd.dataset.manifest.diagnosis_labels.size(), 0);
  for (const auto& c : sd.dataset.clips) ++per_class[static_cast<std::size_t>(c.diagnosis)];
  out << "wrote " << (dir / "manifest.json").string() << "\n";
  out << "clips: " << sd.dataset.clips.size() << "  subjects: " << sd.dataset.subjects().size() << "\n";
  out << "class balance:";
  for (std::size_t c = 0; c < per_class.size(); ++c) out << " " << sd.dataset.manifest.diagnosis_labels[c] << "=" << per_class[c];
  out << "\n";
  return 0;
}

inline int cmd_train(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_dataset(manifest_path(rc));
  ExperimentConfig cfg = experiment_config(rc, ds);
  const fs::path dir = prepare_out(rc);
  cfg.checkpoint_dir = dir / "checkpoints";
  ExperimentRecord rec = cross_validate(ds, cfg);
  rec.config["run_config"] = rc.to_json();

  const std::string variant = cfg.network.at("kind").get<std::string>();
  const auto rows = comparison_rows(variant, rec);
  write_json_file(dir / "record.json", to_json(rec));
  write_text(dir / "metrics.csv", comparison_csv(rows));
  write_text(dir / "confusion.txt", confusion_report(rec));
  write_text(dir / "config.txt", rc.echo());
  out << comparison_table(rows) << "\n" << confusion_report(rec);
  if (!rec.failed().empty()) {
    err << "error: " << rec.failed().size() << " of " << rec.runs.size() << " runs failed:\n" << failed_runs(rec);
    return 1;
  }
  return 0;
}

inline void check_compatible(const nlohmann::json& net, const Manifest& m) {
  const nlohmann::json& dims = net.contains("model") ? net.at("model") : net.at("baseline");
  auto check = [&](const char* key, std::size_t actual) {
    const auto want = dims.at(key).get<std::size_t>();
    if (want != actual) {
      throw ConfigError(std::string("checkpoint is incompatible with the dataset: ") + key + "=" + std::to_string(want) + " in the checkpoint, " +
                        std::to_string(actual) + " in the manifest");
    }
  };
  check("d_v", static_cast<std::size_t>(m.d_v));
  check("d_a", static_cast<std::size_t>(m.d_a));
  check("n_classes", m.diagnosis_labels.size());
  check("n_severity", m.severity_levels.size());
}

inline int cmd_eval(const RunConfig& rc, std::ostream& out) {
  const std::string& ckpt = rc.str("checkpoint");
  if (ckpt.empty()) throw ConfigError("eval needs --checkpoint PATH");
  if (!fs::exists(ckpt)) throw ConfigError("checkpoint not found: " + ckpt);
  const Dataset ds = load_dataset(manifest_path(rc));
  LoadedNetwork loaded = load_checkpoint(ckpt);
  check_compatible(loaded.checkpoint.network, ds.manifest);

  std::vector<std::size_t> idx;
  const std::string& which = rc.str("clips");
  if (which == "all") {
    for (std::size_t i = 0; i < ds.clips.size(); ++i) idx.push_back(i);
  } else if (which == "test") {
    const nlohmann::json& meta = loaded.checkpoint.meta;
    if (!meta.contains("test_clips")) throw ConfigError("checkpoint has no test split recorded; use --clips all");
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < ds.clips.size(); ++i) by_id[ds.clips[i].clip_id] = i;
    for (const auto& id : meta.at("test_clips")) {
      auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end()) throw ConfigError("checkpoint test clip " + id.get<std::string>() + " is not in the dataset");
      idx.push_back(it->second);
    }
  } else {
    throw ConfigError("setting clips: expected test|all, got '" + which + "'");
  }

  const Modality mode = parse_modality(rc.str("modality"));
  if (!loaded.net->supports(mode)) throw UnsupportedConfiguration(loaded.net->kind() + " does not define predictions for " + to_string(mode));
  ForwardOptions opts = ForwardOptions::eval(mode);
  opts.strict = rc.boolean("strict");
  const MetricsReport rep = evaluate(*loaded.net, ds, idx, opts);

  const fs::path dir = prepare_out(rc);
  const std::string stem = fs::path(ckpt).stem().string();
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); };
  const std::string csv = "checkpoint,mode,n,A,F1,M,R\n" + stem + "," + to_string(mode) + "," + std::to_string(rep.n) + "," + fmt(rep.accuracy) +
                          "," + fmt(rep.macro_f1) + "," + opt(rep.mae) + "," + opt(rep.rmse) + "\n";
  const std::string cm = render_confusion(rep.confusion, ds.manifest.diagnosis_labels);
  write_text(dir / ("eval_" + stem + "_" + to_string(mode) + ".csv"), csv);
  write_text(dir / ("eval_" + stem + "_" + to_string(mode) + "_confusion.txt"), cm);
  out << csv << "\n" << cm;
  return 0;
}

inline int cmd_ablate(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const std::string& suite = rc.str("suite");
  if (suite.empty()) throw ConfigError("ablate needs --suite modalities|regularization|disentanglement|baselines");
  const Dataset ds = load_dataset(manifest_path(rc));
  const ExperimentConfig cfg = experiment_config(rc, ds);
  const AblationResult res = run_ablation(ds, cfg, suite);
  const fs::path dir = prepare_out(rc);

  nlohmann::json variants = nlohmann::json::array();
  std::size_t failed = 0;
  std::string failures;
  for (const auto& v : res.variants) {
    nlohmann::json r = to_json(v.record);
    r["config"]["run_config"] = rc.to_json();
    variants.push_back({{"name", v.name}, {"record", r}});
    failed += v.record.failed().size();
    if (!v.record.failed().empty()) failures += v.name + ":\n" + failed_runs(v.record);
  }
  write_json_file(dir / ("ablation_" + suite + ".json"), {{"suite", suite}, {"variants", variants}});
  write_text(dir / ("ablation_" + suite + ".csv"), comparison_csv(res.rows));
  write_text(dir / "config.txt", rc.echo());
  out << comparison_table(res.rows);
  if (failed) {
    err << "error: " << failed << " runs failed:\n" << failures;
    return 1;
  }
  return 0;
}

inline int cmd_report(const RunConfig& rc, const std::vector<std::string>& records, std::ostream& out) {
  if (records.empty()) throw ConfigError("report needs at least one record file");
  ExperimentRecord merged;
  std::set<std::string> kinds;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const nlohmann::json j = read_json_file(records[i]);
    if (j.value("format", "") != "divine-experiment-1") throw ConfigError(records[i] + " is not an experiment record");
    ExperimentRecord r = record_from_json(j);
    kinds.insert(r.config.at("network").at("kind").get<std::string>());
    if (i == 0) {
      merged = std::move(r);
      continue;
    }
    if (r.diagnosis_labels.size() != merged.diagnosis_labels.size()) {
      throw LabelError("cannot merge " + records[i] + ": it has " + std::to_string(r.diagnosis_labels.size()) + " diagnosis classes, " +
                       records[0] + " has " + std::to_string(merged.diagnosis_labels.size()));
    }
    if (r.diagnosis_labels != merged.diagnosis_labels) throw LabelError("cannot merge " + records[i] + ": diagnosis label names differ");
    if (r.severity_scores != merged.severity_scores) throw LabelError("cannot merge " + records[i] + ": severity scales differ");
    for (auto& run : r.runs) merged.runs.push_back(std::move(run));
  }
  const std::string variant = kinds.size() == 1 ? *kinds.begin() : "mixed";
  const auto rows = comparison_rows(variant, merged);
  const fs::path dir = prepare_out(rc);
  write_text(dir / "report.csv", comparison_csv(rows));
  write_text(dir / "report_confusion.txt", confusion_report(merged));
  out << "runs merged: " << merged.runs.size() << " from " << records.size() << " record(s)\n" << kSeverityNormalization << "\n\n";
  out << comparison_table(rows) << "\n" << confusion_report(merged);
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

// Turns leftover `--key value` / `--key=value` tokens into settings.
inline std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& rest) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& tok = rest[i];
    if (tok.rfind("--", 0) != 0 || tok.size() < 3) throw ConfigError("unexpected argument '" + tok + "'");
    std::string body = tok.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < rest.size() && rest[i + 1].rfind("--", 0) != 0) {
      out.emplace_back(body, rest[++i]);
    } else {
      out.emplace_back(body, "true");
    }
  }
  return out;
}

inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"DIVINE: disentangled audio-visual variational network"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "divine 0.1.0");

  struct Flags {
    std::string config;
    std::map<std::string, std::string> values;
    std::vector<std::string> records;
  } flags;

  auto add_common = [&](CLI::App* sub) {
    sub->allow_extras();
    sub->add_option("--config", flags.config, "key=value config file");
    for (const char* key : {"seed", "out", "jobs", "modality", "suite", "token-weight-mode", "cycle", "data", "checkpoint"}) {
      sub->add_option_function<std::string>(std::string("--") + key, [&flags, key](const std::string& v) { flags.values[normalize_key(key)] = v; });
    }
    for (const char* key : {"no-cycle", "no-sparse", "no-token", "flat", "single-level", "strict"}) {
      sub->add_flag_callback(std::string("--") + key, [&flags, key] { flags.values[normalize_key(key)] = "true"; });
    }
  };
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset with ground-truth factors");
  CLI::App* train = app.add_subcommand("train", "subject-wise cross-validation; writes record.json, metrics.csv, checkpoints");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on its recorded test split");
  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation suite");
  CLI::App* report = app.add_subcommand("report", "merge experiment records into one aggregate table");
  for (CLI::App* sub : {synth, train, eval, ablate, report}) add_common(sub);
  report->allow_extras(false);
  report->add_option("records", flags.records, "record.json files")->required();

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    RunConfig rc;
    if (!flags.config.empty()) rc.load_file(flags.config);
    for (const auto& [k, v] : parse_overrides(cmd->remaining())) rc.set(k, v);
    for (const auto& [k, v] : flags.values) rc.set(k, v);

    out << "# effective config\n" << rc.echo() << "\n";
    if (cmd == synth) return cmd_synth(rc, out);
    if (cmd == train) return cmd_train(rc, out, err);
    if (cmd == eval) return cmd_eval(rc, out);
    if (cmd == ablate) return cmd_ablate(rc, out, err);
    return cmd_report(rc, flags.records, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 1;
}

}  // namespace divine::cli
