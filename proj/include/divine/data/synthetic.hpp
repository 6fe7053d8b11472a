#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "divine/data/dataset.hpp"
#include "divine/numerics/losses.hpp"

namespace divine {

// Generator for clips with known shared (class-bearing) and private
// (per-modality, label-free) factors.
struct SyntheticSpec {
  int n_subjects = 40;
  int clips_per_subject = 30;
  int n_classes = 3;
  int d_shared0 = 8;
  int d_priv0_v = 8;
  int d_priv0_a = 8;
  int d_v = 64;
  int d_a = 64;
  int t_min_v = 28;
  int t_max_v = 36;
  int t_min_a = 28;
  int t_max_a = 36;
  double delta = 4.0;         // pairwise distance between class means of s
  double noise = 0.5;         // observation noise sigma_n
  double drift = 0.1;         // temporal drift amplitude
  bool hc_none_level = true;  // class 0 gets a dedicated "None" severity level
  std::uint64_t seed = 0;
};

inline std::vector<std::string> validate_spec(const SyntheticSpec& s) {
  std::vector<std::string> issues;
  if (s.n_classes < 2) issues.push_back("n_classes must be >= 2 (got " + std::to_string(s.n_classes) + ")");
  if (s.n_subjects < std::max(1, s.n_classes)) issues.push_back("n_subjects must be >= n_classes");
  if (s.clips_per_subject < 1) issues.push_back("clips_per_subject must be >= 1");
  if (s.d_shared0 < s.n_classes) issues.push_back("d_shared0 must be >= n_classes to place separated class means");
  if (s.d_priv0_v < 0 || s.d_priv0_a < 0) issues.push_back("private factor dims must be >= 0");
  if (s.d_shared0 + std::max(s.d_priv0_v, s.d_priv0_a) > std::min(s.d_v, s.d_a)) {
    issues.push_back("d_shared0 + d_priv0 must not exceed min(d_v, d_a)");
  }
  if (s.t_min_v < 2 || s.t_min_a < 2) issues.push_back("sequence lengths must be >= 2");
  if (s.t_max_v < s.t_min_v || s.t_max_a < s.t_min_a) issues.push_back("t_max must be >= t_min");
  if (!(s.delta >= 0.0)) issues.push_back("delta must be >= 0");
  if (!(s.noise >= 0.0)) issues.push_back("noise must be >= 0");
  return issues;
}

struct FactorRow {
  std::string clip_id;
  int cls = 0;
  int severity = 0;
  Vector s;
  Vector p_v;
  Vector p_a;
};

struct SyntheticDataset {
  Dataset dataset;
  std::vector<FactorRow> factors;  // one row per clip, same order
  std::vector<Vector> class_means;
};

inline SyntheticDataset synth_generate(const SyntheticSpec& spec) {
  if (auto issues = validate_spec(spec); !issues.empty()) throw ValidationError(std::move(issues), "synthetic spec");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  struct Mixer {
    Matrix w;
    Vector b;
    Vector drift;
  };
  auto make_mixer = [&](int d_out, int d_priv) {
    const int d_in = spec.d_shared0 + d_priv;
    Mixer m;
    m.w = standard_normal(d_out, d_in, rng) / std::sqrt(static_cast<double>(d_in));
    m.b = 0.1 * standard_normal(d_out, 1, rng);
    m.drift = spec.drift * standard_normal(d_out, 1, rng);
    return m;
  };
  const Mixer mix_v = make_mixer(spec.d_v, spec.d_priv0_v);
  const Mixer mix_a = make_mixer(spec.d_a, spec.d_priv0_a);

  SyntheticDataset out;
  for (int c = 0; c < spec.n_classes; ++c) {
    Vector mu = Vector::Zero(spec.d_shared0);
    mu[c] = spec.delta / std::sqrt(2.0);
    out.class_means.push_back(mu);
  }

  auto emit = [&](const Mixer& m, const Vector& s, const Vector& p, int t_min, int t_max) {
    std::uniform_int_distribution<int> len(t_min, t_max);
    const int steps = len(rng);
    Vector factors(s.size() + p.size());
    factors << s, p;
    const Vector base = m.w * factors + m.b;
    Matrix x(steps, base.size());
    for (int t = 0; t < steps; ++t) {
      const Vector pre = base + m.drift * (static_cast<double>(t) / steps);
      for (Index j = 0; j < pre.size(); ++j) x(t, j) = std::tanh(pre[j]) + spec.noise * normal(rng);
    }
    return round_to_float(x);
  };

  auto draw = [&](int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };

  std::vector<double> deviation;
  for (int subj = 0; subj < spec.n_subjects; ++subj) {
    char sid[32];
    std::snprintf(sid, sizeof sid, "S%03d", subj);
    for (int k = 0; k < spec.clips_per_subject; ++k) {
      // Classes cycle within each subject so every subject group stays balanced.
      const int cls = (subj + k) % spec.n_classes;
      char cid[48];
      std::snprintf(cid, sizeof cid, "%s_c%03d", sid, k);
      FactorRow f;
      f.clip_id = cid;
      f.cls = cls;
      f.s = out.class_means[static_cast<std::size_t>(cls)] + draw(spec.d_shared0);
      f.p_v = draw(spec.d_priv0_v);
      f.p_a = draw(spec.d_priv0_a);
      EmbeddingClip clip;
      clip.clip_id = cid;
      clip.subject_id = sid;
      clip.task_tag = (k % 2 == 0) ? TaskTag::speech : TaskTag::nonspeech;
      clip.diagnosis = cls;
      clip.video = emit(mix_v, f.s, f.p_v, spec.t_min_v, spec.t_max_v);
      clip.audio = emit(mix_a, f.s, f.p_a, spec.t_min_a, spec.t_max_a);
      deviation.push_back((f.s - out.class_means[static_cast<std::size_t>(cls)]).norm());
      out.dataset.clips.push_back(std::move(clip));
      out.factors.push_back(std::move(f));
    }
  }

  // Severity: tercile of ||s - mu_c|| among the clips that get graded.
  Manifest& m = out.dataset.manifest;
  m.diagnosis_labels.clear();
  const std::vector<std::string> default_names{"HC", "ALS", "Stroke"};
  for (int c = 0; c < spec.n_classes; ++c) {
    m.diagnosis_labels.push_back(c < 3 ? default_names[static_cast<std::size_t>(c)] : "C" + std::to_string(c));
  }
  const int offset = spec.hc_none_level ? 1 : 0;
  if (spec.hc_none_level) m.severity_levels.push_back({"None", 0.0});
  m.severity_levels.push_back({"Mild", 1.0});
  m.severity_levels.push_back({"Moderate", 2.0});
  m.severity_levels.push_back({"Severe", 3.0});
  m.d_v = spec.d_v;
  m.d_a = spec.d_a;

  std::vector<double> graded;
  for (std::size_t i = 0; i < out.factors.size(); ++i) {
    if (!(spec.hc_none_level && out.factors[i].cls == 0)) graded.push_back(deviation[i]);
  }
  std::sort(graded.begin(), graded.end());
  auto quantile = [&](double q) {
    if (graded.empty()) return 0.0;
    return graded[std::min(graded.size() - 1, static_cast<std::size_t>(q * static_cast<double>(graded.size())))];
  };
  const double q1 = quantile(1.0 / 3.0);
  const double q2 = quantile(2.0 / 3.0);
  for (std::size_t i = 0; i < out.factors.size(); ++i) {
    int level = 0;
    if (!(spec.hc_none_level && out.factors[i].cls == 0)) {
      level = offset + (deviation[i] < q1 ? 0 : (deviation[i] < q2 ? 1 : 2));
    }
    out.factors[i].severity = level;
    auto& clip = out.dataset.clips[i];
    clip.severity_level = level;
    clip.severity_score = m.severity_levels[static_cast<std::size_t>(level)].score;
  }
  return out;
}

inline void write_factor_table(const SyntheticDataset& sd, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (sd.factors.empty()) {
    out << "clip_id,class,severity\n";
    return;
  }
  const auto& f0 = sd.factors.front();
  out << "clip_id,class,severity";
  for (Index i = 0; i < f0.s.size(); ++i) out << ",s_" << i;
  for (Index i = 0; i < f0.p_v.size(); ++i) out << ",pv_" << i;
  for (Index i = 0; i < f0.p_a.size(); ++i) out << ",pa_" << i;
  out << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& f : sd.factors) {
    out << f.clip_id << "," << f.cls << "," << f.severity;
    for (Index i = 0; i < f.s.size(); ++i) out << "," << num(f.s[i]);
    for (Index i = 0; i < f.p_v.size(); ++i) out << "," << num(f.p_v[i]);
    for (Index i = 0; i < f.p_a.size(); ++i) out << "," << num(f.p_a[i]);
    out << "\n";
  }
}

// Parses a factor table written by write_factor_table.
inline std::vector<FactorRow> read_factor_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open factor table " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty factor table " + path.string());
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const auto pos = s.find(',', start);
      out.push_back(s.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return out;
  };
  const auto header = split(line);
  int ns = 0, nv = 0, na = 0;
  for (const auto& h : header) {
    if (h.rfind("s_", 0) == 0) ++ns;
    if (h.rfind("pv_", 0) == 0) ++nv;
    if (h.rfind("pa_", 0) == 0) ++na;
  }
  std::vector<FactorRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != static_cast<std::size_t>(3 + ns + nv + na)) throw std::runtime_error("malformed factor row: " + line);
    FactorRow r;
    r.clip_id = cells[0];
    r.cls = std::stoi(cells[1]);
    r.severity = std::stoi(cells[2]);
    r.s.resize(ns);
    r.p_v.resize(nv);
    r.p_a.resize(na);
    std::size_t c = 3;
    for (int i = 0; i < ns; ++i) r.s[i] = std::stod(cells[c++]);
    for (int i = 0; i < nv; ++i) r.p_v[i] = std::stod(cells[c++]);
    for (int i = 0; i < na; ++i) r.p_a[i] = std::stod(cells[c++]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace divine
