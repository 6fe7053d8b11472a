#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "divine/data/container.hpp"

namespace divine {

enum class TaskTag { speech, nonspeech };

inline std::string to_string(TaskTag t) { return t == TaskTag::speech ? "speech" : "nonspeech"; }

inline TaskTag parse_task_tag(const std::string& s) {
  if (s == "speech") return TaskTag::speech;
  if (s == "nonspeech") return TaskTag::nonspeech;
  throw LabelError("unknown task_tag '" + s + "'");
}

struct SeverityLevel {
  std::string name;
  double score = 0.0;
};

struct ClipRecord {
  std::string clip_id;
  std::string subject_id;
  TaskTag task_tag = TaskTag::speech;
  std::string video_path;
  std::optional<std::string> audio_path;
  int diagnosis = 0;
  int severity_level = 0;
  std::optional<double> severity_score;
};

struct Manifest {
  std::vector<std::string> diagnosis_labels{"HC", "ALS", "Stroke"};
  std::vector<SeverityLevel> severity_levels;
  Index d_v = 0;
  Index d_a = 0;
  std::vector<ClipRecord> clips;

  std::vector<double> severity_scores() const {
    std::vector<double> s;
    for (const auto& l : severity_levels) s.push_back(l.score);
    return s;
  }
};

struct EmbeddingClip {
  std::string clip_id;
  std::string subject_id;
  TaskTag task_tag = TaskTag::speech;
  Matrix video;
  std::optional<Matrix> audio;
  int diagnosis = 0;
  int severity_level = 0;
  std::optional<double> severity_score;
};

struct Dataset {
  Manifest manifest;
  std::vector<EmbeddingClip> clips;

  // Clinical score used as the regression target of a clip.
  double target_score(const EmbeddingClip& c) const {
    return c.severity_score ? *c.severity_score : manifest.severity_levels.at(static_cast<std::size_t>(c.severity_level)).score;
  }

  std::vector<std::string> subjects() const {
    std::set<std::string> s;
    for (const auto& c : clips) s.insert(c.subject_id);
    return {s.begin(), s.end()};
  }
};

// ---------------------------------------------------------------------------
// Manifest JSON
// ---------------------------------------------------------------------------

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json j;
  j["diagnosis_labels"] = m.diagnosis_labels;
  j["severity_levels"] = nlohmann::json::array();
  for (const auto& l : m.severity_levels) j["severity_levels"].push_back({{"name", l.name}, {"score", l.score}});
  j["dims"] = {{"d_v", m.d_v}, {"d_a", m.d_a}};
  j["clips"] = nlohmann::json::array();
  for (const auto& c : m.clips) {
    nlohmann::json r{{"clip_id", c.clip_id},
                     {"subject_id", c.subject_id},
                     {"task_tag", to_string(c.task_tag)},
                     {"video_path", c.video_path},
                     {"diagnosis", c.diagnosis},
                     {"severity_level", c.severity_level}};
    if (c.audio_path) r["audio_path"] = *c.audio_path;
    if (c.severity_score) r["severity_score"] = *c.severity_score;
    j["clips"].push_back(std::move(r));
  }
  return j;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    m.diagnosis_labels = j.at("diagnosis_labels").get<std::vector<std::string>>();
    for (const auto& l : j.at("severity_levels")) m.severity_levels.push_back({l.at("name").get<std::string>(), l.at("score").get<double>()});
    m.d_v = j.at("dims").at("d_v").get<Index>();
    m.d_a = j.at("dims").at("d_a").get<Index>();
    for (const auto& r : j.at("clips")) {
      ClipRecord c;
      c.clip_id = r.at("clip_id").get<std::string>();
      c.subject_id = r.at("subject_id").get<std::string>();
      c.task_tag = parse_task_tag(r.value("task_tag", std::string("speech")));
      c.video_path = r.at("video_path").get<std::string>();
      if (r.contains("audio_path") && !r["audio_path"].is_null()) c.audio_path = r["audio_path"].get<std::string>();
      c.diagnosis = r.at("diagnosis").get<int>();
      c.severity_level = r.at("severity_level").get<int>();
      if (r.contains("severity_score") && !r["severity_score"].is_null()) c.severity_score = r["severity_score"].get<double>();
      m.clips.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError({std::string("manifest schema: ") + e.what()});
  }
  return m;
}

// Label-space checks that do not touch the filesystem.
inline std::vector<std::string> validate_manifest(const Manifest& m) {
  std::vector<std::string> issues;
  if (m.diagnosis_labels.size() < 2) issues.push_back("need at least 2 diagnosis labels");
  if (m.severity_levels.size() < 2) issues.push_back("need at least 2 severity levels");
  for (std::size_t i = 1; i < m.severity_levels.size(); ++i) {
    if (!(m.severity_levels[i].score > m.severity_levels[i - 1].score)) {
      issues.push_back("severity scores must be strictly increasing (level " + m.severity_levels[i].name + ")");
    }
  }
  if (m.d_v < 1) issues.push_back("dims.d_v must be >= 1");
  if (m.d_a < 1) issues.push_back("dims.d_a must be >= 1");
  std::set<std::string> ids;
  for (const auto& c : m.clips) {
    if (!ids.insert(c.clip_id).second) issues.push_back("duplicate clip_id " + c.clip_id);
    if (c.diagnosis < 0 || c.diagnosis >= static_cast<int>(m.diagnosis_labels.size())) {
      issues.push_back("clip " + c.clip_id + ": diagnosis " + std::to_string(c.diagnosis) + " out of range");
    }
    if (c.severity_level < 0 || c.severity_level >= static_cast<int>(m.severity_levels.size())) {
      issues.push_back("clip " + c.clip_id + ": severity_level " + std::to_string(c.severity_level) + " out of range");
    }
  }
  return issues;
}

// Loads every referenced container and checks the dataset invariants. All
// problems are collected into a single ValidationError.
inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError({"cannot open manifest " + manifest_path.string()});
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError({std::string("manifest is not valid JSON: ") + e.what()});
  }
  Dataset ds;
  ds.manifest = manifest_from_json(j);
  std::vector<std::string> issues = validate_manifest(ds.manifest);
  const auto base = manifest_path.parent_path();

  auto load = [&](const ClipRecord& rec, const std::string& rel, const char* which, Index dim) -> std::optional<Matrix> {
    const auto path = base / rel;
    if (!std::filesystem::exists(path)) {
      issues.push_back("clip " + rec.clip_id + ": missing " + which + " container " + path.string());
      return std::nullopt;
    }
    try {
      Matrix m = read_container(path);
      if (m.rows() < 2) issues.push_back("clip " + rec.clip_id + ": " + which + " sequence shorter than 2 steps");
      if (m.cols() != dim) {
        issues.push_back("clip " + rec.clip_id + ": inconsistent " + which + " dimension " + std::to_string(m.cols()) +
                         " (manifest declares " + std::to_string(dim) + ")");
      }
      return m;
    } catch (const ParseError& e) {
      issues.push_back("clip " + rec.clip_id + ": " + which + " container unreadable: " + e.what());
      return std::nullopt;
    }
  };

  for (const auto& rec : ds.manifest.clips) {
    EmbeddingClip clip;
    clip.clip_id = rec.clip_id;
    clip.subject_id = rec.subject_id;
    clip.task_tag = rec.task_tag;
    clip.diagnosis = rec.diagnosis;
    clip.severity_level = rec.severity_level;
    clip.severity_score = rec.severity_score;
    auto video = load(rec, rec.video_path, "video", ds.manifest.d_v);
    if (video) clip.video = std::move(*video);
    if (rec.audio_path) clip.audio = load(rec, *rec.audio_path, "audio", ds.manifest.d_a);
    ds.clips.push_back(std::move(clip));
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return ds;
}

// Writes containers under <dir>/clips and the manifest to <dir>/manifest.json.
// Clip paths in the manifest are rewritten relative to <dir>.
inline std::filesystem::path save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "clips");
  Manifest m = ds.manifest;
  m.clips.clear();
  for (const auto& c : ds.clips) {
    ClipRecord r;
    r.clip_id = c.clip_id;
    r.subject_id = c.subject_id;
    r.task_tag = c.task_tag;
    r.diagnosis = c.diagnosis;
    r.severity_level = c.severity_level;
    r.severity_score = c.severity_score;
    r.video_path = "clips/" + c.clip_id + "_v.dve";
    write_container(c.video, dir / r.video_path);
    if (c.audio) {
      r.audio_path = "clips/" + c.clip_id + "_a.dve";
      write_container(*c.audio, dir / *r.audio_path);
    }
    m.clips.push_back(std::move(r));
  }
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << manifest_to_json(m).dump(2) << "\n";
  return path;
}

}  // namespace divine
