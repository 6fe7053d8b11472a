#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "divine/numerics/tensor.hpp"

namespace divine {

inline constexpr const char* kSeverityNormalization =
    "M = 100*mean|s_hat - s|/(score_max - score_min), R = 100*sqrt(mean (s_hat - s)^2)/(score_max - score_min), "
    "s_hat = sum_i p_sev[i]*score_i";

struct MetricsReport {
  double accuracy = 0.0;  // %
  double macro_f1 = 0.0;  // %
  std::optional<double> mae;   // % of score range; empty when the range is degenerate
  std::optional<double> rmse;  // same normalization
  std::vector<std::vector<long>> confusion;  // [true][predicted]
  std::size_t n = 0;
};

inline nlohmann::json to_json(const MetricsReport& m) {
  nlohmann::json j{{"A", m.accuracy}, {"F1", m.macro_f1}, {"n", m.n}, {"confusion", m.confusion}};
  j["M"] = m.mae ? nlohmann::json(*m.mae) : nlohmann::json(nullptr);
  j["R"] = m.rmse ? nlohmann::json(*m.rmse) : nlohmann::json(nullptr);
  return j;
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.accuracy = j.at("A").get<double>();
  m.macro_f1 = j.at("F1").get<double>();
  if (!j.at("M").is_null()) m.mae = j.at("M").get<double>();
  if (!j.at("R").is_null()) m.rmse = j.at("R").get<double>();
  m.confusion = j.at("confusion").get<std::vector<std::vector<long>>>();
  m.n = j.at("n").get<std::size_t>();
  return m;
}

inline std::vector<std::vector<long>> confusion_matrix(const std::vector<int>& predicted, const std::vector<int>& truth, int n_classes) {
  std::vector<std::vector<long>> cm(static_cast<std::size_t>(n_classes), std::vector<long>(static_cast<std::size_t>(n_classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n_classes || predicted[i] < 0 || predicted[i] >= n_classes) {
      throw LabelError("class index outside [0, " + std::to_string(n_classes) + ")");
    }
    ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return cm;
}

// Macro F1 in percent; a class with no support and no predictions scores 0.
inline double macro_f1(const std::vector<std::vector<long>>& cm) {
  const std::size_t k = cm.size();
  if (k == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    long tp = cm[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += cm[o][c];
      fn += cm[c][o];
    }
    const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp + fn);
    sum += denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
  }
  return 100.0 * sum / static_cast<double>(k);
}

inline std::vector<int> argmax_rows(const Matrix& p) {
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Index r = 0; r < p.rows(); ++r) {
    Index best = 0;
    p.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

// cls_probs: N x K_cls; sev_probs: N x L; scores: the L level scores;
// target_scores: per-clip clinical score.
inline MetricsReport compute_metrics(const Matrix& cls_probs, const std::vector<int>& labels, const Matrix& sev_probs,
                                     const std::vector<double>& target_scores, const std::vector<double>& scores) {
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(cls_probs.rows()) != n || static_cast<std::size_t>(sev_probs.rows()) != n || target_scores.size() != n) {
    throw DimensionError("compute_metrics: prediction count " + std::to_string(cls_probs.rows()) + " vs label count " + std::to_string(n));
  }
  if (static_cast<std::size_t>(sev_probs.cols()) != scores.size()) {
    throw DimensionError("compute_metrics: severity head has " + std::to_string(sev_probs.cols()) + " outputs but the scale has " +
                         std::to_string(scores.size()) + " levels");
  }
  MetricsReport m;
  m.n = n;
  const std::vector<int> pred = argmax_rows(cls_probs);
  m.confusion = confusion_matrix(pred, labels, static_cast<int>(cls_probs.cols()));
  long correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += pred[i] == labels[i];
  m.accuracy = n ? 100.0 * static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  m.macro_f1 = macro_f1(m.confusion);

  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (n > 0 && !scores.empty() && *hi > *lo) {
    const double range = *hi - *lo;
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s_hat = 0.0;
      for (std::size_t l = 0; l < scores.size(); ++l) s_hat += sev_probs(static_cast<Index>(i), static_cast<Index>(l)) * scores[l];
      const double e = s_hat - target_scores[i];
      abs_sum += std::abs(e);
      sq_sum += e * e;
    }
    m.mae = 100.0 * abs_sum / static_cast<double>(n) / range;
    m.rmse = 100.0 * std::sqrt(sq_sum / static_cast<double>(n)) / range;
  }
  return m;
}

// Mean and population standard deviation (ddof 0) of a metric over runs.
struct Stat {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> values;
};

inline Stat summarize(std::vector<double> values) {
  Stat s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  for (double v : s.values) s.mean += v;
  s.mean /= static_cast<double>(s.values.size());
  double ss = 0.0;
  for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.values.size()));
  return s;
}

struct MetricsSummary {
  Stat accuracy, macro_f1, mae, rmse;
  bool severity_applicable = true;
  std::vector<std::vector<long>> confusion;  // summed over runs
};

inline MetricsSummary aggregate(const std::vector<MetricsReport>& runs) {
  MetricsSummary s;
  std::vector<double> a, f, m, r;
  for (const auto& x : runs) {
    a.push_back(x.accuracy);
    f.push_back(x.macro_f1);
    if (x.mae && x.rmse) {
      m.push_back(*x.mae);
      r.push_back(*x.rmse);
    } else {
      s.severity_applicable = false;
    }
    if (s.confusion.empty()) {
      s.confusion = x.confusion;
    } else {
      if (x.confusion.size() != s.confusion.size()) throw LabelError("cannot aggregate runs with different class counts");
      for (std::size_t i = 0; i < x.confusion.size(); ++i) {
        for (std::size_t j = 0; j < x.confusion[i].size(); ++j) s.confusion[i][j] += x.confusion[i][j];
      }
    }
  }
  s.accuracy = summarize(a);
  s.macro_f1 = summarize(f);
  if (s.severity_applicable) {
    s.mae = summarize(m);
    s.rmse = summarize(r);
  }
  return s;
}

inline nlohmann::json to_json(const Stat& s) { return {{"mean", s.mean}, {"std", s.std}, {"values", s.values}}; }

inline nlohmann::json to_json(const MetricsSummary& s) {
  nlohmann::json j{{"A", to_json(s.accuracy)}, {"F1", to_json(s.macro_f1)}, {"confusion", s.confusion}};
  j["M"] = s.severity_applicable ? to_json(s.mae) : nlohmann::json(nullptr);
  j["R"] = s.severity_applicable ? to_json(s.rmse) : nlohmann::json(nullptr);
  return j;
}

// Fixed-precision number formatting shared by every CSV / table writer.
inline std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// Aligned text grid; rows are true classes, columns predictions.
inline std::string render_confusion(const std::vector<std::vector<long>>& cm, const std::vector<std::string>& labels) {
  std::size_t w = 4;
  for (const auto& l : labels) w = std::max(w, l.size());
  for (const auto& row : cm) {
    for (long v : row) w = std::max(w, std::to_string(v).size());
  }
  auto pad = [&](const std::string& s) { return std::string(w + 2 - std::min(w + 2, s.size()), ' ') + s; };
  auto name = [&](std::size_t i) { return i < labels.size() ? labels[i] : "C" + std::to_string(i); };
  std::string out = pad("true\\pred");
  for (std::size_t j = 0; j < cm.size(); ++j) out += pad(name(j));
  out += "\n";
  for (std::size_t i = 0; i < cm.size(); ++i) {
    out += pad(name(i));
    for (long v : cm[i]) out += pad(std::to_string(v));
    out += "\n";
  }
  return out;
}

}  // namespace divine
