#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "divine/numerics/params.hpp"

namespace divine {

struct GroupCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

struct GradCheckReport {
  std::vector<GroupCheck> groups;
  double max_rel_error = 0.0;
  double h = 1e-3;

  const GroupCheck& group(const std::string& name) const {
    for (const auto& g : groups) {
      if (g.name == name) return g;
    }
    throw InvariantViolation("grad check has no group " + name);
  }
};

struct GradCheckOptions {
  double h = 1e-3;
  std::size_t coords_per_group = 50;  // all coordinates when the group is smaller
  std::uint64_t seed = 0;
  // 2: (f(x+h) - f(x-h)) / 2h, error O(h^2).
  // 4: (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h, error O(h^4).
  int stencil = 4;
  double floor = 1e-7;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps exact zeros (dead units)
// from turning roundoff in the difference quotient into a large ratio.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central-difference check of analytic gradients. `loss` must read the
// current parameter values; `analytic[i]` is the gradient of trainable
// group i (same order as params). If `pattern` is given it returns a
// signature of the piecewise-linear activation pattern after the most
// recent loss evaluation; coordinates whose +-h probes land on a different
// pattern straddle a kink and are skipped (and counted).
inline GradCheckReport grad_check(const std::function<double()>& loss, ParamSet& params, const std::vector<Matrix>& analytic,
                                  const GradCheckOptions& opts = {},
                                  const std::function<std::uint64_t()>& pattern = {}) {
  if (opts.stencil != 2 && opts.stencil != 4) throw ConfigError("grad_check stencil must be 2 or 4");
  if (!(opts.h > 0.0)) throw ConfigError("grad_check step must be > 0");
  const double base = loss();
  const std::uint64_t base_pattern = pattern ? pattern() : 0;
  if (loss() != base) throw OracleInvalid("loss is not deterministic: two evaluations at the same point differ");

  GradCheckReport report;
  report.h = opts.h;
  std::mt19937_64 rng(opts.seed);
  std::size_t g = 0;
  for (auto& p : params) {
    if (!p.trainable) continue;
    if (g >= analytic.size()) throw DimensionError("grad_check analytic: fewer groups than trainable params");
    const Matrix& a = analytic[g++];
    require_shape(a, p.value.rows(), p.value.cols(), ("grad_check analytic " + p.name).c_str());

    std::vector<Index> coords(static_cast<std::size_t>(p.value.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (coords.size() > opts.coords_per_group) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.coords_per_group);
    }

    GroupCheck gc;
    gc.name = p.name;
    double* data = p.value.data();
    for (Index c : coords) {
      const double orig = data[c];
      bool kink = false;
      auto probe = [&](double offset) {
        data[c] = orig + offset;
        const double f = loss();
        if (pattern && pattern() != base_pattern) kink = true;
        return f;
      };
      double numeric = 0.0;
      if (opts.stencil == 2) {
        numeric = (probe(opts.h) - probe(-opts.h)) / (2.0 * opts.h);
      } else {
        numeric = (-probe(2 * opts.h) + 8 * probe(opts.h) - 8 * probe(-opts.h) + probe(-2 * opts.h)) / (12.0 * opts.h);
      }
      data[c] = orig;
      if (kink) {
        ++gc.skipped_kinks;
        continue;
      }
      gc.max_rel_error = std::max(gc.max_rel_error, relative_error(a.data()[c], numeric, opts.floor));
      ++gc.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, gc.max_rel_error);
    report.groups.push_back(gc);
  }
  if (pattern) loss();  // leave the caller's trace consistent with the unperturbed point
  return report;
}

// FNV-1a style fold used to build activation-pattern signatures.
inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

}  // namespace divine
