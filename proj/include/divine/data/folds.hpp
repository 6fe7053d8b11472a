#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "divine/data/dataset.hpp"

namespace divine {

struct FoldPlan {
  int k = 5;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignments;  // subject_id -> fold

  int fold_of(const std::string& subject) const { return assignments.at(subject); }
};

// Subjects are sorted, shuffled with the seed, then dealt round-robin, so
// the plan depends only on the subject set and the seed.
inline FoldPlan subject_kfold(const std::vector<std::string>& subjects_in, int k = 5, std::uint64_t seed = 0) {
  std::vector<std::string> subjects = subjects_in;
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  if (static_cast<int>(subjects.size()) < k) {
    throw ConfigError("subject-wise k-fold needs at least k=" + std::to_string(k) + " subjects, got " + std::to_string(subjects.size()));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < subjects.size(); ++i) plan.assignments[subjects[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return plan;
}

inline FoldPlan subject_kfold(const Dataset& ds, int k = 5, std::uint64_t seed = 0) { return subject_kfold(ds.subjects(), k, seed); }

// Clip indices for one rotation: fold i is test, fold (i+1) mod k is
// validation, the rest is training.
struct Split {
  int test_fold = 0;
  int val_fold = 1;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

inline Split make_split(const Dataset& ds, const FoldPlan& plan, int test_fold) {
  if (test_fold < 0 || test_fold >= plan.k) throw ConfigError("fold index out of range");
  Split s;
  s.test_fold = test_fold;
  s.val_fold = (test_fold + 1) % plan.k;
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    const int f = plan.fold_of(ds.clips[i].subject_id);
    if (f == s.test_fold) {
      s.test.push_back(i);
    } else if (f == s.val_fold) {
      s.val.push_back(i);
    } else {
      s.train.push_back(i);
    }
  }
  return s;
}

// Brute-force scan: number of subjects whose clips appear in more than one
// of the given index sets.
inline std::size_t count_leaking_subjects(const Dataset& ds, const std::vector<std::vector<std::size_t>>& parts) {
  std::map<std::string, std::vector<int>> seen;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (std::size_t idx : parts[p]) {
      auto& v = seen[ds.clips[idx].subject_id];
      if (std::find(v.begin(), v.end(), static_cast<int>(p)) == v.end()) v.push_back(static_cast<int>(p));
    }
  }
  std::size_t leaks = 0;
  for (const auto& [subject, ps] : seen) {
    if (ps.size() > 1) ++leaks;
  }
  return leaks;
}

}  // namespace divine
