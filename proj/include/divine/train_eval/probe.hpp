#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "divine/data/synthetic.hpp"
#include "divine/model/divine_model.hpp"

namespace divine {

// Closed-form ridge regression with an unpenalized intercept.
struct RidgeFit {
  Matrix w;  // d x k
  Matrix b;  // 1 x k

  Matrix predict(const Matrix& x) const {
    Matrix y = x * w;
    y.rowwise() += b.row(0);
    return y;
  }
};

inline RidgeFit ridge_fit(const Matrix& x, const Matrix& y, double lambda) {
  if (x.rows() != y.rows() || x.rows() == 0) throw DimensionError("ridge_fit: feature/target row mismatch");
  const Matrix mx = x.colwise().mean();
  const Matrix my = y.colwise().mean();
  const Matrix xc = x.rowwise() - mx.row(0);
  const Matrix yc = y.rowwise() - my.row(0);
  Matrix gram = xc.transpose() * xc;
  gram.diagonal().array() += lambda * static_cast<double>(x.rows());
  RidgeFit f;
  f.w = gram.ldlt().solve(xc.transpose() * yc);
  f.b = my - mx * f.w;
  return f;
}

inline Matrix one_hot(const std::vector<int>& labels, int k) {
  Matrix y = Matrix::Zero(static_cast<Index>(labels.size()), k);
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Index>(i), labels[i]) = 1.0;
  return y;
}

// Ridge classifier on one-hot targets; returns held-out accuracy in %.
inline double probe_accuracy(const Matrix& x_train, const std::vector<int>& y_train, const Matrix& x_test, const std::vector<int>& y_test,
                             int k, double lambda = 1e-3) {
  const RidgeFit f = ridge_fit(x_train, one_hot(y_train, k), lambda);
  const Matrix scores = f.predict(x_test);
  long correct = 0;
  for (Index r = 0; r < scores.rows(); ++r) {
    Index best = 0;
    scores.row(r).maxCoeff(&best);
    correct += static_cast<int>(best) == y_test[static_cast<std::size_t>(r)];
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(std::max<Index>(1, scores.rows()));
}

// Held-out R^2 averaged over target columns.
inline double probe_r2(const Matrix& x_train, const Matrix& y_train, const Matrix& x_test, const Matrix& y_test, double lambda = 1e-3) {
  if (y_train.cols() == 0) return 0.0;
  const RidgeFit f = ridge_fit(x_train, y_train, lambda);
  const Matrix pred = f.predict(x_test);
  double r2 = 0.0;
  for (Index c = 0; c < y_test.cols(); ++c) {
    const double mean = y_test.col(c).mean();
    const double ss_tot = (y_test.col(c).array() - mean).square().sum();
    const double ss_res = (y_test.col(c) - pred.col(c)).squaredNorm();
    r2 += ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
  }
  return r2 / static_cast<double>(y_test.cols());
}

// Posterior means of the utterance latents, one row per clip.
struct Latents {
  Matrix shared_v, shared_a, priv_v, priv_a;

  Matrix shared() const {
    Matrix m(shared_v.rows(), shared_v.cols() + shared_a.cols());
    m << shared_v, shared_a;
    return m;
  }
  Matrix priv() const {
    Matrix m(priv_v.rows(), priv_v.cols() + priv_a.cols());
    m << priv_v, priv_a;
    return m;
  }
};

inline Latents extract_latents(DivineModel& model, const Dataset& ds, const std::vector<std::size_t>& idx, std::size_t chunk = 64) {
  if (model.config().arch == Architecture::flat) throw UnsupportedConfiguration("flat fusion has no utterance latents to probe");
  std::vector<Matrix> sv, sa, pv, pa;
  for (std::size_t at = 0; at < idx.size(); at += chunk) {
    const std::size_t n = std::min(chunk, idx.size() - at);
    const Batch b = make_batch(ds, std::span<const std::size_t>(idx.data() + at, n));
    const auto [tr, losses] = model.trace(b, ForwardOptions::eval(Modality::both));
    sv.push_back(tr.video.mu_s);
    sa.push_back(tr.audio.mu_s);
    pv.push_back(tr.video.mu_p);
    pa.push_back(tr.audio.mu_p);
  }
  auto vstack = [](const std::vector<Matrix>& parts) {
    Index rows = 0;
    for (const auto& m : parts) rows += m.rows();
    Matrix out(rows, parts.empty() ? 0 : parts.front().cols());
    Index r = 0;
    for (const auto& m : parts) {
      out.middleRows(r, m.rows()) = m;
      r += m.rows();
    }
    return out;
  };
  return {vstack(sv), vstack(sa), vstack(pv), vstack(pa)};
}

struct ProbeReport {
  double class_from_shared = 0.0;  // accuracy %, z_shared = [z_s^v | z_s^a]
  double class_from_private = 0.0;  // accuracy %, z_priv = [z_p^v | z_p^a]
  double class_from_shared_v = 0.0, class_from_shared_a = 0.0;
  double class_from_private_v = 0.0, class_from_private_a = 0.0;
  double pv_from_private_v = 0.0, pv_from_shared = 0.0;  // R^2
  double pa_from_private_a = 0.0, pa_from_shared = 0.0;
  double permuted_shared = 0.0, permuted_private = 0.0;  // accuracy % with permuted labels
  double chance = 0.0;                                     // majority-class rate on the probe test set, %
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ProbeReport, class_from_shared, class_from_private, class_from_shared_v, class_from_shared_a,
                                   class_from_private_v, class_from_private_a, pv_from_private_v, pv_from_shared, pa_from_private_a,
                                   pa_from_shared, permuted_shared, permuted_private, chance)

// Linear probes fit on `train_idx` latents and scored on `test_idx`.
// `factors` must cover every probed clip (matched by clip_id).
inline ProbeReport disentanglement_probe(DivineModel& model, const Dataset& ds, const std::vector<FactorRow>& factors,
                                         const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& test_idx,
                                         std::uint64_t seed = 0, int permutations = 10) {
  if (factors.empty()) throw UnsupportedConfiguration("dataset has no ground-truth factor table; probes need one");
  std::map<std::string, const FactorRow*> by_id;
  for (const auto& f : factors) by_id[f.clip_id] = &f;
  auto gather = [&](const std::vector<std::size_t>& idx, std::vector<int>& cls, Matrix& pv, Matrix& pa) {
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto it = by_id.find(ds.clips[idx[r]].clip_id);
      if (it == by_id.end()) throw UnsupportedConfiguration("factor table has no row for clip " + ds.clips[idx[r]].clip_id);
      const FactorRow& f = *it->second;
      if (r == 0) {
        pv.resize(static_cast<Index>(idx.size()), f.p_v.size());
        pa.resize(static_cast<Index>(idx.size()), f.p_a.size());
      }
      cls.push_back(f.cls);
      pv.row(static_cast<Index>(r)) = f.p_v.transpose();
      pa.row(static_cast<Index>(r)) = f.p_a.transpose();
    }
  };
  std::vector<int> y_tr, y_te;
  Matrix pv_tr, pa_tr, pv_te, pa_te;
  gather(train_idx, y_tr, pv_tr, pa_tr);
  gather(test_idx, y_te, pv_te, pa_te);
  const int k = static_cast<int>(ds.manifest.diagnosis_labels.size());

  const Latents tr = extract_latents(model, ds, train_idx);
  const Latents te = extract_latents(model, ds, test_idx);

  ProbeReport r;
  r.class_from_shared = probe_accuracy(tr.shared(), y_tr, te.shared(), y_te, k);
  r.class_from_private = probe_accuracy(tr.priv(), y_tr, te.priv(), y_te, k);
  r.class_from_shared_v = probe_accuracy(tr.shared_v, y_tr, te.shared_v, y_te, k);
  r.class_from_shared_a = probe_accuracy(tr.shared_a, y_tr, te.shared_a, y_te, k);
  r.class_from_private_v = probe_accuracy(tr.priv_v, y_tr, te.priv_v, y_te, k);
  r.class_from_private_a = probe_accuracy(tr.priv_a, y_tr, te.priv_a, y_te, k);
  r.pv_from_private_v = probe_r2(tr.priv_v, pv_tr, te.priv_v, pv_te);
  r.pv_from_shared = probe_r2(tr.shared(), pv_tr, te.shared(), pv_te);
  r.pa_from_private_a = probe_r2(tr.priv_a, pa_tr, te.priv_a, pa_te);
  r.pa_from_shared = probe_r2(tr.shared(), pa_tr, te.shared(), pa_te);

  std::vector<long> counts(static_cast<std::size_t>(k), 0);
  for (int y : y_te) ++counts[static_cast<std::size_t>(y)];
  r.chance = 100.0 * static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(std::max<std::size_t>(1, y_te.size()));

  // Label-destruction control: shuffle the labels of every clip, refit, average.
  std::mt19937_64 rng(seed);
  for (int p = 0; p < permutations; ++p) {
    std::vector<int> ptr = y_tr, pte = y_te;
    std::shuffle(ptr.begin(), ptr.end(), rng);
    std::shuffle(pte.begin(), pte.end(), rng);
    r.permuted_shared += probe_accuracy(tr.shared(), ptr, te.shared(), pte, k) / permutations;
    r.permuted_private += probe_accuracy(tr.priv(), ptr, te.priv(), pte, k) / permutations;
  }
  return r;
}

}  // namespace divine
