#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <random>
#include <set>

#include "divine/train_eval/ablation.hpp"
#include "divine/train_eval/experiment.hpp"
#include "divine/train_eval/metrics.hpp"
#include "divine/train_eval/probe.hpp"
#include "divine/train_eval/trainer.hpp"
#include "test_util.hpp"

namespace divine {
namespace {

Matrix one_hot_rows(const std::vector<int>& labels, int k) {
  Matrix m = Matrix::Zero(static_cast<Index>(labels.size()), k);
  for (std::size_t i = 0; i < labels.size(); ++i) m(static_cast<Index>(i), labels[i]) = 1.0;
  return m;
}

// ---------------------------------------------------------------- metrics

TEST(Metrics, PerfectPredictions) {
  const std::vector<int> y{0, 1, 2, 1, 0};
  const std::vector<int> sev{0, 2, 3, 1, 0};
  const std::vector<double> scores{0, 1, 2, 3};
  std::vector<double> target;
  for (int s : sev) target.push_back(scores[static_cast<std::size_t>(s)]);
  const MetricsReport m = compute_metrics(one_hot_rows(y, 3), y, one_hot_rows(sev, 4), target, scores);
  EXPECT_EQ(m.accuracy, 100.0);
  EXPECT_EQ(m.macro_f1, 100.0);
  EXPECT_EQ(*m.mae, 0.0);
  EXPECT_EQ(*m.rmse, 0.0);
  EXPECT_EQ(m.confusion, (std::vector<std::vector<long>>{{2, 0, 0}, {0, 2, 0}, {0, 0, 1}}));
}

TEST(Metrics, AllPredictedClassZeroOnBalancedPair) {
  const std::vector<int> y{0, 0, 1, 1};
  const MetricsReport m = compute_metrics(one_hot_rows({0, 0, 0, 0}, 2), y, Matrix::Constant(4, 2, 0.5), {0, 0, 1, 1}, {0, 1});
  EXPECT_EQ(m.accuracy, 50.0);
  // class 0: precision 1/2, recall 1 -> F1 2/3; class 1: F1 0
  EXPECT_NEAR(m.macro_f1, 100.0 * (2.0 / 3.0 + 0.0) / 2.0, 1e-12);
  EXPECT_NEAR(m.macro_f1, 33.33, 5e-3);
}

TEST(Metrics, UniformSeverityAroundTruth) {
  const MetricsReport m = compute_metrics(one_hot_rows({0, 1}, 2), {0, 1}, Matrix::Constant(2, 3, 1.0 / 3.0), {2.0, 2.0}, {1, 2, 3});
  EXPECT_NEAR(*m.mae, 0.0, 1e-12);
  EXPECT_NEAR(*m.rmse, 0.0, 1e-12);
}

TEST(Metrics, SeverityErrorsArePercentOfRange) {
  // predicted scores 1 and 3 on a 0..4 scale, truth 2 and 2
  Matrix sev = Matrix::Zero(2, 3);
  sev(0, 0) = 1.0;
  sev(1, 2) = 1.0;
  const MetricsReport m = compute_metrics(one_hot_rows({0, 1}, 2), {0, 1}, sev, {2.0, 2.0}, {1, 2, 3});
  EXPECT_NEAR(*m.mae, 100.0 * 1.0 / 2.0, 1e-12);
  EXPECT_NEAR(*m.rmse, 100.0 * 1.0 / 2.0, 1e-12);
  const MetricsReport d = compute_metrics(one_hot_rows({0, 1}, 2), {0, 1}, sev, {2.0, 2.0}, {2, 2, 2});
  EXPECT_FALSE(d.mae.has_value());
  EXPECT_EQ(to_json(d).at("M"), nullptr);
}

TEST(Metrics, ConfusionRowsSumToSupportAndShapesChecked) {
  std::mt19937_64 rng(4);
  const Matrix probs = softmax(standard_normal(40, 3, rng));
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) y.push_back(i % 3);
  const MetricsReport m = compute_metrics(probs, y, Matrix::Constant(40, 2, 0.5), std::vector<double>(40, 0.0), {0, 1});
  for (int c = 0; c < 3; ++c) {
    long row = 0;
    for (long v : m.confusion[static_cast<std::size_t>(c)]) row += v;
    EXPECT_EQ(row, std::count(y.begin(), y.end(), c));
  }
  EXPECT_GE(m.macro_f1, 0.0);
  EXPECT_LE(m.macro_f1, 100.0);
  EXPECT_EQ(to_json(m).dump(), to_json(compute_metrics(probs, y, Matrix::Constant(40, 2, 0.5), std::vector<double>(40, 0.0), {0, 1})).dump());
  EXPECT_THROW(compute_metrics(probs.topRows(39), y, Matrix::Constant(40, 2, 0.5), std::vector<double>(40, 0.0), {0, 1}), DimensionError);
  EXPECT_THROW(compute_metrics(probs, y, Matrix::Constant(40, 2, 0.5), std::vector<double>(40, 0.0), {0, 1, 2}), DimensionError);
}

TEST(Metrics, AggregateRecomputesFromValues) {
  std::vector<MetricsReport> runs;
  const double acc[] = {80.0, 90.0, 95.5, 70.25};
  for (double a : acc) {
    MetricsReport r;
    r.accuracy = a;
    r.macro_f1 = a - 3.0;
    r.mae = 100.0 - a;
    r.rmse = 2.0 * (100.0 - a);
    r.confusion = {{1, 0}, {2, 3}};
    runs.push_back(r);
  }
  const MetricsSummary s = aggregate(runs);
  double mean = 0.0;
  for (double a : acc) mean += a / 4.0;
  double var = 0.0;
  for (double a : acc) var += (a - mean) * (a - mean) / 4.0;
  EXPECT_NEAR(s.accuracy.mean, mean, 1e-12);
  EXPECT_NEAR(s.accuracy.std, std::sqrt(var), 1e-12);
  EXPECT_NEAR(s.macro_f1.mean, mean - 3.0, 1e-12);
  EXPECT_NEAR(s.rmse.std, 2.0 * std::sqrt(var), 1e-12);
  EXPECT_EQ(s.confusion, (std::vector<std::vector<long>>{{4, 0}, {8, 12}}));
  runs[1].mae.reset();
  EXPECT_FALSE(aggregate(runs).severity_applicable);
  runs[2].confusion = {{1}};
  EXPECT_THROW(aggregate(runs), LabelError);
}

TEST(Metrics, JsonRoundTrip) {
  MetricsReport r;
  r.accuracy = 1.0 / 3.0;
  r.macro_f1 = 0.1;
  r.mae = 2.5;
  r.confusion = {{1, 2}, {3, 4}};
  r.n = 10;
  const MetricsReport back = metrics_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.accuracy, r.accuracy);
  EXPECT_EQ(back.mae, r.mae);
  EXPECT_FALSE(back.rmse.has_value());
  EXPECT_EQ(back.confusion, r.confusion);
}

// ---------------------------------------------------------------- trainer

// One scalar parameter w. Training steps see a unit gradient; validation
// loss is scripted per evaluation call.
class ScriptedNetwork : public Network {
 public:
  explicit ScriptedNetwork(std::function<double(int, double)> val_loss) : val_loss_(std::move(val_loss)) {
    params_.add("w", Matrix::Zero(1, 1));
  }
  std::string kind() const override { return "scripted"; }
  Prediction forward(const Batch& b, const ForwardOptions& opts) override {
    Prediction p;
    p.cls_probs = Matrix::Constant(static_cast<Index>(b.size()), 3, 1.0 / 3.0);
    p.sev_probs = Matrix::Constant(static_cast<Index>(b.size()), 4, 0.25);
    if (opts.phase == Phase::eval) {
      p.losses.total = val_loss_(evals_++, params_.value(0)(0, 0));
    } else {
      p.losses.total = train_losses_.empty() ? 1.0 : train_losses_[std::min(steps_, train_losses_.size() - 1)];
      ++steps_;
    }
    return p;
  }
  Prediction forward_backward(const Batch& b, const ForwardOptions& opts) override {
    Prediction p = forward(b, opts);
    params_.grad(0).setConstant(1.0);
    return p;
  }
  nlohmann::json config_json() const override { return {{"kind", "scripted"}}; }
  const LossConfig& loss_config() const override { return loss_; }
  void set_loss_config(const LossConfig& c) override { loss_ = c; }
  bool supports(Modality) const override { return true; }

  std::vector<double> train_losses_;

 private:
  std::function<double(int, double)> val_loss_;
  LossConfig loss_;
  int evals_ = 0;
  std::size_t steps_ = 0;
};

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> v;
  for (std::size_t i = lo; i < hi; ++i) v.push_back(i);
  return v;
}

TEST(Trainer, PatienceOneStopsAfterTwoEpochs) {
  const auto data = synth_generate(testing::tiny_spec());
  ScriptedNetwork net([](int, double) { return 1.0; });
  TrainConfig tc;
  tc.patience = 1;
  tc.batch = 4;
  const TrainResult r = train(net, data.dataset, range(0, 8), range(8, 12), tc);
  EXPECT_EQ(r.epochs_run, 2);
  EXPECT_EQ(r.best_epoch, 1);
  EXPECT_TRUE(r.stopped_early);
  tc.patience = 3;
  ScriptedNetwork net3([](int, double) { return 1.0; });
  EXPECT_EQ(train(net3, data.dataset, range(0, 8), range(8, 12), tc).epochs_run, 4);
}

TEST(Trainer, RestoresBestValidationSnapshot) {
  const auto data = synth_generate(testing::tiny_spec());
  // Adam moves w by -lr per step; validation loss is minimal at w = -0.05.
  ScriptedNetwork net([](int, double w) { return (w + 0.05) * (w + 0.05); });
  TrainConfig tc;
  tc.lr = 0.01;
  tc.batch = 8;
  tc.patience = 2;
  tc.max_epochs = 50;
  const TrainResult r = train(net, data.dataset, range(0, 8), range(8, 12), tc);
  EXPECT_EQ(r.best_epoch, 5);
  EXPECT_EQ(r.epochs_run, 7);
  EXPECT_NEAR(net.params().value(0)(0, 0), -0.05, 1e-9);
  for (const auto& e : r.curves) EXPECT_GE(e.val.total, r.best_val);
}

TEST(Trainer, RunsAllEpochsWhileImproving) {
  const auto data = synth_generate(testing::tiny_spec());
  ScriptedNetwork net([](int call, double) { return 10.0 - call; });
  TrainConfig tc;
  tc.max_epochs = 6;
  const TrainResult r = train(net, data.dataset, range(0, 8), range(8, 12), tc);
  EXPECT_EQ(r.epochs_run, 6);
  EXPECT_EQ(r.best_epoch, 6);
  EXPECT_FALSE(r.stopped_early);
}

TEST(Trainer, DivergenceCarriesLastFiniteLosses) {
  const auto data = synth_generate(testing::tiny_spec());
  ScriptedNetwork net([](int, double) { return 1.0; });
  net.train_losses_ = {3.0, 2.0, std::nan("")};
  TrainConfig tc;
  tc.batch = 4;
  try {
    train(net, data.dataset, range(0, 8), range(8, 12), tc);
    FAIL();
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.last_finite().total, 2.0);
    EXPECT_EQ(e.epoch(), 2);
  }
}

TEST(Trainer, EmptySplitsAndBadConfig) {
  const auto data = synth_generate(testing::tiny_spec());
  DivineModel net(testing::tiny_model(), {}, 1);
  EXPECT_THROW(train(net, data.dataset, {}, range(0, 2), TrainConfig{}), ConfigError);
  EXPECT_THROW(train(net, data.dataset, range(0, 2), {}, TrainConfig{}), ConfigError);
  TrainConfig bad;
  bad.batch = 0;
  EXPECT_THROW(train(net, data.dataset, range(0, 2), range(2, 4), bad), ConfigError);
  bad = TrainConfig{};
  bad.flat = bad.single_level = true;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Trainer, ZeroLearningRateLeavesParametersUnchanged) {
  const auto data = synth_generate(testing::tiny_spec());
  DivineModel net(testing::tiny_model(), {}, 1);
  const std::vector<Matrix> before = net.params().snapshot();
  TrainConfig tc;
  tc.lr = 0.0;
  tc.batch = 3;
  tc.max_epochs = 3;
  tc.patience = 10;
  train(net, data.dataset, range(0, 8), range(8, 12), tc);
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (!net.params()[i].trainable) continue;
    EXPECT_EQ(std::memcmp(before[i].data(), net.params()[i].value.data(), sizeof(double) * before[i].size()), 0) << net.params()[i].name;
  }
}

TEST(Trainer, TrainingLossDecreases) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SyntheticSpec spec = testing::tiny_spec(seed);
    spec.n_subjects = 12;
    spec.clips_per_subject = 4;
    const auto data = synth_generate(spec);
    DivineModel net(testing::tiny_model(), {}, seed);
    TrainConfig tc;
    tc.seed = seed;
    tc.batch = 8;
    tc.max_epochs = 15;
    tc.patience = 15;
    tc.lr = 3e-3;
    const TrainResult r = train(net, data.dataset, range(0, 36), range(36, 48), tc);
    EXPECT_LT(r.curves.back().train.total, r.curves.front().train.total) << "seed " << seed;
  }
}

TEST(Trainer, ChunkedPredictionMatchesSingleBatch) {
  const auto data = synth_generate(testing::tiny_spec());
  DivineModel net(testing::tiny_model(), {}, 1);
  const auto idx = range(0, 12);
  const EvalOutput a = predict(net, data.dataset, idx, ForwardOptions::eval(), 5);
  const EvalOutput b = predict(net, data.dataset, idx, ForwardOptions::eval(), 64);
  EXPECT_LT((a.cls_probs - b.cls_probs).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(predict(net, data.dataset, {}, ForwardOptions::eval()), ConfigError);
}

// ---------------------------------------------------------------- cross-validation

ExperimentConfig quick_config(const Dataset& ds) {
  ModelConfig m = testing::tiny_model();
  m.d_v = ds.manifest.d_v;
  m.d_a = ds.manifest.d_a;
  DivineModel proto(m, {}, 0);
  ExperimentConfig cfg;
  cfg.network = proto.config_json();
  cfg.train.max_epochs = 2;
  cfg.train.batch = 8;
  cfg.seeds = {3};
  return cfg;
}

Dataset cv_dataset() {
  SyntheticSpec spec = testing::tiny_spec(9);
  spec.n_subjects = 10;
  spec.clips_per_subject = 3;
  return synth_generate(spec).dataset;
}

TEST(CrossValidate, FiveFoldsOneSeed) {
  const Dataset ds = cv_dataset();
  const ExperimentRecord rec = cross_validate(ds, quick_config(ds));
  ASSERT_EQ(rec.runs.size(), 5u);
  std::set<std::string> tested;
  for (const auto& run : rec.runs) {
    EXPECT_TRUE(run.error.empty()) << run.error;
    EXPECT_EQ(run.val_fold, (run.fold + 1) % 5);
    EXPECT_EQ(run.n_train + run.n_val + run.n_test, ds.clips.size());
    EXPECT_EQ(run.metrics.size(), 3u);
    for (const auto& s : run.test_subjects) EXPECT_TRUE(tested.insert(s).second) << s << " tested twice";
    for (const auto& s : run.val_subjects) {
      EXPECT_EQ(std::count(run.test_subjects.begin(), run.test_subjects.end(), s), 0);
    }
  }
  EXPECT_EQ(tested.size(), 10u);
}

nlohmann::json without_timing(nlohmann::json j) {
  for (auto& r : j.at("runs")) r.erase("wall_seconds");
  return j;
}

TEST(CrossValidate, DeterministicAcrossRepeatsAndWorkers) {
  const Dataset ds = cv_dataset();
  ExperimentConfig cfg = quick_config(ds);
  cfg.seeds = {1, 2};
  cfg.folds = {0, 3};
  const std::string a = without_timing(to_json(cross_validate(ds, cfg))).dump();
  const std::string b = without_timing(to_json(cross_validate(ds, cfg))).dump();
  EXPECT_EQ(a, b);
  cfg.jobs = 3;
  const nlohmann::json c = without_timing(to_json(cross_validate(ds, cfg)));
  nlohmann::json c_cfg = c;
  c_cfg["config"].erase("jobs");
  nlohmann::json a_cfg = nlohmann::json::parse(a);
  a_cfg["config"].erase("jobs");
  EXPECT_EQ(a_cfg.dump(), c_cfg.dump());
}

TEST(CrossValidate, RecordRoundTripsThroughJson) {
  const Dataset ds = cv_dataset();
  ExperimentConfig cfg = quick_config(ds);
  cfg.folds = {1};
  const ExperimentRecord rec = cross_validate(ds, cfg);
  const nlohmann::json j = to_json(rec);
  const ExperimentRecord back = record_from_json(nlohmann::json::parse(j.dump()));
  const nlohmann::json again = to_json(back);
  EXPECT_EQ(again.at("aggregate").dump(), j.at("aggregate").dump());
  EXPECT_EQ(again.at("runs")[0].at("metrics").dump(), j.at("runs")[0].at("metrics").dump());
  EXPECT_EQ(again.at("fold_plans").dump(), j.at("fold_plans").dump());
  const auto s = back.summary(Modality::both);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->accuracy.mean, rec.runs[0].metrics_for(Modality::both)->accuracy);
  EXPECT_EQ(s->accuracy.std, 0.0);
}

TEST(CrossValidate, FailedRunIsRecorded) {
  Dataset ds = cv_dataset();
  ExperimentConfig cfg = quick_config(ds);
  cfg.folds = {0};
  cfg.network["model"]["d_v"] = 5;  // does not match the data
  const ExperimentRecord rec = cross_validate(ds, cfg);
  ASSERT_EQ(rec.failed().size(), 1u);
  EXPECT_FALSE(rec.summary(Modality::both).has_value());
}

TEST(CrossValidate, TooFewSubjects) {
  const Dataset ds = cv_dataset();
  ExperimentConfig cfg = quick_config(ds);
  cfg.k = 11;
  EXPECT_THROW(cross_validate(ds, cfg), ConfigError);
}

TEST(CrossValidate, StrictAudioOnlyReportedUnsupported) {
  const Dataset ds = cv_dataset();
  ExperimentConfig cfg = quick_config(ds);
  cfg.folds = {0};
  cfg.network["model"]["cycle"] = "asymmetric";
  cfg.strict = true;
  const ExperimentRecord rec = cross_validate(ds, cfg);
  ASSERT_EQ(rec.runs.size(), 1u);
  EXPECT_EQ(rec.runs[0].metrics.size(), 2u);
  ASSERT_EQ(rec.runs[0].unsupported.size(), 1u);
  EXPECT_EQ(rec.runs[0].unsupported[0].first, Modality::audio_only);
}

// ---------------------------------------------------------------- ablation

TEST(Ablation, SuiteShapes) {
  const Dataset ds = cv_dataset();
  ExperimentConfig cfg = quick_config(ds);
  cfg.train.max_epochs = 1;
  cfg.folds = {0};
  const AblationResult mod = run_ablation(ds, cfg, "modalities");
  EXPECT_EQ(mod.rows.size(), 3u);
  EXPECT_EQ(mod.variants.size(), 1u);
  EXPECT_EQ(mod.variants[0].record.runs.size(), 1u);
  const AblationResult reg = run_ablation(ds, cfg, "regularization");
  EXPECT_EQ(reg.rows.size(), 4u);
  EXPECT_EQ(reg.variants.size(), 4u);
  const AblationResult dis = run_ablation(ds, cfg, "disentanglement");
  ASSERT_EQ(dis.rows.size(), 3u);
  EXPECT_EQ(dis.rows[1].variant, "flat");
  EXPECT_EQ(dis.rows[2].variant, "single_level");
  // flat fusion trains with every latent and regularizer term at zero
  for (const auto& e : dis.variants[1].record.runs[0].training.curves) {
    for (double v : {e.train.cycle, e.train.sparse, e.train.token, e.train.window_v, e.train.utter_a}) EXPECT_EQ(v, 0.0);
  }
  const AblationResult base = run_ablation(ds, cfg, "baselines");
  EXPECT_EQ(base.rows.size(), 6u);
  EXPECT_THROW(run_ablation(ds, cfg, "nope"), ConfigError);
  const std::string csv = comparison_csv(reg.rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "variant,mode,A,F1,M,R,A_std,F1_std,M_std,R_std");
}

TEST(Ablation, FlagsReachTheNetwork) {
  const Dataset ds = cv_dataset();
  const ExperimentConfig cfg = quick_config(ds);
  TrainConfig tc;
  tc.no_sparse = true;
  tc.no_cycle = true;
  const nlohmann::json net = apply_train_flags(cfg.network, tc);
  EXPECT_FALSE(net.at("model").at("sparse_gating").get<bool>());
  EXPECT_FALSE(net.at("loss").at("use_cycle").get<bool>());
  tc = TrainConfig{};
  tc.flat = true;
  EXPECT_EQ(apply_train_flags(cfg.network, tc).at("model").at("arch"), "flat");
}

// ---------------------------------------------------------------- probe

TEST(Probe, UntrainedModelOnUninformativeDataIsNearChance) {
  double shared = 0.0, priv = 0.0, perm = 0.0;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    SyntheticSpec spec = testing::tiny_spec(static_cast<std::uint64_t>(seed + 40));
    spec.n_subjects = 30;
    spec.clips_per_subject = 6;
    spec.delta = 0.0;
    const auto sd = synth_generate(spec);
    DivineModel net(testing::tiny_model(), {}, static_cast<std::uint64_t>(seed));
    const auto train_idx = range(0, 120), test_idx = range(120, 180);
    const ProbeReport r = disentanglement_probe(net, sd.dataset, sd.factors, train_idx, test_idx, static_cast<std::uint64_t>(seed));
    shared += r.class_from_shared / seeds;
    priv += r.class_from_private / seeds;
    perm += r.permuted_shared / seeds;
  }
  // 5 seeds x 60 test clips: standard error near 2.7 points around 33.3.
  EXPECT_NEAR(shared, 100.0 / 3.0, 10.0);
  EXPECT_NEAR(priv, 100.0 / 3.0, 10.0);
  EXPECT_NEAR(perm, 100.0 / 3.0, 5.0);
}

TEST(Probe, PermutationControlDestroysSignal) {
  SyntheticSpec spec = testing::tiny_spec(3);
  spec.n_subjects = 30;
  spec.clips_per_subject = 6;
  spec.delta = 8.0;
  spec.noise = 0.1;
  const auto sd = synth_generate(spec);
  DivineModel net(testing::tiny_model(), {}, 2);
  const ProbeReport r = disentanglement_probe(net, sd.dataset, sd.factors, range(0, 120), range(120, 180), 1, 20);
  // Even random latents carry the class here; the permuted control must not.
  EXPECT_GT(r.class_from_shared, 60.0);
  EXPECT_NEAR(r.permuted_shared, 100.0 / 3.0, 5.0);
  EXPECT_NEAR(r.permuted_private, 100.0 / 3.0, 5.0);
}

TEST(Probe, RidgeRecoversLinearMap) {
  std::mt19937_64 rng(1);
  const Matrix x = standard_normal(200, 4, rng);
  Matrix w(4, 2);
  w << 1, -2, 0.5, 0, 0, 3, -1, 1;
  Matrix y = x * w;
  y.col(0).array() += 0.7;
  const RidgeFit f = ridge_fit(x, y, 0.0);
  EXPECT_LT((f.w - w).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(f.b(0, 0), 0.7, 1e-10);
  EXPECT_NEAR(probe_r2(x, y, x, y, 0.0), 1.0, 1e-12);
}

TEST(Probe, NeedsFactorTableAndLatents) {
  const auto sd = synth_generate(testing::tiny_spec());
  DivineModel net(testing::tiny_model(), {}, 2);
  EXPECT_THROW(disentanglement_probe(net, sd.dataset, {}, range(0, 6), range(6, 12)), UnsupportedConfiguration);
  ModelConfig flat = testing::tiny_model();
  flat.arch = Architecture::flat;
  DivineModel f(flat, {}, 2);
  EXPECT_THROW(disentanglement_probe(f, sd.dataset, sd.factors, range(0, 6), range(6, 12)), UnsupportedConfiguration);
}

}  // namespace
}  // namespace divine
