#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "divine/numerics/adam.hpp"
#include "divine/numerics/grad_check.hpp"
#include "divine/numerics/layers.hpp"
#include "divine/numerics/losses.hpp"

namespace divine {
namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return standard_normal(r, c, rng);
}

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

// ---------------------------------------------------------------- dense

TEST(Dense, IdentityAndHandCases) {
  EXPECT_EQ(dense_forward(row({1, 0}), Matrix::Identity(2, 2), row({0, 0})), row({1, 0}));
  Vector x(2);
  x << 1, 2;
  Vector b(1);
  b << 0.5;
  Matrix w(1, 2);
  w << 1, 1;
  EXPECT_DOUBLE_EQ(dense_forward(x, w, b)[0], 3.5);
}

TEST(Dense, MatchesTripleLoop) {
  const Matrix x = random_matrix(3, 4, 1), w = random_matrix(5, 4, 2), b = random_matrix(1, 5, 3);
  const Matrix y = dense_forward(x, w, b);
  for (Index n = 0; n < 3; ++n) {
    for (Index o = 0; o < 5; ++o) {
      double acc = b(0, o);
      for (Index i = 0; i < 4; ++i) acc += w(o, i) * x(n, i);
      EXPECT_NEAR(y(n, o), acc, 1e-12);
    }
  }
}

TEST(Dense, ShapeErrorNamesOperand) {
  try {
    dense_forward(Matrix(Matrix::Zero(2, 3)), Matrix::Zero(4, 2), Matrix::Zero(1, 4));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("dense input x"), std::string::npos);
  }
  EXPECT_THROW(dense_forward(Matrix(Matrix::Zero(2, 2)), Matrix::Zero(4, 2), Matrix::Zero(1, 3)), DimensionError);
}

// ---------------------------------------------------------------- conv

TEST(Conv1d, ZeroInputAndDeltaKernel) {
  const Matrix k = random_matrix(4, 3 * 2, 5);
  EXPECT_TRUE(conv1d_forward(Matrix::Zero(6, 2), k, Matrix::Zero(1, 4), 3).isZero(0));
  Matrix delta(1, 3);
  delta << 0, 1, 0;
  const Matrix x = random_matrix(7, 1, 6);
  EXPECT_EQ(conv1d_forward(x, delta, Matrix::Zero(1, 1), 3), x);
}

TEST(Conv1d, MatchesSlidingWindowOracle) {
  const Index t = 5, din = 3, dout = 4, k = 3;
  const Matrix x = random_matrix(t, din, 7), kern = random_matrix(dout, k * din, 8), bias = random_matrix(1, dout, 9);
  const Matrix y = conv1d_forward(x, kern, bias, k);
  for (Index s = 0; s < t; ++s) {
    for (Index o = 0; o < dout; ++o) {
      double acc = bias(0, o);
      for (Index j = 0; j < k; ++j) {
        const Index src = s + j - k / 2;
        if (src < 0 || src >= t) continue;
        for (Index c = 0; c < din; ++c) acc += kern(o, j * din + c) * x(src, c);
      }
      EXPECT_NEAR(y(s, o), acc, 1e-12);
    }
  }
}

TEST(Conv1d, RaggedBatchPadsEachSequenceSeparately) {
  const Matrix a = random_matrix(4, 2, 10), b = random_matrix(3, 2, 11), kern = random_matrix(3, 6, 12), bias = random_matrix(1, 3, 13);
  const Ragged y = conv1d_forward(Ragged::stack({&a, &b}), kern, bias, 3).output;
  EXPECT_TRUE(y.segment(0).isApprox(conv1d_forward(a, kern, bias, 3), 1e-14));
  EXPECT_TRUE(y.segment(1).isApprox(conv1d_forward(b, kern, bias, 3), 1e-14));
}

TEST(Conv1d, KernelConstraints) {
  EXPECT_THROW(conv1d_forward(Matrix::Zero(5, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1), 2), ConfigError);
  EXPECT_THROW(conv1d_forward(Matrix::Zero(2, 1), Matrix::Zero(1, 5), Matrix::Zero(1, 1), 5), ConfigError);
  EXPECT_NO_THROW(conv1d_forward(Matrix::Zero(2, 1), Matrix::Zero(1, 3), Matrix::Zero(1, 1), 3));
}

// ---------------------------------------------------------------- batchnorm

TEST(BatchNorm, StandardizesPerChannel) {
  Matrix x = random_matrix(40, 3, 14);
  x = (x.rowwise() - x.colwise().mean()).eval();
  Matrix rm = Matrix::Zero(1, 3), rv = Matrix::Ones(1, 3);
  const Matrix y = batchnorm_train_forward(x, Matrix::Ones(1, 3), Matrix::Zero(1, 3), rm, rv).y;
  for (Index c = 0; c < 3; ++c) {
    EXPECT_NEAR(y.col(c).mean(), 0.0, 1e-6);
    EXPECT_NEAR(y.col(c).array().square().mean(), 1.0, 1e-4);  // eps = 1e-5 shrinks the variance slightly
  }
}

TEST(BatchNorm, ZeroScaleGivesBeta) {
  Matrix rm = Matrix::Zero(1, 2), rv = Matrix::Ones(1, 2);
  const Matrix beta = row({0.3, -2});
  const Matrix y = batchnorm_train_forward(random_matrix(6, 2, 15), Matrix::Zero(1, 2), beta, rm, rv).y;
  for (Index r = 0; r < 6; ++r) EXPECT_EQ(y.row(r), beta);
}

TEST(BatchNorm, MatchesTwoPassOracleAndRunningStats) {
  const Matrix x = random_matrix(9, 4, 16);
  const Matrix gamma = random_matrix(1, 4, 17), beta = random_matrix(1, 4, 18);
  Matrix rm = Matrix::Zero(1, 4), rv = Matrix::Ones(1, 4);
  const Matrix y = batchnorm_train_forward(x, gamma, beta, rm, rv).y;
  for (Index c = 0; c < 4; ++c) {
    double mean = 0;
    for (Index r = 0; r < 9; ++r) mean += x(r, c);
    mean /= 9;
    double var = 0;
    for (Index r = 0; r < 9; ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= 9;
    for (Index r = 0; r < 9; ++r) EXPECT_NEAR(y(r, c), gamma(0, c) * (x(r, c) - mean) / std::sqrt(var + 1e-5) + beta(0, c), 1e-10);
    EXPECT_NEAR(rm(0, c), 0.1 * mean, 1e-12);
    EXPECT_NEAR(rv(0, c), 0.9 + 0.1 * var * 9.0 / 8.0, 1e-12);
  }
  const Matrix ye = batchnorm_eval_forward(x, gamma, beta, rm, rv).y;
  for (Index c = 0; c < 4; ++c) {
    EXPECT_NEAR(ye(0, c), gamma(0, c) * (x(0, c) - rm(0, c)) / std::sqrt(rv(0, c) + 1e-5) + beta(0, c), 1e-12);
  }
}

TEST(BatchNorm, TrainModeNeedsTwoSamples) {
  Matrix rm = Matrix::Zero(1, 1), rv = Matrix::Ones(1, 1);
  EXPECT_THROW(batchnorm_train_forward(Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1), rm, rv), ConfigError);
}

// ---------------------------------------------------------------- maxpool

TEST(MaxPool, HandCasesAndFloorLength) {
  Matrix x(4, 1);
  x << 1, 3, 2, 0;
  Matrix want(2, 1);
  want << 3, 2;
  EXPECT_EQ(maxpool1d_forward(x), want);
  EXPECT_EQ(maxpool1d_forward(Matrix::Constant(6, 2, 1.5)), Matrix::Constant(3, 2, 1.5));
  EXPECT_EQ(maxpool1d_forward(random_matrix(7, 3, 19)).rows(), 3);
  EXPECT_THROW(maxpool1d_forward(Matrix::Zero(1, 2)), SequenceTooShort);
}

TEST(MaxPool, MatchesNaiveOracleAndRoutesTiesToFirst) {
  const Matrix x = random_matrix(9, 3, 20);
  const Matrix y = maxpool1d_forward(x);
  for (Index t = 0; t < 4; ++t) {
    for (Index c = 0; c < 3; ++c) EXPECT_EQ(y(t, c), std::max(x(2 * t, c), x(2 * t + 1, c)));
  }
  const Matrix tie = Matrix::Ones(2, 1);
  const PoolResult p = maxpool1d_forward(Ragged::stack({&tie}));
  const Matrix dx = maxpool1d_backward(p.argmax, 2, Matrix::Ones(1, 1));
  EXPECT_EQ(dx(0, 0), 1.0);
  EXPECT_EQ(dx(1, 0), 0.0);
}

// ---------------------------------------------------------------- activations

TEST(Activations, HandCases) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  const Matrix s = softmax(Matrix(Matrix::Zero(1, 3)));
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(s(0, i), 1.0 / 3.0, 1e-15);
  const Matrix big = softmax(row({1000, 0}));
  EXPECT_EQ(big(0, 0), 1.0);
  EXPECT_NEAR(big(0, 1), 0.0, 1e-300);
  EXPECT_EQ(relu(row({-1, 2})), row({0, 2}));
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

TEST(Activations, SoftmaxSumsToOneAtExtremes) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  Matrix x(50, 7);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  const Matrix y = softmax(x);
  EXPECT_TRUE(y.allFinite());
  EXPECT_GE(y.minCoeff(), 0.0);
  for (Index r = 0; r < y.rows(); ++r) EXPECT_NEAR(y.row(r).sum(), 1.0, 1e-9);
}

// ---------------------------------------------------------------- losses

TEST(CrossEntropy, ClosedForms) {
  Vector p(3), t(3);
  p << 1, 0, 0;
  t << 1, 0, 0;
  EXPECT_NEAR(cross_entropy(p, t), 0.0, 1e-12);
  Vector p2(2), t2(2);
  p2 << 0.5, 0.5;
  t2 << 1, 0;
  EXPECT_NEAR(cross_entropy(p2, t2), 0.693147, 1e-6);
}

TEST(CrossEntropy, BatchMatchesDirectFormula) {
  const Matrix probs = softmax(random_matrix(6, 4, 22));
  const std::vector<int> labels{0, 3, 1, 1, 2, 0};
  double want = 0;
  for (Index r = 0; r < 6; ++r) want -= std::log(probs(r, labels[static_cast<std::size_t>(r)]));
  EXPECT_NEAR(cross_entropy(probs, labels), want / 6, 1e-12);
}

TEST(CrossEntropy, RejectsNonOneHotTargets) {
  Vector p(2), t(2);
  p << 0.5, 0.5;
  t << 0.5, 0.5;
  EXPECT_THROW(cross_entropy(p, t), LabelError);
  t << 1, 1;
  EXPECT_THROW(cross_entropy(p, t), LabelError);
  t << 0, 0;
  EXPECT_THROW(cross_entropy(p, t), LabelError);
}

TEST(GaussianKl, ClosedForms) {
  EXPECT_NEAR(gaussian_kl(Vector::Zero(4), Vector::Zero(4)), 0.0, 1e-9);
  EXPECT_NEAR(gaussian_kl(Vector::Ones(1), Vector::Zero(1)), 0.5, 1e-9);
  EXPECT_NEAR(gaussian_kl(Vector::Zero(1), Vector::Constant(1, std::log(4.0))), 0.806853, 1e-6);
  EXPECT_NEAR(gaussian_kl(Vector::Zero(1), Vector::Constant(1, std::log(4.0))), 0.5 * (3.0 - std::log(4.0)), 1e-12);
}

TEST(GaussianKl, NonNegativeOnGridAndZeroOnlyAtOrigin) {
  for (double mu = -3; mu <= 3; mu += 0.25) {
    for (double lv = -4; lv <= 4; lv += 0.25) {
      const double kl = gaussian_kl(Vector::Constant(1, mu), Vector::Constant(1, lv));
      EXPECT_GE(kl, 0.0);
      if (mu != 0.0 || lv != 0.0) {
        EXPECT_GT(kl, 0.0) << mu << " " << lv;
      }
    }
  }
}

TEST(Reparameterize, DeterministicCases) {
  const Matrix mu = random_matrix(2, 3, 23), lv = random_matrix(2, 3, 24), n = random_matrix(2, 3, 25);
  EXPECT_EQ(reparameterize(mu, lv, Matrix::Zero(2, 3)), mu);
  EXPECT_EQ(reparameterize(Matrix::Zero(2, 3), Matrix::Zero(2, 3), n), n);
  const ReparamGrads g = reparameterize_backward(lv, n, Matrix::Ones(2, 3));
  EXPECT_EQ(g.dmu, Matrix::Ones(2, 3));
}

TEST(Reparameterize, MonteCarloMomentsWithinThreeStandardErrors) {
  const double mu = 0.7, logvar = std::log(2.5);
  const double var = std::exp(logvar);
  const Index n = 100000;
  std::mt19937_64 rng(26);
  const Matrix z = reparameterize(Matrix::Constant(n, 1, mu), Matrix::Constant(n, 1, logvar), standard_normal(n, 1, rng));
  const double mean = z.mean();
  const double sample_var = (z.array() - mean).square().sum() / static_cast<double>(n - 1);
  EXPECT_LT(std::abs(mean - mu), 3.0 * std::sqrt(var / n));
  // Var of the sample variance of a normal is 2 sigma^4 / (n - 1).
  EXPECT_LT(std::abs(sample_var - var), 3.0 * std::sqrt(2.0 * var * var / (n - 1)));
}

// ---------------------------------------------------------------- adam

TEST(Adam, ZeroGradientsLeaveParamsUnchanged) {
  Matrix w = random_matrix(2, 2, 27);
  const Matrix before = w;
  const Matrix g = Matrix::Zero(2, 2);
  AdamState s;
  adam_step({&w}, {&g}, s);
  EXPECT_EQ(w, before);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Matrix w = Matrix::Constant(1, 1, 0.25);
  const Matrix g = Matrix::Ones(1, 1);
  AdamState s;
  adam_step({&w}, {&g}, s);
  EXPECT_NEAR(w(0, 0), 0.25 - 1e-3, 1e-10);
}

TEST(Adam, DescendsQuadratic) {
  Matrix w = Matrix::Ones(1, 1);
  AdamState s;
  s.lr = 1e-2;
  for (int i = 0; i < 100; ++i) {
    const Matrix g = 2.0 * w;
    adam_step({&w}, {&g}, s);
  }
  EXPECT_LT(std::abs(w(0, 0)), 0.5);
  EXPECT_EQ(s.step, 100);
}

TEST(Adam, NaNGradientNamesGroup) {
  Matrix w = Matrix::Zero(1, 1);
  const Matrix g = Matrix::Constant(1, 1, std::nan(""));
  AdamState s;
  try {
    adam_step({&w}, {&g}, s, {"head/cls_w"});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("head/cls_w"), std::string::npos);
  }
}

// ---------------------------------------------------------------- grad check

TEST(GradCheck, QuadraticIsExact) {
  ParamSet ps;
  ps.add("w", random_matrix(3, 2, 28));
  const Matrix a = random_matrix(3, 2, 29);
  auto loss = [&] { return (ps.value(0).array().square() * a.array()).sum(); };
  const Matrix grad = 2.0 * ps.value(0).cwiseProduct(a);
  GradCheckOptions o;
  o.stencil = 2;
  EXPECT_LT(grad_check(loss, ps, {grad}, o).max_rel_error, 1e-8);
}

TEST(GradCheck, DenseSigmoidCrossEntropyMicroNet) {
  ParamSet ps;
  ps.add("w1", random_matrix(5, 4, 30));
  ps.add("b1", random_matrix(1, 5, 31));
  ps.add("w2", random_matrix(3, 5, 32));
  ps.add("b2", random_matrix(1, 3, 33));
  const Matrix x = random_matrix(6, 4, 34);
  const std::vector<int> y{0, 1, 2, 2, 1, 0};
  auto loss = [&] {
    const Matrix h = sigmoid(dense_forward(x, ps.value(0), ps.value(1)));
    return cross_entropy(softmax(dense_forward(h, ps.value(2), ps.value(3))), y);
  };
  const Matrix z1 = dense_forward(x, ps.value(0), ps.value(1));
  const Matrix h = sigmoid(z1);
  Matrix dlogits = softmax(dense_forward(h, ps.value(2), ps.value(3)));
  for (Index r = 0; r < 6; ++r) dlogits(r, y[static_cast<std::size_t>(r)]) -= 1.0;
  dlogits /= 6.0;
  const DenseGrads g2 = dense_backward(h, ps.value(2), dlogits);
  const DenseGrads g1 = dense_backward(x, ps.value(0), sigmoid_backward(h, g2.dx));
  GradCheckOptions o;
  o.stencil = 2;
  EXPECT_LT(grad_check(loss, ps, {g1.dw, g1.db, g2.dw, g2.db}, o).max_rel_error, 1e-5);
}

TEST(GradCheck, NonDeterministicLossIsRejected) {
  ParamSet ps;
  ps.add("w", Matrix::Zero(1, 1));
  double drift = 0;
  auto loss = [&] { return drift += 1.0; };
  EXPECT_THROW(grad_check(loss, ps, {Matrix::Zero(1, 1)}), OracleInvalid);
}

TEST(GradCheck, SubsamplesLargeGroups) {
  ParamSet ps;
  ps.add("w", random_matrix(20, 20, 35));
  auto loss = [&] { return ps.value(0).sum(); };
  const GradCheckReport r = grad_check(loss, ps, {Matrix::Ones(20, 20)});
  EXPECT_EQ(r.group("w").checked, 50u);
  EXPECT_LT(r.max_rel_error, 1e-8);
}

// Every layer backward against finite differences of <C, f(theta)>.
TEST(LayerBackward, ConvBatchNormReluPoolChain) {
  const Matrix a = random_matrix(5, 3, 36), b = random_matrix(4, 3, 37);
  const Ragged x = Ragged::stack({&a, &b});
  ParamSet ps;
  ps.add("kernels", random_matrix(4, 9, 38));
  ps.add("bias", random_matrix(1, 4, 39));
  ps.add("gamma", Matrix::Ones(1, 4) + 0.1 * random_matrix(1, 4, 40));
  ps.add("beta", random_matrix(1, 4, 41));
  const Matrix c = random_matrix(4, 4, 42);  // pooled rows: 2 + 2

  auto forward = [&](ConvResult& conv, BatchNormResult& bn, PoolResult& pool) {
    conv = conv1d_forward(x, ps.value(0), ps.value(1), 3);
    Matrix rm = Matrix::Zero(1, 4), rv = Matrix::Ones(1, 4);
    bn = batchnorm_train_forward(conv.output.data, ps.value(2), ps.value(3), rm, rv, false);
    Ragged act;
    act.starts = conv.output.starts;
    act.data = relu(bn.y);
    pool = maxpool1d_forward(act);
    return (pool.output.data.array() * c.array()).sum();
  };
  ConvResult conv;
  BatchNormResult bn;
  PoolResult pool;
  forward(conv, bn, pool);
  const Matrix dact = maxpool1d_backward(pool.argmax, bn.y.rows(), c);
  const BatchNormGrads gbn = batchnorm_backward(bn.cache, ps.value(2), relu_backward(bn.y, dact));
  const ConvGrads gc = conv1d_backward(conv.columns, conv.output.starts, 3, ps.value(0), 3, gbn.dx);

  std::uint64_t sig = 0;
  auto loss = [&] {
    ConvResult cv;
    BatchNormResult b2;
    PoolResult p2;
    const double l = forward(cv, b2, p2);
    sig = 0;
    for (Index i = 0; i < b2.y.size(); ++i) sig = hash_combine(sig, b2.y.data()[i] > 0);
    for (Index i = 0; i < p2.argmax.size(); ++i) sig = hash_combine(sig, static_cast<std::uint64_t>(p2.argmax.data()[i]));
    return l;
  };
  const GradCheckReport r = grad_check(loss, ps, {gc.dkernels, gc.dbias, gbn.dgamma, gbn.dbeta}, {}, [&] { return sig; });
  EXPECT_LT(r.group("kernels").max_rel_error, 1e-6);
  EXPECT_LT(r.group("gamma").max_rel_error, 1e-6);
  EXPECT_LT(r.group("beta").max_rel_error, 1e-6);
  // Batch statistics cancel any per-channel shift, so the conv bias has no effect.
  EXPECT_LT(gc.dbias.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LayerBackward, TanhSoftmaxAndKl) {
  ParamSet ps;
  ps.add("x", random_matrix(3, 4, 43));
  ps.add("lv", 0.3 * random_matrix(3, 4, 44));
  const Matrix c = random_matrix(3, 4, 45);
  auto loss = [&] {
    const Matrix t = ps.value(0).array().tanh().matrix();
    return (softmax(t).array() * c.array()).sum() + gaussian_kl_rows(ps.value(0), ps.value(1)).sum();
  };
  const Matrix t = ps.value(0).array().tanh().matrix();
  const Matrix dx = tanh_backward(t, softmax_backward(softmax(t), c)) + gaussian_kl_grad_mu(ps.value(0));
  const Matrix dlv = gaussian_kl_grad_logvar(ps.value(1));
  EXPECT_LT(grad_check(loss, ps, {dx, dlv}).max_rel_error, 1e-7);
}

TEST(LayerBackward, ReparameterizationFlowsToMuAndLogvar) {
  ParamSet ps;
  ps.add("mu", random_matrix(2, 3, 46));
  ps.add("lv", random_matrix(2, 3, 47));
  const Matrix noise = random_matrix(2, 3, 48), c = random_matrix(2, 3, 49);
  auto loss = [&] { return (reparameterize(ps.value(0), ps.value(1), noise).array() * c.array()).sum(); };
  const ReparamGrads g = reparameterize_backward(ps.value(1), noise, c);
  EXPECT_LT(grad_check(loss, ps, {g.dmu, g.dlogvar}).max_rel_error, 1e-8);
}

TEST(Determinism, SeededOpsAreBitReproducible) {
  auto run = [] {
    std::mt19937_64 rng(50);
    const Matrix x = standard_normal(6, 3, rng), k = standard_normal(2, 9, rng);
    return maxpool1d_forward(relu(conv1d_forward(x, k, Matrix::Zero(1, 2), 3)));
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace divine
