#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "losslab/nanonet.hpp"

using namespace losslab;
using namespace losslab::nn;

namespace {

std::vector<EncodedSample> random_samples(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Engine eng(seed);
  std::normal_distribution<double> g;
  std::bernoulli_distribution coin;
  std::vector<EncodedSample> out(n);
  for (auto& s : out) {
    s.features.resize(dim);
    for (auto& v : s.features) v = g(eng);
    s.label = coin(eng) ? 1 : 0;
  }
  return out;
}

}  // namespace

TEST(ParamCount, HandCounts) {
  EXPECT_EQ(param_count({3, 4, 1}), 21u);
  EXPECT_EQ(param_count({3, 4, 0}), 4u);
  EXPECT_EQ(param_count({5, 9, 3}), 244u);
  EXPECT_EQ(init_weights({5, 9, 3}, 1).param_count(), 244u);
}

TEST(NetworkSpec, Validation) {
  EXPECT_THROW(param_count({0, 4, 1}), std::domain_error);
  EXPECT_THROW(param_count({3, 0, 1}), std::domain_error);
  EXPECT_THROW(param_count({3, 4, 1, Activation::relu, {InitKind::plain_uniform, 0.0}}), std::domain_error);
  EXPECT_EQ(parse_activation("tanh"), Activation::tanh);
  EXPECT_THROW(parse_activation("gelu"), std::domain_error);
  EXPECT_EQ(parse_init_kind("xavier_normal"), InitKind::xavier_normal);
  EXPECT_THROW(parse_init_kind("lecun"), std::domain_error);
}

TEST(InitWeights, PlainUniformStaysInRange) {
  const NetworkSpec spec{6, 9, 3, Activation::relu, {InitKind::plain_uniform, 1.0}};
  for (std::uint64_t s = 0; s < 50; ++s)
    for (double v : init_weights(spec, s).flatten()) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(InitWeights, DeterministicPerSchemeAndBiasesZero) {
  for (auto kind : {InitKind::he_normal, InitKind::he_uniform, InitKind::xavier_normal, InitKind::plain_normal,
                    InitKind::plain_uniform}) {
    const NetworkSpec spec{4, 5, 2, Activation::tanh, {kind, 0.7}};
    const auto a = init_weights(spec, 99);
    EXPECT_EQ(a, init_weights(spec, 99));
    EXPECT_NE(a, init_weights(spec, 100));
    for (const auto& l : a.layers)
      for (double b : l.bias) EXPECT_EQ(b, 0.0);
    a.validate();
  }
}

TEST(InitWeights, HeNormalStandardDeviation) {
  const NetworkSpec spec{5, 9, 3};
  std::vector<double> w;
  for (std::uint64_t s = 0; w.size() < 100000; ++s) {
    const auto ws = init_weights(spec, s);
    w.insert(w.end(), ws.layers[0].weights.begin(), ws.layers[0].weights.end());
  }
  double mean = 0, ss = 0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  for (double v : w) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(w.size() - 1));
  EXPECT_NEAR(sd / std::sqrt(2.0 / 5.0), 1.0, 0.02);
}

TEST(InitWeights, UniformAndXavierRanges) {
  const auto hu = init_weights({4, 8, 1, Activation::relu, {InitKind::he_uniform}}, 5);
  for (double v : hu.layers[0].weights) EXPECT_LE(std::abs(v), std::sqrt(6.0 / 4.0));
  for (double v : hu.layers[1].weights) EXPECT_LE(std::abs(v), std::sqrt(6.0 / 8.0));
}

TEST(Forward, ZeroWeightsGiveHalf) {
  const auto ws = zero_weights({3, 4, 2});
  EXPECT_EQ(forward(ws, std::vector<double>{1.0, -2.0, 3.0}), 0.5);
}

TEST(Forward, DeadReluLayerGivesHalf) {
  auto ws = init_weights({3, 4, 2}, 7);
  for (auto& v : ws.layers[1].weights) v = 0.0;
  for (auto& v : ws.layers[1].bias) v = -1.0;  // last hidden layer outputs all zeros
  ws.layers[2].bias[0] = 0.0;
  EXPECT_EQ(forward(ws, std::vector<double>{0.3, -0.1, 2.0}), 0.5);
}

TEST(Forward, HandComputedOneHiddenLayer) {
  // inputs (0.5, -1); hidden tanh units h0 = tanh(0.2*0.5 - 0.4*-1 + 0.1),
  // h1 = tanh(-0.3*0.5 + 0.6*-1 - 0.2); output sigmoid(0.7 h0 - 0.5 h1 + 0.05).
  NetworkSpec spec{2, 2, 1, Activation::tanh};
  auto ws = zero_weights(spec);
  ws.layers[0].weights = {0.2, -0.4, -0.3, 0.6};
  ws.layers[0].bias = {0.1, -0.2};
  ws.layers[1].weights = {0.7, -0.5};
  ws.layers[1].bias = {0.05};
  const double h0 = std::tanh(0.1 + 0.4 + 0.1);
  const double h1 = std::tanh(-0.15 - 0.6 - 0.2);
  const double z = 0.7 * h0 - 0.5 * h1 + 0.05;
  EXPECT_NEAR(forward(ws, std::vector<double>{0.5, -1.0}), 1.0 / (1.0 + std::exp(-z)), 1e-12);
}

TEST(Forward, DimensionMismatch) {
  const auto ws = zero_weights({3, 4, 1});
  EXPECT_THROW(forward(ws, std::vector<double>{1.0, 2.0}), std::domain_error);
}

TEST(BceLoss, KnownValues) {
  EXPECT_NEAR(bce_loss(0.5, 1), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(bce_loss(0.5, 0), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(bce_loss(1.0 - kProbEpsilon, 1), 1e-7, 1e-12);
  EXPECT_NEAR(bce_loss(kProbEpsilon, 1), 16.118, 1e-3);
  EXPECT_NEAR(bce_loss(kProbEpsilon, 1), -std::log(1e-7), 1e-12);
}

TEST(BceLoss, ClampKeepsExtremeWeightsFinite) {
  auto ws = init_weights({3, 5, 2}, 1);
  for (auto& v : ws.layers.back().weights) v *= 1e250;  // logits near +-1e250
  const auto data = random_samples(20, 3, 2);
  const double loss = mean_loss(ws, data);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_LE(loss, -std::log(kProbEpsilon) + 1e-12);
}

TEST(MeanLoss, MeanOfPerSampleLosses) {
  const auto ws = init_weights({4, 6, 2, Activation::tanh}, 3);
  const auto data = random_samples(50, 4, 4);
  EXPECT_DOUBLE_EQ(mean_loss(ws, std::span(data).first(1)), bce_loss(forward(ws, data[0].features), data[0].label));
  const double a = bce_loss(forward(ws, data[0].features), data[0].label);
  const double b = bce_loss(forward(ws, data[1].features), data[1].label);
  EXPECT_NEAR(mean_loss(ws, std::span(data).first(2)), (a + b) / 2, 1e-15);
  long double brute = 0;
  for (const auto& s : data) brute += bce_loss(forward(ws, s.features), s.label);
  EXPECT_NEAR(mean_loss(ws, data), static_cast<double>(brute / 50), 1e-12);
  EXPECT_THROW(mean_loss(ws, std::span<const EncodedSample>{}), std::domain_error);
}

TEST(MeanLoss, OrderInvariant) {
  const auto ws = init_weights({4, 6, 2}, 3);
  auto data = random_samples(30, 4, 5);
  const double before = mean_loss(ws, data);
  std::reverse(data.begin(), data.end());
  EXPECT_NEAR(mean_loss(ws, data), before, 1e-13);
}

TEST(ErrorRate, ThresholdAtHalf) {
  const auto ws = zero_weights({2, 2, 1});  // p = 0.5 predicts 1
  std::vector<EncodedSample> data{{{1, 2}, 1}, {{0, 0}, 0}, {{3, 1}, 1}, {{1, 1}, 0}};
  EXPECT_DOUBLE_EQ(error_rate(ws, data), 0.5);
}

TEST(Gradient, MatchesFiniteDifferencesTanh) {
  std::mt19937_64 pick(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const NetworkSpec spec{1 + pick() % 5, 1 + pick() % 6, pick() % 4, Activation::tanh,
                           {InitKind::plain_normal, 0.8}};
    auto ws = init_weights(spec, trial);
    auto flat = ws.flatten();
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& v : flat) v += g(pick);  // nonzero biases too
    ws.assign_flat(flat);
    const auto batch = random_samples(1 + pick() % 8, spec.input_dim, trial + 1000);
    const auto grad = gradient(ws, batch);
    ASSERT_EQ(grad.size(), flat.size());
    const double h = 1e-5;
    for (std::size_t k = 0; k < flat.size(); ++k) {
      auto plus = flat, minus = flat;
      plus[k] += h;
      minus[k] -= h;
      WeightSet wp = ws, wm = ws;
      wp.assign_flat(plus);
      wm.assign_flat(minus);
      const double fd = (mean_loss(wp, batch) - mean_loss(wm, batch)) / (2 * h);
      if (std::abs(grad[k]) < 1e-8)
        EXPECT_NEAR(fd, grad[k], 1e-7) << "trial " << trial << " coord " << k;
      else
        EXPECT_LT(std::abs(fd - grad[k]) / std::abs(grad[k]), 1e-4) << "trial " << trial << " coord " << k;
    }
  }
}

TEST(Gradient, DeadReluOnlyOutputBias) {
  auto ws = init_weights({3, 4, 2}, 11);
  for (auto& v : ws.layers[0].weights) v = 0.0;
  for (auto& v : ws.layers[0].bias) v = -1.0;
  ws.layers[2].bias[0] = 0.3;
  const auto data = random_samples(5, 3, 12);
  const auto g = gradient(ws, data);
  const std::size_t out_begin = g.size() - ws.layers.back().weights.size() - 1;
  for (std::size_t k = 0; k < out_begin; ++k) EXPECT_EQ(g[k], 0.0) << k;
  EXPECT_NE(g.back(), 0.0);
}

TEST(Gradient, DuplicatedBatchSameGradient) {
  const auto ws = init_weights({4, 5, 2, Activation::tanh}, 8);
  const auto s = random_samples(1, 4, 9);
  const std::vector<EncodedSample> twice{s[0], s[0]};
  const auto a = gradient(ws, s);
  const auto b = gradient(ws, twice);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-15);
  EXPECT_THROW(gradient(ws, std::span<const EncodedSample>{}), std::domain_error);
}

TEST(Gradient, SmallStepDoesNotIncreaseLoss) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const NetworkSpec spec{3, 5, 2, Activation::tanh};
    auto ws = init_weights(spec, seed);
    const auto data = random_samples(16, 3, seed + 500);
    const double before = mean_loss(ws, data);
    auto flat = ws.flatten();
    const auto g = gradient(ws, data);
    for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= 1e-3 * g[k];
    ws.assign_flat(flat);
    EXPECT_LE(mean_loss(ws, data), before) << seed;
  }
}

TEST(Train, ZeroLearningRateKeepsLoss) {
  const auto data = random_samples(12, 3, 1);
  const auto run = train({3, 4, 2}, data, {0.0, 10, 4, 5, 5});
  ASSERT_EQ(run.epoch_losses.size(), 10u);
  for (double l : run.epoch_losses) EXPECT_EQ(l, run.initial_loss);
}

TEST(Train, SingleSampleConverges) {
  const auto data = random_samples(1, 6, 3);
  const auto run = train({6, 6, 2}, data, {0.1, 200, 1, 42, 50});
  EXPECT_LT(run.epoch_losses.back(), 0.01);
  EXPECT_EQ(run.best_loss, *std::min_element(run.epoch_losses.begin(), run.epoch_losses.end()));
}

TEST(Train, DeterministicAndSnapshotsIncrease) {
  const auto data = random_samples(20, 3, 4);
  const TrainConfig cfg{0.05, 30, 6, 7, 7};
  const auto a = train({3, 5, 2}, data, cfg);
  const auto b = train({3, 5, 2}, data, cfg);
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  ASSERT_GE(a.snapshots.size(), 2u);
  EXPECT_EQ(a.snapshots.front().epoch, 0u);
  EXPECT_EQ(a.snapshots.back().epoch, 30u);
  for (std::size_t i = 1; i < a.snapshots.size(); ++i) EXPECT_GT(a.snapshots[i].epoch, a.snapshots[i - 1].epoch);
}

TEST(Train, RejectsBadConfig) {
  const auto data = random_samples(5, 3, 4);
  EXPECT_THROW(train({3, 5, 2}, data, {0.1, 10, 6, 1, 1}), std::domain_error);
  EXPECT_THROW(train({3, 5, 2}, data, {0.1, 0, 1, 1, 1}), std::domain_error);
  EXPECT_THROW(train({3, 5, 2}, data, {-0.1, 10, 1, 1, 1}), std::domain_error);
  EXPECT_THROW(train({4, 5, 2}, data, {0.1, 10, 1, 1, 1}), std::domain_error);
  EXPECT_THROW(train({3, 5, 2}, std::span<const EncodedSample>{}, {0.1, 10, 1, 1, 1}), std::domain_error);
}

TEST(Train, NonFiniteLossAbortsWithPartialRun) {
  auto data = random_samples(8, 3, 4);
  for (auto& s : data)
    for (auto& v : s.features) v = INFINITY;  // mixed-sign weights give inf - inf; tanh keeps the NaN
  try {
    train({3, 5, 2, Activation::tanh, {InitKind::plain_uniform, 1.0}}, data, {0.1, 5, 8, 1, 1});
    FAIL() << "expected TrainingAborted";
  } catch (const TrainingAborted& e) {
    EXPECT_GE(e.epoch(), 1u);
    EXPECT_FALSE(e.partial().snapshots.empty());
  }
}
