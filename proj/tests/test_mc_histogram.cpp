#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "losslab/dataset.hpp"
#include "losslab/mc_histogram.hpp"

using namespace losslab;
using namespace losslab::mc;

namespace {

const std::vector<nn::EncodedSample>& bundled() {
  static const auto x = [] {
    const auto ds = data::load_bundled_sample();
    return data::encode(ds, data::fit_encoder(ds));
  }();
  return x;
}

HistogramConfig relu_uniform(std::size_t width, std::size_t depth, std::uint64_t trials, double scale = 1.0) {
  HistogramConfig c;
  c.spec = {6, width, depth, nn::Activation::relu, {nn::InitKind::plain_uniform, scale}};
  c.n_trials = trials;
  c.master_seed = 42;
  return c;
}

std::uint64_t total(const LossHistogram& h) { return std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0}); }

}  // namespace

TEST(SampleHistogram, DeterministicAndWorkerInvariant) {
  const auto cfg = relu_uniform(9, 3, 20000);
  const auto base = sample_histogram(cfg, bundled(), 1);
  for (std::size_t w : {2u, 4u, 8u}) {
    const auto h = sample_histogram(cfg, bundled(), w);
    EXPECT_EQ(h.counts, base.counts) << w;
    EXPECT_EQ(h.overflow_count, base.overflow_count);
    EXPECT_EQ(h.min_loss, base.min_loss);
    EXPECT_EQ(h.max_loss, base.max_loss);
  }
  auto other = cfg;
  other.master_seed = 43;
  EXPECT_NE(sample_histogram(other, bundled()).counts, base.counts);
}

TEST(SampleHistogram, CountsAreConserved) {
  auto cfg = relu_uniform(9, 3, 10000, 2.0);
  cfg.bin_policy = FixedBins{0.01, 0.5};  // forces overflow
  const auto h = sample_histogram(cfg, bundled(), 4);
  EXPECT_GT(h.overflow_count, 0u);
  EXPECT_EQ(total(h) + h.overflow_count, h.n_trials);
  EXPECT_EQ(h.total_counted(), 10000u);
  EXPECT_EQ(h.bin_edges.size(), h.counts.size() + 1);
}

TEST(SampleHistogram, MatchesBinningOfRawLosses) {
  const auto cfg = relu_uniform(5, 2, 5000);
  const auto losses = sample_losses(cfg, bundled(), 0, cfg.n_trials, 3);
  const auto a = bin_losses(losses, cfg.bin_policy);
  const auto b = sample_histogram(cfg, bundled(), 2);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_EQ(a.min_loss, *std::min_element(losses.begin(), losses.end()));
  for (double l : losses) EXPECT_GE(l, 0.0);
}

TEST(SampleHistogram, MinAnchoredBinsHoldExtremes) {
  auto cfg = relu_uniform(9, 3, 5000);
  cfg.bin_policy = MinAnchoredBins{50};
  const auto h = sample_histogram(cfg, bundled(), 2);
  ASSERT_EQ(h.counts.size(), 50u);
  EXPECT_EQ(h.bin_of(h.min_loss), std::optional<std::size_t>{0});
  EXPECT_EQ(h.bin_of(h.max_loss), std::optional<std::size_t>{49});
  EXPECT_GT(h.counts.front(), 0u);
  EXPECT_GT(h.counts.back(), 0u);
  EXPECT_EQ(total(h), 5000u);
  EXPECT_EQ(h.overflow_count, 0u);
}

TEST(SampleHistogram, MinimumLiesInFirstNonemptyBin) {
  const auto h = sample_histogram(relu_uniform(9, 3, 20000), bundled(), 4);
  std::size_t first = 0;
  while (h.counts[first] == 0) ++first;
  EXPECT_GE(h.min_loss, h.bin_edges[first]);
  EXPECT_LT(h.min_loss, h.bin_edges[first + 1]);
}

TEST(SampleHistogram, RejectsBadConfig) {
  auto cfg = relu_uniform(3, 1, 0);
  EXPECT_THROW(sample_histogram(cfg, bundled()), std::domain_error);
  cfg.n_trials = 10;
  cfg.sample_indices = {500};
  EXPECT_THROW(sample_histogram(cfg, bundled()), std::domain_error);
  cfg.sample_indices = {};
  EXPECT_THROW(sample_histogram(cfg, bundled()), std::domain_error);
  cfg.sample_indices = {0};
  cfg.bin_policy = FixedBins{0.0, 20.0};
  EXPECT_THROW(sample_histogram(cfg, bundled()), std::domain_error);
  cfg.bin_policy = MinAnchoredBins{0};
  EXPECT_THROW(sample_histogram(cfg, bundled()), std::domain_error);
  cfg.bin_policy = FixedBins{};
  cfg.spec.input_dim = 4;
  EXPECT_THROW(sample_histogram(cfg, bundled()), std::domain_error);
}

TEST(MassBelow, AgreesWithRawFractionUpToOneBin) {
  const auto cfg = relu_uniform(9, 3, 20000);
  const auto losses = sample_losses(cfg, bundled(), 0, cfg.n_trials);
  const auto h = bin_losses(losses, cfg.bin_policy);
  for (double x : {0.01, 0.05, 0.3, 0.5931, 0.69, 1.7, 5.0}) {
    const double exact =
        static_cast<double>(std::count_if(losses.begin(), losses.end(), [&](double l) { return l < x; })) / 20000.0;
    const auto k = h.bin_of(x);
    const double slack = k ? static_cast<double>(h.counts[*k]) / 20000.0 : 0.0;
    EXPECT_LE(std::abs(mass_below(h, x) - exact), slack + 1e-12) << x;
  }
}

TEST(MassBelow, DegenerateMasses) {
  const std::vector<double> low(100, 0.01), high(100, 0.9);
  EXPECT_EQ(zero_mode_mass(bin_losses(low, FixedBins{})), 1.0);
  EXPECT_EQ(zero_mode_mass(bin_losses(high, FixedBins{})), 0.0);
  EXPECT_EQ(left_tail_mass(bin_losses(high, FixedBins{})), 0.0);
  EXPECT_THROW(zero_mode_mass(bin_losses(low, FixedBins{}), 0.0), std::domain_error);
  EXPECT_THROW(bin_losses(std::vector<double>{}, FixedBins{}), std::domain_error);
}

TEST(DetectModes, UnimodalAndBimodalShapes) {
  std::vector<double> one, two;
  for (int k = -30; k <= 30; ++k) {
    const int n = static_cast<int>(2000 * std::exp(-0.5 * (k / 10.0) * (k / 10.0)));
    for (int i = 0; i < n; ++i) one.push_back(0.7 + 0.01 * k + 0.005);
  }
  for (int i = 0; i < 5000; ++i) two.push_back(0.205), two.push_back(1.505);
  const auto a = detect_modes(bin_losses(one, FixedBins{}));
  ASSERT_EQ(a.modes.size(), 1u);
  EXPECT_NEAR(a.modes[0].center, 0.705, 1e-9);
  EXPECT_NEAR(a.central_mode_loss, 0.705, 1e-9);
  const auto b = detect_modes(bin_losses(two, FixedBins{}));
  ASSERT_EQ(b.modes.size(), 2u);
  EXPECT_LT(b.modes[0].center, b.modes[1].center);
  EXPECT_EQ(b.modes[0].prominence, 5000u);
}

TEST(DetectModes, TanhHasFewerModesThanRelu) {
  auto relu = relu_uniform(9, 3, 100000);
  auto tanh = relu;
  tanh.spec.activation = nn::Activation::tanh;
  const auto mr = detect_modes(sample_histogram(relu, bundled(), 4));
  const auto mt = detect_modes(sample_histogram(tanh, bundled(), 4));
  EXPECT_LT(mt.modes.size(), mr.modes.size());
  EXPECT_GE(mt.modes.size(), 1u);
}

TEST(DetectModes, ZeroMassHistogramThrows) {
  LossHistogram h;
  h.bin_edges = {0.0, 1.0, 2.0};
  h.counts = {0, 0};
  h.n_trials = 3;
  h.overflow_count = 3;
  EXPECT_THROW(detect_modes(h), std::domain_error);
}

TEST(ZeroModeMass, StableUnderDoubledTrials) {
  auto cfg = relu_uniform(9, 3, 50000);
  const double p1 = zero_mode_mass(sample_histogram(cfg, bundled(), 4));
  cfg.n_trials = 100000;
  const double p2 = zero_mode_mass(sample_histogram(cfg, bundled(), 4));
  const double se = std::sqrt(std::max(p1 * (1 - p1), 1e-6) / 50000.0);
  EXPECT_LT(std::abs(p1 - p2), 5 * se);
}

TEST(TailResample, ZeroTargetConsumesNothing) {
  const auto r = tail_resample(relu_uniform(9, 3, 100), bundled(), 0.5, 0, 1000);
  EXPECT_EQ(r.trials_consumed, 0u);
  EXPECT_EQ(r.retained, 0u);
  EXPECT_TRUE(r.reachable);
}

TEST(TailResample, UnreachableBoundaryIsReported) {
  const auto r = tail_resample(relu_uniform(9, 3, 100), bundled(), 1e-12, 10, 5000);
  EXPECT_FALSE(r.reachable);
  EXPECT_EQ(r.trials_consumed, 5000u);
  EXPECT_EQ(r.message, "tail unreachable at this sampling budget");
}

TEST(TailResample, RetainsFreshTrialsBelowBoundary) {
  const auto cfg = relu_uniform(9, 3, 1000);
  const double boundary = std::numbers::ln2 - 0.1;
  const auto r = tail_resample(cfg, bundled(), boundary, 300, 200000, 4);
  ASSERT_EQ(r.retained, 300u);
  EXPECT_EQ(r.tail.n_trials, 300u);
  EXPECT_LT(r.tail.max_loss, boundary);
  // oracle: re-evaluate the consumed trials directly
  const auto losses = sample_losses(cfg, bundled(), cfg.n_trials, r.trials_consumed);
  EXPECT_EQ(static_cast<std::uint64_t>(std::count_if(losses.begin(), losses.end(), [&](double l) { return l < boundary; })),
            300u);
  EXPECT_LT(losses.back(), boundary);  // stops on the trial that completes the target
  EXPECT_EQ(r.acceptance_rate, 300.0 / static_cast<double>(r.trials_consumed));
  const auto again = tail_resample(cfg, bundled(), boundary, 300, 200000, 1);
  EXPECT_EQ(again.tail.counts, r.tail.counts);
  EXPECT_EQ(again.trials_consumed, r.trials_consumed);
}

TEST(TailResample, AcceptanceRateMatchesMainHistogram) {
  auto cfg = relu_uniform(9, 3, 100000);
  const double boundary = std::numbers::ln2 - 0.1;
  const auto h = sample_histogram(cfg, bundled(), 4);
  const auto losses = sample_losses(cfg, bundled(), 0, cfg.n_trials, 4);
  const double p =
      static_cast<double>(std::count_if(losses.begin(), losses.end(), [&](double l) { return l < boundary; })) / 1e5;
  const auto r = tail_resample(cfg, bundled(), boundary, 2000, 2000000, 4);
  const double se = std::sqrt(p * (1 - p) / 1e5 + r.acceptance_rate * (1 - r.acceptance_rate) / r.trials_consumed);
  EXPECT_LT(std::abs(r.acceptance_rate - p), 5 * se);
  EXPECT_LE(std::abs(left_tail_mass(h) - p), 0.01);
}

TEST(CompareHistograms, IdentityAndShift) {
  const auto h = sample_histogram(relu_uniform(9, 3, 5000), bundled());
  const auto same = compare_histograms(h, h);
  EXPECT_EQ(same.zero_mode_mass_delta, 0.0);
  EXPECT_EQ(same.left_tail_mass_delta, 0.0);
  EXPECT_EQ(same.wasserstein, 0.0);

  std::vector<double> a, b;
  for (int k = 10; k < 60; ++k)
    for (int i = 0; i < k; ++i) a.push_back(0.01 * k + 0.005), b.push_back(0.01 * (k + 1) + 0.005);
  const auto r = compare_histograms(bin_losses(a, FixedBins{}), bin_losses(b, FixedBins{}));
  EXPECT_NEAR(r.wasserstein, 0.01, 1e-9);

  auto small = relu_uniform(9, 3, 20000, 1.0);
  auto big = relu_uniform(9, 3, 20000, 2.0);
  const auto s = compare_histograms(sample_histogram(small, bundled(), 4), sample_histogram(big, bundled(), 4));
  EXPECT_GT(s.zero_mode_mass_delta, 0.0);
  EXPECT_GT(s.wasserstein, 0.0);

  auto other = h;
  other.bin_edges.back() += 1.0;
  EXPECT_THROW(compare_histograms(h, other), std::domain_error);
}
