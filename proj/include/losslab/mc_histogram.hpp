#pragma once

// Monte-Carlo loss histograms over untrained random initializations.
//
// Trial i initializes weights from Engine(derive_seed(master_seed, i)) and
// records the mean BCE loss over the selected samples. A trial's loss depends
// on nothing but (config, i), so every histogram is bit-identical for any
// worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "losslab/nanonet.hpp"
#include "losslab/parallel.hpp"
#include "losslab/rng.hpp"

namespace losslab::mc {

/// Loss of a 0.5 sigmoid output, whatever the label.
inline constexpr double kCentralLoss = std::numbers::ln2;

inline constexpr std::size_t kTrialBlock = 2048;

/// Bins [k * width, (k + 1) * width) from 0 up to max_loss; losses at or above
/// max_loss go to the overflow count.
struct FixedBins {
  double width = 0.01;
  double max_loss = 20.0;
  friend bool operator==(const FixedBins&, const FixedBins&) = default;
};

/// bin_count equal bins between the sampled minimum and maximum.
struct MinAnchoredBins {
  std::size_t bin_count = 100;
  friend bool operator==(const MinAnchoredBins&, const MinAnchoredBins&) = default;
};

using BinPolicy = std::variant<FixedBins, MinAnchoredBins>;

struct HistogramConfig {
  nn::NetworkSpec spec;
  std::vector<std::size_t> sample_indices{0};
  std::uint64_t n_trials = 100000;
  BinPolicy bin_policy = FixedBins{};
  std::uint64_t master_seed = 0;

  friend bool operator==(const HistogramConfig&, const HistogramConfig&) = default;

  void validate(std::size_t data_size) const {
    spec.validate();
    if (n_trials == 0) throw std::domain_error("n_trials must be >= 1");
    if (sample_indices.empty()) throw std::domain_error("sample_indices must not be empty");
    for (auto i : sample_indices)
      if (i >= data_size)
        throw std::domain_error("sample index " + std::to_string(i) + " out of range (dataset has " +
                                std::to_string(data_size) + " rows)");
    if (const auto* f = std::get_if<FixedBins>(&bin_policy)) {
      if (!(f->width > 0.0) || !(f->max_loss > 0.0)) throw std::domain_error("fixed bins need width > 0 and max_loss > 0");
    } else if (std::get<MinAnchoredBins>(bin_policy).bin_count == 0) {
      throw std::domain_error("min-anchored bins need bin_count >= 1");
    }
  }
};

struct LossHistogram {
  std::vector<double> bin_edges;        ///< ascending, counts.size() + 1 entries
  std::vector<std::uint64_t> counts;
  std::uint64_t overflow_count = 0;
  std::uint64_t n_trials = 0;
  double min_loss = 0.0;
  double max_loss = 0.0;
  HistogramConfig config;

  std::size_t bin_count() const { return counts.size(); }
  double bin_center(std::size_t k) const { return 0.5 * (bin_edges[k] + bin_edges[k + 1]); }

  /// Bin holding `loss`, if it falls in [first edge, last edge).
  std::optional<std::size_t> bin_of(double loss) const {
    if (bin_edges.size() < 2 || loss < bin_edges.front() || loss >= bin_edges.back()) return std::nullopt;
    const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), loss);
    return static_cast<std::size_t>(it - bin_edges.begin()) - 1;
  }

  std::uint64_t total_counted() const {
    std::uint64_t s = overflow_count;
    for (auto c : counts) s += c;
    return s;
  }
};

struct Mode {
  double center = 0.0;
  std::uint64_t count = 0;
  std::uint64_t prominence = 0;
};

struct ModeReport {
  std::vector<Mode> modes;  ///< ascending by center
  double central_mode_loss = std::numeric_limits<double>::quiet_NaN();
  double zero_mode_mass = 0.0;
  double left_tail_mass = 0.0;
  double central_reference = kCentralLoss;
};

struct TailResult {
  LossHistogram tail;  ///< retained losses only; tail.n_trials == retained
  std::uint64_t retained = 0;
  std::uint64_t trials_consumed = 0;
  double acceptance_rate = 0.0;
  bool reachable = true;
  std::string message;
};

struct ShiftReport {
  double zero_mode_mass_delta = 0.0;  ///< b - a
  double left_tail_mass_delta = 0.0;  ///< b - a
  double wasserstein = 0.0;
};

namespace detail {

inline std::vector<nn::EncodedSample> select(std::span<const nn::EncodedSample> data,
                                             std::span<const std::size_t> indices) {
  std::vector<nn::EncodedSample> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(data[i]);
  return out;
}

struct TrialEvaluator {
  const HistogramConfig& config;
  std::vector<nn::EncodedSample> samples;
  nn::WeightSet weights;
  nn::ForwardWorkspace scratch;

  TrialEvaluator(const HistogramConfig& cfg, std::span<const nn::EncodedSample> data)
      : config(cfg), samples(select(data, cfg.sample_indices)), weights(nn::zero_weights(cfg.spec)) {
    for (const auto& s : samples)
      if (s.features.size() != cfg.spec.input_dim)
        throw std::domain_error("selected sample length does not match input_dim");
  }

  double operator()(std::uint64_t trial) {
    Engine eng(derive_seed(config.master_seed, trial));
    nn::fill_init_weights(config.spec, eng, weights);
    const double loss = nn::mean_loss(weights, samples, scratch);
    if (!std::isfinite(loss)) throw std::logic_error("non-finite loss despite probability clamp");
    return loss;
  }
};

inline std::vector<double> fixed_edges(const FixedBins& f) {
  const auto n = static_cast<std::size_t>(std::ceil(f.max_loss / f.width - 1e-9));
  std::vector<double> edges(std::max<std::size_t>(n, 1) + 1);
  for (std::size_t k = 0; k < edges.size(); ++k) edges[k] = static_cast<double>(k) * f.width;
  return edges;
}

/// Loss -> bin under fixed edges, with floor() corrected against the edges.
inline std::optional<std::size_t> fixed_bin(const std::vector<double>& edges, double width, double loss) {
  if (loss < 0.0 || loss >= edges.back()) return std::nullopt;
  auto k = static_cast<std::size_t>(loss / width);
  const std::size_t last = edges.size() - 2;
  k = std::min(k, last);
  while (k > 0 && loss < edges[k]) --k;
  while (k < last && loss >= edges[k + 1]) ++k;
  return k;
}

}  // namespace detail

/// Losses of trials [first, first + count), in trial order.
inline std::vector<double> sample_losses(const HistogramConfig& config, std::span<const nn::EncodedSample> data,
                                         std::uint64_t first, std::uint64_t count, std::size_t workers = 1) {
  config.validate(data.size());
  const auto blocks = map_blocks(count, kTrialBlock, workers, [&](std::size_t begin, std::size_t end) {
    detail::TrialEvaluator eval(config, data);
    std::vector<double> out(end - begin);
    for (std::size_t i = begin; i < end; ++i) out[i - begin] = eval(first + i);
    return out;
  });
  std::vector<double> losses;
  losses.reserve(count);
  for (const auto& b : blocks) losses.insert(losses.end(), b.begin(), b.end());
  return losses;
}

/// Bins an explicit list of losses under `policy`.
inline LossHistogram bin_losses(std::span<const double> losses, const BinPolicy& policy) {
  if (losses.empty()) throw std::domain_error("cannot bin an empty loss list");
  LossHistogram h;
  h.n_trials = losses.size();
  const auto [mn, mx] = std::minmax_element(losses.begin(), losses.end());
  h.min_loss = *mn;
  h.max_loss = *mx;
  if (const auto* f = std::get_if<FixedBins>(&policy)) {
    h.bin_edges = detail::fixed_edges(*f);
    h.counts.assign(h.bin_edges.size() - 1, 0);
    for (double l : losses) {
      if (const auto k = detail::fixed_bin(h.bin_edges, f->width, l)) ++h.counts[*k];
      else ++h.overflow_count;
    }
  } else {
    const std::size_t n = std::get<MinAnchoredBins>(policy).bin_count;
    const double lo = h.min_loss;
    const double span = h.max_loss > h.min_loss ? h.max_loss - h.min_loss : std::max(1e-12, std::abs(lo) * 1e-12);
    h.bin_edges.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) h.bin_edges[k] = lo + span * static_cast<double>(k) / static_cast<double>(n);
    h.bin_edges.back() = std::nextafter(lo + span, INFINITY);  // last bin closed on the sampled max
    h.counts.assign(n, 0);
    for (double l : losses) ++h.counts[*h.bin_of(l)];
  }
  return h;
}

/// Runs config.n_trials untrained trials and bins their losses.
inline LossHistogram sample_histogram(const HistogramConfig& config, std::span<const nn::EncodedSample> data,
                                      std::size_t workers = 1) {
  config.validate(data.size());
  LossHistogram h;
  if (const auto* f = std::get_if<FixedBins>(&config.bin_policy)) {
    // Per-block count vectors merged by elementwise sum.
    struct Partial {
      std::vector<std::uint64_t> counts;
      std::uint64_t overflow = 0;
      double lo = INFINITY, hi = -INFINITY;
    };
    const auto edges = detail::fixed_edges(*f);
    const auto parts = map_blocks(config.n_trials, kTrialBlock, workers, [&](std::size_t begin, std::size_t end) {
      detail::TrialEvaluator eval(config, data);
      Partial p;
      p.counts.assign(edges.size() - 1, 0);
      for (std::size_t i = begin; i < end; ++i) {
        const double l = eval(i);
        p.lo = std::min(p.lo, l);
        p.hi = std::max(p.hi, l);
        if (const auto k = detail::fixed_bin(edges, f->width, l)) ++p.counts[*k];
        else ++p.overflow;
      }
      return p;
    });
    h.bin_edges = edges;
    h.counts.assign(edges.size() - 1, 0);
    h.min_loss = INFINITY;
    h.max_loss = -INFINITY;
    for (const auto& p : parts) {
      for (std::size_t k = 0; k < p.counts.size(); ++k) h.counts[k] += p.counts[k];
      h.overflow_count += p.overflow;
      h.min_loss = std::min(h.min_loss, p.lo);
      h.max_loss = std::max(h.max_loss, p.hi);
    }
    h.n_trials = config.n_trials;
  } else {
    const auto losses = sample_losses(config, data, 0, config.n_trials, workers);
    h = bin_losses(losses, config.bin_policy);
  }
  h.config = config;
  return h;
}

/// Fraction of trials with loss below x. A bin straddling x is apportioned
/// linearly over the part of it that lies inside [min_loss, max_loss].
inline double mass_below(const LossHistogram& h, double x) {
  if (h.n_trials == 0) throw std::domain_error("histogram is empty");
  if (x <= h.min_loss) return 0.0;
  if (x > h.max_loss) return 1.0;
  double below = 0.0;
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    if (h.counts[k] == 0) continue;
    const double lo = std::max(h.bin_edges[k], h.min_loss);
    const double hi = std::min(h.bin_edges[k + 1], h.max_loss);
    const double tol = 1e-12 * std::max(1.0, std::abs(x));
    if (h.bin_edges[k + 1] <= x + tol) {
      below += static_cast<double>(h.counts[k]);
    } else if (h.bin_edges[k] < x - tol) {
      below += hi > lo ? static_cast<double>(h.counts[k]) * std::clamp((x - lo) / (hi - lo), 0.0, 1.0) : 0.0;
    } else {
      break;
    }
  }
  return std::clamp(below / static_cast<double>(h.n_trials), 0.0, 1.0);
}

/// Fraction of trials with loss < tau.
inline double zero_mode_mass(const LossHistogram& h, double tau = 0.05) {
  if (!(tau > 0.0)) throw std::domain_error("tau must be > 0");
  return mass_below(h, tau);
}

/// Fraction of trials with loss < ln 2 - delta.
inline double left_tail_mass(const LossHistogram& h, double delta = 0.1) {
  if (!(delta > 0.0)) throw std::domain_error("delta must be > 0");
  return mass_below(h, kCentralLoss - delta);
}

/// Peaks of the binned counts ranked by topographic prominence.
///
/// A peak is a maximal run of equal counts whose outer neighbours are strictly
/// lower (bins outside the range count as 0). Its prominence is its height
/// minus the higher of the two lowest points separating it from a strictly
/// higher bin (or from the range end). A peak is reported when its prominence
/// is at least prominence_fraction * max(count) and at least
/// noise_sigmas * sqrt(height + saddle), the counting-noise scale of the
/// height difference; noise_sigmas = 0 disables the second test.
inline ModeReport detect_modes(const LossHistogram& h, double prominence_fraction = 0.05, double tau = 0.05,
                               double delta = 0.1, double noise_sigmas = 5.0) {
  const auto& c = h.counts;
  const std::uint64_t peak_count = c.empty() ? 0 : *std::max_element(c.begin(), c.end());
  if (peak_count == 0) throw std::domain_error("histogram has no in-range counts");
  if (!(prominence_fraction >= 0.0)) throw std::domain_error("prominence fraction must be >= 0");
  if (!(noise_sigmas >= 0.0)) throw std::domain_error("noise sigmas must be >= 0");
  const double threshold = prominence_fraction * static_cast<double>(peak_count);

  ModeReport report;
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && c[j + 1] == c[i]) ++j;
    const std::uint64_t height = c[i];
    const std::uint64_t left = i == 0 ? 0 : c[i - 1];
    const std::uint64_t right = j + 1 == n ? 0 : c[j + 1];
    if (height > 0 && left < height && right < height) {
      std::uint64_t left_min = height;
      std::size_t k = i;
      while (true) {
        if (k == 0) { left_min = 0; break; }
        --k;
        if (c[k] > height) break;
        left_min = std::min(left_min, c[k]);
      }
      std::uint64_t right_min = height;
      k = j;
      while (true) {
        if (k + 1 == n) { right_min = 0; break; }
        ++k;
        if (c[k] > height) break;
        right_min = std::min(right_min, c[k]);
      }
      const std::uint64_t saddle = std::max(left_min, right_min);
      const std::uint64_t prominence = height - saddle;
      const double noise = noise_sigmas * std::sqrt(static_cast<double>(height + saddle));
      if (prominence > 0 && static_cast<double>(prominence) >= threshold && static_cast<double>(prominence) >= noise)
        report.modes.push_back({0.5 * (h.bin_edges[i] + h.bin_edges[j + 1]), height, prominence});
    }
    i = j + 1;
  }

  double best = INFINITY;
  for (const auto& m : report.modes)
    if (std::abs(m.center - kCentralLoss) < best) {
      best = std::abs(m.center - kCentralLoss);
      report.central_mode_loss = m.center;
    }
  report.zero_mode_mass = zero_mode_mass(h, tau);
  report.left_tail_mass = left_tail_mass(h, delta);
  return report;
}

/// Keeps drawing trials n_trials, n_trials + 1, ... and retains losses below
/// left_boundary until target_count are retained or max_trials are spent.
/// The stopping trial is found by an in-order scan, so the result does not
/// depend on `workers`.
inline TailResult tail_resample(const HistogramConfig& config, std::span<const nn::EncodedSample> data,
                                double left_boundary, std::uint64_t target_count, std::uint64_t max_trials,
                                std::size_t workers = 1) {
  config.validate(data.size());
  if (!(left_boundary > 0.0)) throw std::domain_error("left boundary must be > 0");

  BinPolicy tail_policy;
  if (const auto* f = std::get_if<FixedBins>(&config.bin_policy))
    tail_policy = FixedBins{f->width, left_boundary};
  else
    tail_policy = FixedBins{left_boundary / static_cast<double>(std::get<MinAnchoredBins>(config.bin_policy).bin_count),
                            left_boundary};

  std::vector<double> kept;
  std::uint64_t consumed = 0;
  const std::uint64_t round = kTrialBlock * std::max<std::size_t>(workers, 1) * 4;
  while (kept.size() < target_count && consumed < max_trials) {
    const std::uint64_t count = std::min(round, max_trials - consumed);
    const std::uint64_t first = config.n_trials + consumed;
    const auto blocks = map_blocks(count, kTrialBlock, workers, [&](std::size_t begin, std::size_t end) {
      detail::TrialEvaluator eval(config, data);
      std::vector<std::pair<std::uint64_t, double>> hits;
      for (std::size_t i = begin; i < end; ++i)
        if (const double l = eval(first + i); l < left_boundary) hits.emplace_back(i, l);
      return hits;
    });
    std::uint64_t used = count;
    for (const auto& b : blocks) {
      for (const auto& [i, l] : b) {
        kept.push_back(l);
        if (kept.size() == target_count) {
          used = i + 1;
          break;
        }
      }
      if (kept.size() == target_count) break;
    }
    consumed += used;
  }

  TailResult r;
  r.retained = kept.size();
  r.trials_consumed = consumed;
  r.acceptance_rate = consumed > 0 ? static_cast<double>(kept.size()) / static_cast<double>(consumed) : 0.0;
  if (!kept.empty()) {
    r.tail = bin_losses(kept, tail_policy);
  } else {
    r.tail.bin_edges = detail::fixed_edges(std::get<FixedBins>(tail_policy));
    r.tail.counts.assign(r.tail.bin_edges.size() - 1, 0);
  }
  r.tail.config = config;
  if (target_count > 0 && kept.empty()) {
    r.reachable = false;
    r.message = "tail unreachable at this sampling budget";
  }
  return r;
}

/// Shift between two histograms over identical bins. The 1-Wasserstein
/// distance uses in-range counts, each normalized to unit mass.
inline ShiftReport compare_histograms(const LossHistogram& a, const LossHistogram& b, double tau = 0.05,
                                      double delta = 0.1) {
  if (a.bin_edges != b.bin_edges) throw std::domain_error("histograms must share bin edges");
  ShiftReport r;
  r.zero_mode_mass_delta = zero_mode_mass(b, tau) - zero_mode_mass(a, tau);
  r.left_tail_mass_delta = left_tail_mass(b, delta) - left_tail_mass(a, delta);
  double total_a = 0.0, total_b = 0.0;
  for (std::size_t k = 0; k < a.counts.size(); ++k) {
    total_a += static_cast<double>(a.counts[k]);
    total_b += static_cast<double>(b.counts[k]);
  }
  if (total_a == 0.0 || total_b == 0.0) throw std::domain_error("histogram has no in-range counts");
  double cdf_a = 0.0, cdf_b = 0.0;
  for (std::size_t k = 0; k + 1 < a.counts.size(); ++k) {
    cdf_a += static_cast<double>(a.counts[k]) / total_a;
    cdf_b += static_cast<double>(b.counts[k]) / total_b;
    r.wasserstein += std::abs(cdf_a - cdf_b) * (a.bin_center(k + 1) - a.bin_center(k));
  }
  return r;
}

}  // namespace losslab::mc
