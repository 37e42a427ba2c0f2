#pragma once

// Probes along a training path: intrinsic dimension of minibatch-gradient
// ensembles, gradient confusion, and the upstream/downstream weight
// interaction ratio of an architecture.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "losslab/nanonet.hpp"
#include "losslab/parallel.hpp"
#include "losslab/rng.hpp"

namespace losslab::probe {

/// Input that carries no geometric information (identical points, zero
/// gradients, ...).
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

using Point = std::vector<double>;

enum class IdMethod { two_nn, participation_ratio };

inline std::string_view to_string(IdMethod m) { return m == IdMethod::two_nn ? "two_nn" : "participation_ratio"; }

struct IdEstimate {
  IdMethod method = IdMethod::two_nn;
  double value = 0.0;
  std::size_t n_points = 0;
  std::size_t dropped_duplicates = 0;
};

/// Fraction of the largest neighbour-distance ratios treated as censored.
inline constexpr double kTwoNnTrim = 0.10;

namespace detail {

inline void check_cloud(std::span<const Point> points, std::size_t min_points) {
  if (points.size() < min_points)
    throw std::domain_error("need at least " + std::to_string(min_points) + " points, got " +
                            std::to_string(points.size()));
  const std::size_t dim = points.front().size();
  if (dim == 0) throw std::domain_error("points must have at least one coordinate");
  for (const auto& p : points) {
    if (p.size() != dim) throw std::domain_error("points differ in dimension");
    for (double v : p)
      if (!std::isfinite(v)) throw std::domain_error("non-finite coordinate");
  }
}

}  // namespace detail

/// TwoNN intrinsic dimension.
///
/// mu_i = r2 / r1 (second over first nearest-neighbour distance) follows a
/// Pareto law with exponent d. The largest 10% of the mu_i are treated as
/// censored at the cut-off order statistic mu_(r), giving the type-II censored
/// maximum-likelihood estimate
///   d = r / (sum_{i <= r} ln mu_(i) + (N - r) ln mu_(r)).
/// Exact duplicates are dropped first and counted.
inline IdEstimate two_nn_id(std::span<const Point> points, std::size_t workers = 1) {
  detail::check_cloud(points, 10);
  std::vector<Point> unique(points.begin(), points.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  const std::size_t dropped = points.size() - unique.size();
  if (unique.size() < 3) throw DegenerateInput("two_nn: fewer than three distinct points");

  const std::size_t n = unique.size();
  const std::size_t dim = unique.front().size();
  const auto blocks = map_blocks(n, 256, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> ratios;
    ratios.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      double r1 = INFINITY, r2 = INFINITY;
      const double* a = unique[i].data();
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double* b = unique[j].data();
        double d2 = 0.0;
        for (std::size_t k = 0; k < dim; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
        if (d2 < r1) {
          r2 = r1;
          r1 = d2;
        } else if (d2 < r2) {
          r2 = d2;
        }
      }
      ratios.push_back(0.5 * std::log(r2 / r1));
    }
    return ratios;
  });
  std::vector<double> log_mu;
  log_mu.reserve(n);
  for (const auto& b : blocks) log_mu.insert(log_mu.end(), b.begin(), b.end());
  std::sort(log_mu.begin(), log_mu.end());

  const auto kept = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor((1.0 - kTwoNnTrim) * static_cast<double>(n))));
  double denom = 0.0;
  for (std::size_t i = 0; i < kept; ++i) denom += log_mu[i];
  denom += static_cast<double>(n - kept) * log_mu[kept - 1];
  if (!(denom > 0.0)) throw DegenerateInput("two_nn: nearest-neighbour ratios are all 1 (tied neighbours)");
  return {IdMethod::two_nn, static_cast<double>(kept) / denom, n, dropped};
}

/// (sum lambda)^2 / sum lambda^2 over the eigenvalues of the centred
/// covariance, computed as tr(M)^2 / ||M||_F^2 on the smaller of the Gram and
/// covariance matrices (they share their nonzero spectrum).
inline IdEstimate participation_ratio_id(std::span<const Point> points) {
  detail::check_cloud(points, 3);
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& p : points)
    for (std::size_t k = 0; k < dim; ++k) mean[k] += p[k];
  for (auto& m : mean) m /= static_cast<double>(n);
  std::vector<double> x(n * dim);  // centred, row-major n x dim
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < dim; ++k) x[i * dim + k] = points[i][k] - mean[k];

  double trace = 0.0, frob2 = 0.0;
  if (n <= dim) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k < dim; ++k) g += x[i * dim + k] * x[j * dim + k];
        if (i == j) {
          trace += g;
          frob2 += g * g;
        } else {
          frob2 += 2.0 * g * g;
        }
      }
  } else {
    std::vector<double> c(dim * dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &x[i * dim];
      for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = a; b < dim; ++b) c[a * dim + b] += row[a] * row[b];
    }
    for (std::size_t a = 0; a < dim; ++a) {
      trace += c[a * dim + a];
      frob2 += c[a * dim + a] * c[a * dim + a];
      for (std::size_t b = a + 1; b < dim; ++b) frob2 += 2.0 * c[a * dim + b] * c[a * dim + b];
    }
  }
  // Spread at round-off level relative to the raw norms counts as none.
  double raw = 0.0;
  for (const auto& p : points)
    for (double v : p) raw += v * v;
  if (!(frob2 > 0.0) || trace <= 1e-24 * raw) throw DegenerateInput("participation ratio: points have zero spread");
  const double pr = std::clamp(trace * trace / frob2, 1.0, static_cast<double>(std::min(n - 1, dim)));
  return {IdMethod::participation_ratio, pr, n, 0};
}

struct GradientEnsemble {
  std::size_t snapshot_epoch = 0;
  std::vector<std::vector<double>> gradients;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
};

/// K minibatch gradients at `weights`. Minibatch k holds batch_size distinct
/// rows drawn with Engine(derive_seed(seed, k)) and kept in ascending order, so
/// a full batch gives K bit-identical gradients.
inline GradientEnsemble gradient_ensemble(const nn::WeightSet& weights, std::span<const nn::EncodedSample> data,
                                          std::size_t batch_size, std::size_t k, std::uint64_t seed,
                                          std::size_t snapshot_epoch = 0) {
  if (data.empty()) throw std::domain_error("gradient ensemble needs data");
  if (batch_size == 0 || batch_size > data.size()) throw std::domain_error("batch_size must be in [1, |data|]");
  if (k < 3) throw std::domain_error("gradient ensemble needs K >= 3");
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  GradientEnsemble ens{snapshot_epoch, {}, batch_size, seed};
  ens.gradients.reserve(k);
  std::vector<std::size_t> batch(batch_size);
  for (std::size_t i = 0; i < k; ++i) {
    Engine eng = make_engine(seed, i);
    std::sample(all.begin(), all.end(), batch.begin(), batch_size, eng);
    ens.gradients.push_back(nn::gradient(weights, data, batch));
  }
  return ens;
}

/// Minimum pairwise cosine similarity among the nonzero gradients; more
/// negative means more confusion.
inline double gradient_confusion(const GradientEnsemble& ens) {
  std::vector<const std::vector<double>*> nonzero;
  std::vector<double> norms;
  for (const auto& g : ens.gradients) {
    double n2 = 0.0;
    for (double v : g) n2 += v * v;
    if (n2 > 0.0) {
      nonzero.push_back(&g);
      norms.push_back(std::sqrt(n2));
    }
  }
  if (nonzero.size() < 2) throw DegenerateInput("gradient confusion: fewer than two nonzero gradients");
  double lowest = 1.0;
  for (std::size_t i = 0; i < nonzero.size(); ++i)
    for (std::size_t j = i + 1; j < nonzero.size(); ++j) {
      const auto& a = *nonzero[i];
      const auto& b = *nonzero[j];
      if (a.size() != b.size()) throw std::domain_error("gradients differ in length");
      double dot = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
      lowest = std::min(lowest, dot / (norms[i] * norms[j]));
    }
  return std::clamp(lowest, -1.0, 1.0);
}

struct TendrilRow {
  std::size_t epoch = 0;
  double loss = 0.0;
  double id_two_nn = std::numeric_limits<double>::quiet_NaN();
  double id_participation = std::numeric_limits<double>::quiet_NaN();
  double confusion = std::numeric_limits<double>::quiet_NaN();
  std::string note;  ///< why a probe is missing, empty otherwise
};

/// Gradient ensemble plus both ID estimators and confusion at every snapshot.
/// Every snapshot uses the same minibatch draws. Degenerate ensembles leave
/// NaN in the affected column and a note; TwoNN needs K >= 10.
inline std::vector<TendrilRow> tendril_profile(const nn::TrainRun& run, std::span<const nn::EncodedSample> data,
                                               std::size_t batch_size, std::size_t k, std::uint64_t seed) {
  if (run.snapshots.size() < 2) throw std::domain_error("tendril profile needs at least two snapshots");
  std::vector<TendrilRow> rows;
  for (const auto& snap : run.snapshots) {
    TendrilRow row;
    row.epoch = snap.epoch;
    row.loss = nn::mean_loss(snap.weights, data);
    const auto ens = gradient_ensemble(snap.weights, data, batch_size, k, seed, snap.epoch);
    auto note = [&row](const std::string& what) { row.note += (row.note.empty() ? "" : "; ") + what; };
    if (k >= 10) {
      try {
        row.id_two_nn = two_nn_id(ens.gradients).value;
      } catch (const DegenerateInput& e) {
        note(e.what());
      }
    } else {
      note("two_nn needs K >= 10");
    }
    try {
      row.id_participation = participation_ratio_id(ens.gradients).value;
    } catch (const DegenerateInput& e) {
      note(e.what());
    }
    try {
      row.confusion = gradient_confusion(ens);
    } catch (const DegenerateInput& e) {
      note(e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Ordered weight pairs (a, b), biases excluded, where a forward path runs
/// through a and then b. For node counts s_0..s_L and weight counts
/// c_l = s_{l-1} s_l: adjacent layers contribute s_{l-1} s_l s_{l+1} (b must
/// leave the node a enters); layers two or more apart contribute c_l c_m.
inline std::uint64_t influence_interactions(const nn::NetworkSpec& spec) {
  spec.validate();
  const auto s = spec.layer_sizes();
  const std::size_t layers = s.size() - 1;
  std::uint64_t total = 0;
  for (std::size_t l = 1; l < layers; ++l) total += s[l - 1] * s[l] * s[l + 1];
  std::uint64_t suffix = 0;  // weights in layers l + 2 .. L
  for (std::size_t l = layers; l >= 1; --l) {
    if (l + 2 <= layers) suffix += s[l + 1] * s[l + 2];
    total += s[l - 1] * s[l] * suffix;
  }
  return total;
}

/// Interactions per parameter (biases count as parameters, not interactors).
inline double influence_ratio(const nn::NetworkSpec& spec) {
  return static_cast<double>(influence_interactions(spec)) / static_cast<double>(nn::param_count(spec));
}

}  // namespace losslab::probe
