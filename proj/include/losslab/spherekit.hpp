#pragma once

// Geometry of n-balls: closed-form volume and surface, the dimension at which
// they peak, Monte-Carlo pairwise distances and the volume of a Gaussian
// density superlevel set.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "losslab/parallel.hpp"
#include "losslab/rng.hpp"

namespace losslab::sphere {

struct SphereMetrics {
  double dimension = 0.0;
  double radius = 0.0;
  double volume = 0.0;
  double surface = 0.0;
};

struct SupportVolumeQuery {
  unsigned dimension = 1;
  double sigma = 1.0;
  double density_threshold = 1e-10;
};

struct DistanceEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::uint64_t n_trials = 0;
};

struct PeakDimension {
  double real_peak = 0.0;  ///< continuous argmax over n in [0.1, 200]
  int integer_peak = 0;    ///< argmax over n in {1, ..., 200}
};

namespace detail {

inline void require_positive(double v, const char* what) {
  if (!std::isfinite(v) || v <= 0.0)
    throw std::domain_error(std::string(what) + " must be finite and > 0");
}

template <typename F>
double golden_section_max(F&& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// ln V_n(r) = (n/2) ln(pi) + n ln(r) - lgamma(n/2 + 1).
inline double log_ball_volume(double n, double r) {
  detail::require_positive(n, "dimension");
  detail::require_positive(r, "radius");
  return 0.5 * n * std::log(std::numbers::pi) + n * std::log(r) - std::lgamma(0.5 * n + 1.0);
}

/// Volume of the n-ball of radius r. Evaluated in log space for every n, so it
/// underflows gracefully to 0 instead of overflowing Gamma past n ~ 170.
inline double ball_volume(double n, double r) { return std::exp(log_ball_volume(n, r)); }

/// Surface measure of the (n-1)-sphere bounding the n-ball: dV/dr = n V / r.
inline double sphere_surface(double n, double r) { return n * ball_volume(n, r) / r; }

inline SphereMetrics sphere_metrics(double n, double r) {
  const double v = ball_volume(n, r);
  return {n, r, v, n * v / r};
}

/// Dimension maximizing the ball volume at radius r.
inline PeakDimension volume_peak_dimension(double r) {
  detail::require_positive(r, "radius");
  PeakDimension peak;
  peak.real_peak = detail::golden_section_max([r](double n) { return log_ball_volume(n, r); }, 0.1,
                                              200.0, 1e-8);
  double best = -INFINITY;
  for (int n = 1; n <= 200; ++n) {
    const double lv = log_ball_volume(n, r);
    if (lv > best) {
      best = lv;
      peak.integer_peak = n;
    }
  }
  return peak;
}

/// Same search applied to the surface measure.
inline PeakDimension surface_peak_dimension(double r) {
  detail::require_positive(r, "radius");
  auto log_surface = [r](double n) { return std::log(n) + log_ball_volume(n, r) - std::log(r); };
  PeakDimension peak;
  peak.real_peak = detail::golden_section_max(log_surface, 0.1, 200.0, 1e-8);
  double best = -INFINITY;
  for (int n = 1; n <= 200; ++n) {
    if (const double ls = log_surface(n); ls > best) {
      best = ls;
      peak.integer_peak = n;
    }
  }
  return peak;
}

/// Writes `v` as a point drawn uniformly from the n-ball of radius r.
inline void sample_ball_point(Engine& eng, double r, std::vector<double>& v) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = gauss(eng);
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = r * std::pow(unit(eng), 1.0 / static_cast<double>(v.size()));
  const double scale = radius / std::sqrt(norm2);
  for (auto& x : v) x *= scale;
}

/// Monte-Carlo mean distance between two uniform points of the n-ball.
///
/// Trial i draws both points from the stream derive_seed(seed, i); moments are
/// reduced over fixed 4096-trial blocks in order, so the result is bit-identical
/// for any `workers`.
inline DistanceEstimate expected_pairwise_distance(unsigned n, double r, std::uint64_t n_trials,
                                                   std::uint64_t seed,
                                                   std::size_t workers = 1) {
  if (n == 0) throw std::domain_error("dimension must be >= 1");
  detail::require_positive(r, "radius");
  if (n_trials < 2) throw std::domain_error("n_trials must be >= 2");

  struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  const auto blocks = map_blocks(n_trials, 4096, workers, [&](std::size_t begin, std::size_t end) {
    Moments m;
    std::vector<double> a(n), b(n);
    for (std::size_t i = begin; i < end; ++i) {
      Engine eng = make_engine(seed, i);
      sample_ball_point(eng, r, a);
      sample_ball_point(eng, r, b);
      double d2 = 0.0;
      for (unsigned k = 0; k < n; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
      const double d = std::sqrt(d2);
      m.sum += d;
      m.sum_sq += d * d;
    }
    return m;
  });

  Moments total;
  for (const auto& m : blocks) {
    total.sum += m.sum;
    total.sum_sq += m.sum_sq;
  }
  const double count = static_cast<double>(n_trials);
  const double mean = total.sum / count;
  const double var = std::max(0.0, (total.sum_sq - count * mean * mean) / (count - 1.0));
  return {mean, std::sqrt(var / count), n_trials};
}

/// Log of the peak density (2 pi sigma^2)^(-d/2) of an isotropic Gaussian.
inline double gaussian_log_peak_density(unsigned d, double sigma) {
  return -0.5 * d * std::log(2.0 * std::numbers::pi * sigma * sigma);
}

/// Radius at which the isotropic Gaussian density falls to the threshold, or 0
/// when the threshold is at or above the peak.
inline double gaussian_support_radius(const SupportVolumeQuery& q) {
  if (q.dimension == 0) throw std::domain_error("dimension must be >= 1");
  detail::require_positive(q.sigma, "sigma");
  detail::require_positive(q.density_threshold, "density threshold");
  const double gap = gaussian_log_peak_density(q.dimension, q.sigma) - std::log(q.density_threshold);
  if (gap <= 0.0) return 0.0;
  return q.sigma * std::sqrt(2.0 * gap);
}

/// Volume of the superlevel set {w : N(w; 0, sigma^2 I) > t}, a d-ball.
inline double gaussian_support_volume(const SupportVolumeQuery& q) {
  const double radius = gaussian_support_radius(q);
  return radius > 0.0 ? ball_volume(q.dimension, radius) : 0.0;
}

/// Volume and surface table for n = 1..n_max at radius r.
inline std::vector<SphereMetrics> sphere_curve(unsigned n_max, double r) {
  std::vector<SphereMetrics> out;
  out.reserve(n_max);
  for (unsigned n = 1; n <= n_max; ++n) out.push_back(sphere_metrics(n, r));
  return out;
}

}  // namespace losslab::sphere
