#pragma once

// Maximum-likelihood fits of left-bounded (at 0) distributions and a one-sample
// Kolmogorov-Smirnov goodness-of-fit test.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace losslab::fit {

enum class Family { lognormal, gamma, weibull };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::lognormal: return "lognormal";
    case Family::gamma: return "gamma";
    case Family::weibull: return "weibull";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  for (auto f : {Family::lognormal, Family::gamma, Family::weibull})
    if (to_string(f) == s) return f;
  throw std::domain_error("unknown distribution family '" + std::string(s) + "'");
}

/// lognormal: (mu, sigma); gamma: (shape k, scale theta); weibull: (shape k, scale lambda).
struct FitResult {
  Family family = Family::lognormal;
  double p1 = 0.0;
  double p2 = 0.0;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct GofReport {
  double ks_statistic = 0.0;
  double p_value = 0.0;
  std::size_t n = 0;
};

inline constexpr double kFitTolerance = 1e-10;
inline constexpr int kMaxIterations = 200;
inline constexpr std::size_t kMinSamples = 10;

namespace detail {

inline void check_samples(std::span<const double> xs) {
  if (xs.size() < kMinSamples)
    throw std::domain_error("fit needs at least " + std::to_string(kMinSamples) + " samples");
  for (double x : xs)
    if (!(std::isfinite(x) && x > 0.0)) throw std::domain_error("fit samples must be finite and > 0");
}

}  // namespace detail

inline double log_likelihood(Family family, double p1, double p2, std::span<const double> xs) {
  double ll = 0.0;
  switch (family) {
    case Family::lognormal: {
      const double c = -std::log(p2) - 0.5 * std::log(2.0 * std::numbers::pi);
      for (double x : xs) {
        const double z = (std::log(x) - p1) / p2;
        ll += c - std::log(x) - 0.5 * z * z;
      }
      break;
    }
    case Family::gamma: {
      const double c = -std::lgamma(p1) - p1 * std::log(p2);
      for (double x : xs) ll += c + (p1 - 1.0) * std::log(x) - x / p2;
      break;
    }
    case Family::weibull: {
      const double c = std::log(p1) - std::log(p2);
      for (double x : xs) {
        const double lr = std::log(x) - std::log(p2);
        ll += c + (p1 - 1.0) * lr - std::exp(p1 * lr);
      }
      break;
    }
  }
  return ll;
}

inline double cdf(Family family, double p1, double p2, double x) {
  if (x <= 0.0) return 0.0;
  switch (family) {
    case Family::lognormal: return 0.5 * std::erfc(-(std::log(x) - p1) / (p2 * std::numbers::sqrt2));
    case Family::gamma: return boost::math::gamma_p(p1, x / p2);
    case Family::weibull: return -std::expm1(-std::pow(x / p2, p1));
  }
  return 0.0;
}

inline double cdf(const FitResult& f, double x) { return cdf(f.family, f.p1, f.p2, x); }

/// Closed form: mean and (population) standard deviation of log-samples.
inline FitResult fit_lognormal(std::span<const double> xs) {
  detail::check_samples(xs);
  const double n = static_cast<double>(xs.size());
  double mu = 0.0;
  for (double x : xs) mu += std::log(x);
  mu /= n;
  double ss = 0.0;
  for (double x : xs) ss += (std::log(x) - mu) * (std::log(x) - mu);
  FitResult r{Family::lognormal, mu, std::sqrt(ss / n), 0.0, false, 0};
  r.converged = r.p2 > 1e-12 * std::max(1.0, std::abs(mu));  // below this the spread is round-off
  if (r.converged) r.log_likelihood = log_likelihood(r.family, r.p1, r.p2, xs);
  return r;
}

/// Newton iteration on ln k - digamma(k) = ln(mean x) - mean(ln x), then
/// theta = mean / k.
inline FitResult fit_gamma(std::span<const double> xs) {
  detail::check_samples(xs);
  const double n = static_cast<double>(xs.size());
  double mean = 0.0, mean_log = 0.0;
  for (double x : xs) {
    mean += x;
    mean_log += std::log(x);
  }
  mean /= n;
  mean_log /= n;
  const double s = std::log(mean) - mean_log;

  FitResult r{Family::gamma, 1.0, mean, 0.0, false, 0};
  if (!(s > 1e-14)) return r;  // zero spread: no finite maximum

  double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  for (int it = 1; it <= kMaxIterations; ++it) {
    const double g = std::log(k) - boost::math::digamma(k) - s;
    const double dg = 1.0 / k - boost::math::trigamma(k);
    double next = k - g / dg;
    if (!(next > 0.0)) next = 0.5 * k;
    r.iterations = it;
    const bool done = std::abs(next - k) <= kFitTolerance * std::max(1.0, k);
    k = next;
    if (done) {
      r.converged = true;
      break;
    }
  }
  r.p1 = k;
  r.p2 = mean / k;
  if (r.converged) r.log_likelihood = log_likelihood(r.family, r.p1, r.p2, xs);
  return r;
}

/// Newton iteration on the shape profile equation
///   1/k + mean(ln x) - sum(x^k ln x) / sum(x^k) = 0,
/// then lambda = (mean x^k)^(1/k). Samples are rescaled by their maximum to
/// keep x^k finite.
inline FitResult fit_weibull(std::span<const double> xs) {
  detail::check_samples(xs);
  const double n = static_cast<double>(xs.size());
  const double x_max = *std::max_element(xs.begin(), xs.end());
  std::vector<double> ly(xs.size());
  double mean_ly = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ly[i] = std::log(xs[i] / x_max);
    mean_ly += ly[i];
  }
  mean_ly /= n;
  double var_ly = 0.0;
  for (double v : ly) var_ly += (v - mean_ly) * (v - mean_ly);
  var_ly /= n;

  FitResult r{Family::weibull, 1.0, x_max, 0.0, false, 0};
  if (!(var_ly > 1e-28)) return r;  // zero spread: shape diverges

  auto sums = [&](double k, double& s0, double& s1, double& s2) {
    s0 = s1 = s2 = 0.0;
    for (double v : ly) {
      const double w = std::exp(k * v);
      s0 += w;
      s1 += w * v;
      s2 += w * v * v;
    }
  };
  double k = 1.2 / std::sqrt(var_ly);
  double s0 = 0, s1 = 0, s2 = 0;
  for (int it = 1; it <= kMaxIterations; ++it) {
    sums(k, s0, s1, s2);
    const double f = 1.0 / k + mean_ly - s1 / s0;
    const double df = -1.0 / (k * k) - (s2 * s0 - s1 * s1) / (s0 * s0);
    double next = k - f / df;
    if (!(next > 0.0)) next = 0.5 * k;
    r.iterations = it;
    const bool done = std::abs(next - k) <= kFitTolerance * std::max(1.0, k);
    k = next;
    if (done) {
      r.converged = true;
      break;
    }
  }
  sums(k, s0, s1, s2);
  r.p1 = k;
  r.p2 = x_max * std::pow(s0 / n, 1.0 / k);
  if (r.converged) r.log_likelihood = log_likelihood(r.family, r.p1, r.p2, xs);
  return r;
}

inline FitResult fit(Family family, std::span<const double> xs) {
  switch (family) {
    case Family::lognormal: return fit_lognormal(xs);
    case Family::gamma: return fit_gamma(xs);
    case Family::weibull: return fit_weibull(xs);
  }
  throw std::domain_error("unknown family");
}

/// Asymptotic Kolmogorov survival function P(K > lambda), 100-term series.
/// The theta-function form is used below lambda = 1 where the alternating
/// series converges slowly.
inline double kolmogorov_survival(double lambda) {
  constexpr int kTerms = 100;
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.0) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf_sum = 0.0;
    for (int j = 1; j <= kTerms; ++j) {
      const double odd = 2.0 * j - 1.0;
      cdf_sum += std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * cdf_sum, 0.0, 1.0);
  }
  double q = 0.0;
  for (int j = 1; j <= kTerms; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    q += (j % 2 == 1 ? 2.0 : -2.0) * term;
  }
  return std::clamp(q, 0.0, 1.0);
}

/// sup |F_n - F| over the sorted sample, max(i/n - F(x_i), F(x_i) - (i-1)/n).
template <typename Cdf>
double ks_statistic(std::span<const double> xs, Cdf&& F) {
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = F(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// One-sample KS test against the fitted CDF. The p-value is the asymptotic
/// one and is only approximate when the parameters came from the same sample.
inline GofReport ks_test(std::span<const double> xs, const FitResult& f) {
  if (xs.size() < kMinSamples) throw std::domain_error("ks_test needs at least 10 samples");
  if (!f.converged) throw std::domain_error("ks_test needs a converged fit");
  GofReport g;
  g.n = xs.size();
  g.ks_statistic = ks_statistic(xs, [&](double x) { return cdf(f, x); });
  g.p_value = kolmogorov_survival(std::sqrt(static_cast<double>(g.n)) * g.ks_statistic);
  return g;
}

}  // namespace losslab::fit
