// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbfit/error.hpp"
#include "sbfit/rng.hpp"
#include "sbfit/special.hpp"

namespace sbfit {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Johnson SB parameters: shapes delta, gamma; range lambda; location xi.
/// Support is the open interval (xi, xi + lambda).
struct JsbParams {
  double delta = 1.0;
  double gamma = 0.0;
  double lambda = 1.0;
  double xi = 0.0;

  bool valid() const noexcept {
    return delta > 0.0 && lambda > 0.0 && std::isfinite(delta) && std::isfinite(gamma) &&
           std::isfinite(lambda) && std::isfinite(xi);
  }
  double upper() const noexcept { return xi + lambda; }
  bool operator==(const JsbParams&) const = default;
};

/// Three-parameter Weibull: shape alpha, scale beta, location mu. Support (mu, inf).
struct WeibullParams {
  double alpha = 1.0;
  double beta = 1.0;
  double mu = 0.0;

  bool valid() const noexcept {
    return alpha > 0.0 && beta > 0.0 && std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(mu);
  }
  bool operator==(const WeibullParams&) const = default;
};

/// Sorted sample of finite observations with cached extremes.
class Dataset {
 public:
  explicit Dataset(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DataError("dataset is empty");
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!std::isfinite(values_[i])) throw DataError("observation " + std::to_string(i + 1) + " is not finite");
    std::sort(values_.begin(), values_.end());
  }

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double min() const noexcept { return values_.front(); }
  double max() const noexcept { return values_.back(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

 private:
  std::vector<double> values_;
};

namespace detail {

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": argument is not finite");
}

inline void require_valid(const JsbParams& p) {
  if (!p.valid()) throw std::invalid_argument("invalid JSB parameters (need delta > 0, lambda > 0, all finite)");
}

inline void require_valid(const WeibullParams& p) {
  if (!p.valid()) throw std::invalid_argument("invalid Weibull parameters (need alpha > 0, beta > 0, all finite)");
}

/// Keeps a transformed draw strictly inside (lo, hi) when rounding lands on an endpoint.
inline double clamp_open(double x, double lo, double hi) {
  if (x <= lo) x = std::nextafter(lo, hi);
  if (x >= hi) x = std::nextafter(hi, lo);
  return x;
}

}  // namespace detail

// ---------------------------------------------------------------- Johnson SB

/// Log density; -inf outside the open support.
inline double jsb_log_pdf(const JsbParams& t, double x) {
  detail::require_valid(t);
  detail::require_finite(x, "jsb_log_pdf");
  double lo = x - t.xi;
  double hi = t.lambda + t.xi - x;
  if (!(lo > 0.0 && hi > 0.0)) return kNegInf;
  double z = t.gamma + t.delta * (std::log(lo) - std::log(hi));
  return std::log(t.delta) + std::log(t.lambda) - std::log(lo) - std::log(hi) + normal_log_pdf(z);
}

inline double jsb_pdf(const JsbParams& t, double x) { return std::exp(jsb_log_pdf(t, x)); }

/// CDF through the normal transform z = gamma + delta * log((x - xi) / (xi + lambda - x)).
inline double jsb_cdf(const JsbParams& t, double x) {
  detail::require_valid(t);
  detail::require_finite(x, "jsb_cdf");
  double lo = x - t.xi;
  double hi = t.lambda + t.xi - x;
  if (lo <= 0.0) return 0.0;
  if (hi <= 0.0) return 1.0;
  return normal_cdf(t.gamma + t.delta * (std::log(lo) - std::log(hi)));
}

inline double jsb_quantile(const JsbParams& t, double p) {
  detail::require_valid(t);
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("jsb_quantile: p must lie in (0, 1)");
  double w = (normal_quantile(p) - t.gamma) / t.delta;
  return t.xi + t.lambda / (1.0 + std::exp(-w));
}

inline std::vector<double> jsb_draws(const JsbParams& t, std::size_t n, RngStream& rng) {
  detail::require_valid(t);
  std::vector<double> out(n);
  for (auto& x : out) {
    double w = (rng.next_normal() - t.gamma) / t.delta;
    x = detail::clamp_open(t.xi + t.lambda / (1.0 + std::exp(-w)), t.xi, t.upper());
  }
  return out;
}

inline Dataset jsb_sample(const JsbParams& t, std::size_t n, RngStream& rng) {
  if (n == 0) throw std::invalid_argument("jsb_sample: n must be >= 1");
  return Dataset(jsb_draws(t, n, rng));
}

// ------------------------------------------------------------------ Weibull

inline double weibull_log_pdf(const WeibullParams& t, double x) {
  detail::require_valid(t);
  detail::require_finite(x, "weibull_log_pdf");
  double y = (x - t.mu) / t.beta;
  if (!(y > 0.0)) return kNegInf;
  double ly = std::log(y);
  return std::log(t.alpha / t.beta) + (t.alpha - 1.0) * ly - std::exp(t.alpha * ly);
}

inline double weibull_pdf(const WeibullParams& t, double x) { return std::exp(weibull_log_pdf(t, x)); }

inline double weibull_cdf(const WeibullParams& t, double x) {
  detail::require_valid(t);
  detail::require_finite(x, "weibull_cdf");
  double y = (x - t.mu) / t.beta;
  if (!(y > 0.0)) return 0.0;
  return -std::expm1(-std::pow(y, t.alpha));
}

inline double weibull_quantile(const WeibullParams& t, double p) {
  detail::require_valid(t);
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("weibull_quantile: p must lie in (0, 1)");
  return t.mu + t.beta * std::pow(-std::log1p(-p), 1.0 / t.alpha);
}

inline std::vector<double> weibull_draws(const WeibullParams& t, std::size_t n, RngStream& rng) {
  detail::require_valid(t);
  std::vector<double> out(n);
  for (auto& x : out) {
    // -log(1 - u) with u in (0,1) is Exp(1); use the open-interval draw directly
    double e = -std::log(rng.next_open01());
    x = t.mu + t.beta * std::pow(e, 1.0 / t.alpha);
    if (x <= t.mu) x = std::nextafter(t.mu, std::numeric_limits<double>::infinity());
  }
  return out;
}

inline Dataset weibull_sample(const WeibullParams& t, std::size_t n, RngStream& rng) {
  if (n == 0) throw std::invalid_argument("weibull_sample: n must be >= 1");
  return Dataset(weibull_draws(t, n, rng));
}

// --------------------------------------------------------- log-likelihoods

/// Sum of log densities; -inf when any observation leaves the support.
inline double jsb_loglik(const JsbParams& t, const Dataset& data) {
  detail::require_valid(t);
  if (!(data.min() > t.xi && data.max() < t.upper())) return kNegInf;
  const double n = static_cast<double>(data.size());
  double sum_log_span = 0.0;
  double sum_sq = 0.0;
  for (double x : data) {
    double a = std::log(x - t.xi);
    double b = std::log(t.lambda + t.xi - x);
    double z = t.gamma + t.delta * (a - b);
    sum_log_span += a + b;
    sum_sq += z * z;
  }
  constexpr double log_sqrt_2pi = 0.91893853320467274178;
  double ll = n * (std::log(t.delta) + std::log(t.lambda) - log_sqrt_2pi) - sum_log_span - 0.5 * sum_sq;
  return std::isnan(ll) ? kNegInf : ll;
}

inline double weibull_loglik(const WeibullParams& t, const Dataset& data) {
  detail::require_valid(t);
  if (!(data.min() > t.mu)) return kNegInf;
  double ll = 0.0;
  for (double x : data) ll += weibull_log_pdf(t, x);
  return std::isnan(ll) ? kNegInf : ll;
}

}  // namespace sbfit
