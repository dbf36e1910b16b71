// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <boost/math/tools/roots.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sbfit/ars.hpp"
#include "sbfit/distributions.hpp"
#include "sbfit/error.hpp"
#include "sbfit/jsb_bayes.hpp"
#include "sbfit/mh.hpp"
#include "sbfit/rng.hpp"

namespace sbfit {

struct WeibullChainOutput {
  std::vector<WeibullParams> draws;
  std::size_t mu_accepted = 0;
  std::size_t inner_steps_total = 0;
  GibbsConfig config;
  WeibullParams initial;
  double wall_seconds = 0.0;
};

namespace detail {

/// Log full conditional of alpha under the 1/alpha prior:
///   (n-1) log a + (a-1) sum log y - sum y^a,  y = (x - mu) / beta.
struct AlphaConditional {
  std::vector<double> log_y;
  double sum_log_y = 0.0;
  double n = 0.0;

  AlphaConditional(const Dataset& data, double beta, double mu) : log_y(data.size()), n(static_cast<double>(data.size())) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      log_y[i] = std::log((data[i] - mu) / beta);
      sum_log_y += log_y[i];
    }
  }

  LogDensityPoint operator()(double a) const {
    double s0 = 0.0, s1 = 0.0;
    for (double ly : log_y) {
      double p = std::exp(a * ly);
      s0 += p;
      s1 += p * ly;
    }
    return {(n - 1.0) * std::log(a) + (a - 1.0) * sum_log_y - s0, (n - 1.0) / a + sum_log_y - s1};
  }

  double second_derivative(double a) const {
    double s2 = 0.0;
    for (double ly : log_y) s2 += std::exp(a * ly) * ly * ly;
    return -(n - 1.0) / (a * a) - s2;
  }

  /// Root of the (strictly decreasing) first derivative.
  double mode() const {
    auto slope = [this](double a) { return (*this)(a).slope; };
    double lo = 1.0, hi = 1.0;
    for (int i = 0; i < 200 && !(slope(lo) > 0.0); ++i) lo *= 0.5;
    for (int i = 0; i < 200 && !(slope(hi) < 0.0); ++i) hi *= 2.0;
    if (!(slope(lo) > 0.0) || !(slope(hi) < 0.0)) throw NumericalError("sample_alpha: could not bracket the conditional mode");
    boost::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve(slope, lo, hi, boost::math::tools::eps_tolerance<double>(40), iters);
    return 0.5 * (r.first + r.second);
  }
};

/// Log full conditional of mu: (alpha - 1) sum log(x - mu) - sum ((x - mu)/beta)^alpha.
/// Points within 1e-12 of x_(1) are treated as outside the support.
struct MuConditional {
  const Dataset* data;
  double alpha, beta;

  double operator()(double mu) const {
    if (!(mu < data->min() - 1e-12)) return kNegInf;
    double log_beta = std::log(beta);
    double acc = 0.0;
    for (double x : *data) {
      double l = std::log(x - mu);
      acc += (alpha - 1.0) * l - std::exp(alpha * (l - log_beta));
    }
    return std::isfinite(acc) ? acc : kNegInf;
  }
};

inline double weibull_cv2(double alpha) {
  return std::exp(std::lgamma(1.0 + 2.0 / alpha) - 2.0 * std::lgamma(1.0 + 1.0 / alpha)) - 1.0;
}

}  // namespace detail

/// Exact ARS draw of the Weibull shape from its full conditional.
inline double sample_alpha(RngStream& rng, const Dataset& data, double beta, double mu) {
  if (!(mu < data.min())) throw DataError("sample_alpha: mu must lie below the smallest observation");
  if (!(beta > 0.0)) throw std::invalid_argument("sample_alpha: beta must be positive");
  if (data.size() < 2) throw DataError("sample_alpha: need at least two observations");
  detail::AlphaConditional target(data, beta, mu);
  double m = target.mode();
  double sd = 1.0 / std::sqrt(-target.second_derivative(m));
  auto init = detail::mode_bracket(m, sd);
  return ars_sample(rng, std::move(target), Domain{0.0, std::numeric_limits<double>::infinity()}, init);
}

/// beta = (sum (x - mu)^alpha / z)^(1/alpha) with z ~ Gamma(n, 1).
inline double sample_beta(RngStream& rng, const Dataset& data, double alpha, double mu) {
  if (!(mu < data.min())) throw DataError("sample_beta: mu must lie below the smallest observation");
  if (!(alpha > 0.0)) throw std::invalid_argument("sample_beta: alpha must be positive");
  double s = 0.0;
  for (double x : data) s += std::pow(x - mu, alpha);
  double z = sample_gamma(rng, static_cast<double>(data.size()));
  return std::pow(s / z, 1.0 / alpha);
}

/// Inner MH chain for mu with the independence-uniform proposal on
/// (x_(1) - beta, x_(1)). Without `start` the chain begins at x_(1) - 1/n.
inline MhResult sample_mu(RngStream& rng, const Dataset& data, double alpha, double beta, std::size_t inner_steps,
                          std::optional<double> start = {}) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("sample_mu: beta must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("sample_mu: alpha must be positive");
  detail::MuConditional target{&data, alpha, beta};
  UniformProposal proposal{data.min() - beta, data.min()};
  double init = data.min() - 1.0 / static_cast<double>(data.size());
  if (start && target(*start) > kNegInf) init = *start;
  return mh_chain(rng, target, proposal, init, inner_steps);
}

/// mu0 = x_(1) - 1/n; (alpha0, beta0) by matching the mean and coefficient of
/// variation of x - mu0 to a two-parameter Weibull.
inline WeibullParams initial_values_weibull(const Dataset& data) {
  const std::size_t n = data.size();
  if (n < 3) throw DataError("initial_values_weibull: need at least three observations");
  WeibullParams p;
  p.mu = data.min() - 1.0 / static_cast<double>(n);
  double mean = 0.0;
  for (double x : data) mean += x - p.mu;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : data) ss += (x - p.mu - mean) * (x - p.mu - mean);
  double var = ss / static_cast<double>(n - 1);
  if (!(var > 0.0)) throw DataError("initial_values_weibull: sample variance is zero");
  double cv2 = var / (mean * mean);

  constexpr double lo = 0.05, hi = 50.0;
  // cv2 decreases in alpha
  if (cv2 > detail::weibull_cv2(lo) || cv2 < detail::weibull_cv2(hi))
    throw NumericalError("initial_values_weibull: coefficient of variation outside the shape range [0.05, 50]");
  auto f = [cv2](double a) { return detail::weibull_cv2(a) - cv2; };
  auto r = boost::math::tools::bisect(f, lo, hi, boost::math::tools::eps_tolerance<double>(50));
  p.alpha = 0.5 * (r.first + r.second);
  p.beta = mean / std::tgamma(1.0 + 1.0 / p.alpha);
  return p;
}

/// Gibbs sampler over (alpha, beta, mu), sweeping in that order.
inline WeibullChainOutput run_weibull_gibbs(const Dataset& data, const GibbsConfig& config) {
  config.validate();
  if (data.size() < 5) throw DataError("run_weibull_gibbs: need at least 5 observations");
  auto start = std::chrono::steady_clock::now();

  WeibullParams state = config.weibull_initial ? *config.weibull_initial : initial_values_weibull(data);
  if (!state.valid() || !(state.mu < data.min()))
    throw DataError("run_weibull_gibbs: initial values are invalid or leave observations outside the support");

  WeibullChainOutput out;
  out.config = config;
  out.initial = state;
  out.draws.reserve(config.iterations);
  RngStream rng(config.seed);

  const bool warm = config.inner_start == InnerStart::current_state;
  for (std::size_t t = 0; t < config.iterations; ++t) {
    try {
      state.alpha = sample_alpha(rng, data, state.beta, state.mu);
      state.beta = sample_beta(rng, data, state.alpha, state.mu);
      MhResult mu = sample_mu(rng, data, state.alpha, state.beta, config.inner_mh_steps,
                              warm ? std::optional<double>(state.mu) : std::nullopt);
      state.mu = mu.state;
      out.mu_accepted += mu.accepted;
      out.inner_steps_total += config.inner_mh_steps;
    } catch (const std::exception& e) {
      std::ostringstream os;
      os.precision(12);
      os << "run_weibull_gibbs: sweep " << t + 1 << " failed at state (alpha=" << state.alpha
         << ", beta=" << state.beta << ", mu=" << state.mu << "): " << e.what();
      throw NumericalError(os.str());
    }
    out.draws.push_back(state);
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline WeibullParams posterior_estimate(std::span<const WeibullParams> rows, std::size_t burn_in) {
  if (burn_in >= rows.size()) throw std::invalid_argument("posterior_estimate: burn_in must be smaller than the chain length");
  double a = 0.0, b = 0.0, m = 0.0;
  for (std::size_t i = burn_in; i < rows.size(); ++i) {
    a += rows[i].alpha;
    b += rows[i].beta;
    m += rows[i].mu;
  }
  double k = static_cast<double>(rows.size() - burn_in);
  return {a / k, b / k, m / k};
}

inline WeibullParams posterior_estimate(const WeibullChainOutput& chain) {
  return posterior_estimate(chain.draws, chain.config.burn_in);
}

/// CSV trace, header `iter,alpha,beta,mu`.
inline void write_trace_csv(std::ostream& os, const WeibullChainOutput& chain) {
  os << "iter,alpha,beta,mu\n";
  char buf[128];
  for (std::size_t i = 0; i < chain.draws.size(); ++i) {
    const auto& r = chain.draws[i];
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g\n", i + 1, r.alpha, r.beta, r.mu);
    os << buf;
  }
}

}  // namespace sbfit
