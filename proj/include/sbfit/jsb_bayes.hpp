// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbfit/ars.hpp"
#include "sbfit/distributions.hpp"
#include "sbfit/error.hpp"
#include "sbfit/mh.hpp"
#include "sbfit/rng.hpp"

namespace sbfit {

/// Where each sweep's inner Metropolis-Hastings chain starts.
///  - current_state: at the parameter's value from the previous sweep, so the
///    inner chain is a pi-invariant kernel for any length N;
///  - fixed_restart: at the fixed points x_(n) - xi + 1/n (lambda), a uniform
///    draw (xi) and x_(1) - 1/n (mu) on every sweep. The draw then depends on
///    N and is biased toward the restart point when N is small.
enum class InnerStart { current_state, fixed_restart };

/// Run-length and seeding options shared by the JSB and Weibull samplers.
struct GibbsConfig {
  std::size_t iterations = 10000;
  std::size_t burn_in = 5000;
  /// Length N of the inner Metropolis-Hastings chains (lambda, xi, mu).
  std::size_t inner_mh_steps = 30;
  InnerStart inner_start = InnerStart::current_state;
  std::uint64_t seed = 0;
  std::optional<JsbParams> jsb_initial;
  std::optional<WeibullParams> weibull_initial;

  void validate() const {
    if (iterations == 0) throw std::invalid_argument("gibbs: iterations must be >= 1");
    if (burn_in >= iterations) throw std::invalid_argument("gibbs: burn_in must be smaller than iterations");
    if (inner_mh_steps == 0) throw std::invalid_argument("gibbs: inner_mh_steps must be >= 1");
  }
};

/// k1 = sum log((x - xi) / (lambda + xi - x)), k2 = sum of the squared terms.
struct SuffStats {
  double k1 = 0.0;
  double k2 = 0.0;
};

/// Sampler output, one row per completed sweep.
struct ChainOutput {
  std::vector<JsbParams> draws;
  std::size_t lambda_accepted = 0;
  std::size_t xi_accepted = 0;
  std::size_t inner_steps_total = 0;  // per kernel
  GibbsConfig config;
  JsbParams initial;
  double wall_seconds = 0.0;
};

namespace detail {

inline bool jsb_feasible(const Dataset& data, double lambda, double xi) {
  return xi < data.min() && lambda + xi > data.max();
}

inline void require_jsb_support(const Dataset& data, double lambda, double xi, const char* who) {
  if (!jsb_feasible(data, lambda, xi)) {
    std::ostringstream os;
    os.precision(12);
    os << who << ": observations outside the support (xi = " << xi << ", xi + lambda = " << xi + lambda
       << ", data range [" << data.min() << ", " << data.max() << "])";
    throw DataError(os.str());
  }
}

/// Log full conditional of lambda up to a constant (flat priors, so it is the
/// log-likelihood as a function of lambda). log(x - xi) is precomputed.
struct LambdaConditional {
  const Dataset* data;
  std::vector<double> log_lower;
  double delta, gamma, xi;

  LambdaConditional(const Dataset& d, double delta_, double gamma_, double xi_)
      : data(&d), log_lower(d.size()), delta(delta_), gamma(gamma_), xi(xi_) {
    for (std::size_t i = 0; i < d.size(); ++i) log_lower[i] = std::log(d[i] - xi);
  }

  double operator()(double lambda) const {
    if (!(lambda + xi > data->max()) || !(lambda > 0.0)) return kNegInf;
    const std::size_t n = data->size();
    double acc = static_cast<double>(n) * std::log(lambda);
    for (std::size_t i = 0; i < n; ++i) {
      double b = std::log(lambda + xi - (*data)[i]);
      double z = gamma + delta * (log_lower[i] - b);
      acc -= b + 0.5 * z * z;
    }
    return std::isfinite(acc) ? acc : kNegInf;
  }
};

/// Log full conditional of xi up to a constant.
struct XiConditional {
  const Dataset* data;
  double delta, gamma, lambda;

  double operator()(double xi) const {
    if (!(xi < data->min()) || !(lambda + xi > data->max())) return kNegInf;
    double acc = 0.0;
    for (double x : *data) {
      double a = std::log(x - xi);
      double b = std::log(lambda + xi - x);
      double z = gamma + delta * (a - b);
      acc -= a + b + 0.5 * z * z;
    }
    return std::isfinite(acc) ? acc : kNegInf;
  }
};

/// Log full conditional of delta: n log(d) - (k2/2) d^2 - gamma k1 d.
struct DeltaConditional {
  double n, k1, k2, gamma;

  LogDensityPoint operator()(double d) const {
    return {n * std::log(d) - 0.5 * k2 * d * d - gamma * k1 * d, n / d - k2 * d - gamma * k1};
  }
  double second_derivative(double d) const { return -n / (d * d) - k2; }
  /// Positive root of n/d = k2 d + gamma k1.
  double mode() const {
    double b = gamma * k1;
    return (-b + std::sqrt(b * b + 4.0 * n * k2)) / (2.0 * k2);
  }
};

/// Abscissae {m/2, m - sd, m, m + sd, 2m} around a mode m with local
/// standard deviation sd; the outer pair brackets the mode on (0, inf) and the
/// inner pair keeps the first hull tight when the conditional is peaked.
inline std::vector<double> mode_bracket(double m, double sd) {
  std::vector<double> xs{0.5 * m, m, 2.0 * m};
  if (std::isfinite(sd) && sd > 0.0) {
    if (m - sd > 0.5 * m) xs.push_back(m - sd);
    if (m + sd < 2.0 * m) xs.push_back(m + sd);
  }
  std::sort(xs.begin(), xs.end());
  return xs;
}

}  // namespace detail

inline SuffStats compute_suff_stats(const Dataset& data, double lambda, double xi) {
  detail::require_jsb_support(data, lambda, xi, "compute_suff_stats");
  SuffStats s;
  for (double x : data) {
    double t = std::log(x - xi) - std::log(lambda + xi - x);
    s.k1 += t;
    s.k2 += t * t;
  }
  return s;
}

/// Exact draw of delta from its full conditional by adaptive rejection sampling.
inline double sample_delta(RngStream& rng, const Dataset& data, double gamma, double lambda, double xi) {
  SuffStats s = compute_suff_stats(data, lambda, xi);
  if (!(s.k2 > 0.0))
    throw NumericalError("sample_delta: k2 = 0, the delta conditional is improper; perturb lambda/xi");
  detail::DeltaConditional target{static_cast<double>(data.size()), s.k1, s.k2, gamma};
  double m = target.mode();
  double sd = 1.0 / std::sqrt(-target.second_derivative(m));
  auto init = detail::mode_bracket(m, sd);
  return ars_sample(rng, target, Domain{0.0, std::numeric_limits<double>::infinity()}, init);
}

/// gamma | rest ~ Normal(-delta k1 / n, 1 / n).
inline double sample_gamma_param(RngStream& rng, const Dataset& data, double delta, double lambda, double xi) {
  SuffStats s = compute_suff_stats(data, lambda, xi);
  double n = static_cast<double>(data.size());
  return sample_normal(rng, -delta * s.k1 / n, 1.0 / std::sqrt(n));
}

/// Inner MH chain for lambda with the independence proposal
/// exp{-(lambda - x_(n) + xi)} on lambda > x_(n) - xi. Without `start` the
/// chain begins at x_(n) - xi + 1/n.
inline MhResult sample_lambda(RngStream& rng, const Dataset& data, double delta, double gamma, double xi,
                              std::size_t inner_steps, std::optional<double> start = {}) {
  if (!(xi < data.min())) throw DataError("sample_lambda: xi must lie below the smallest observation");
  const double bound = data.max() - xi;
  detail::LambdaConditional target(data, delta, gamma, xi);
  ShiftedExponentialProposal proposal{bound};
  double init = bound + 1.0 / static_cast<double>(data.size());
  if (start && *start > bound) init = *start;
  return mh_chain(rng, target, proposal, init, inner_steps);
}

/// Inner MH chain for xi with the independence uniform proposal on
/// (x_(n) - lambda, x_(1)). Without `start` the initial value is itself a
/// uniform draw on that interval.
inline MhResult sample_xi(RngStream& rng, const Dataset& data, double delta, double gamma, double lambda,
                          std::size_t inner_steps, std::optional<double> start = {}) {
  const double lo = data.max() - lambda;
  const double hi = data.min();
  if (!(lo < hi)) throw DataError("sample_xi: empty interval (x_(n) - lambda, x_(1)); lambda is infeasible");
  detail::XiConditional target{&data, delta, gamma, lambda};
  UniformProposal proposal{lo, hi};
  double init = (start && *start > lo && *start < hi) ? *start : sample_uniform(rng, lo, hi);
  return mh_chain(rng, target, proposal, init, inner_steps);
}

/// Starting point: xi0 = x_(1) - 1/n, lambda0 = x_(n) - x_(1) + 2/n,
/// delta0 = 1, gamma0 = delta0 log(1/y_med - 1) with y = (x - xi0) / lambda0.
inline JsbParams initial_values_jsb(const Dataset& data) {
  if (data.size() < 2) throw DataError("initial_values_jsb: need at least two observations");
  if (!(data.min() < data.max())) throw DataError("initial_values_jsb: sample is constant");
  const std::size_t n = data.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  JsbParams p;
  p.xi = data.min() - inv_n;
  p.lambda = data.max() - data.min() + 2.0 * inv_n;
  p.delta = 1.0;
  // data are sorted, so the median of the transform is the transform of the median
  double median = (n % 2 == 1) ? data[n / 2] : 0.5 * (data[n / 2 - 1] + data[n / 2]);
  double y = (median - p.xi) / p.lambda;
  p.gamma = p.delta * std::log(1.0 / y - 1.0);
  return p;
}

/// Gibbs sampler over (delta, gamma, lambda, xi), sweeping in that order.
inline ChainOutput run_jsb_gibbs(const Dataset& data, const GibbsConfig& config) {
  config.validate();
  if (data.size() < 5) throw DataError("run_jsb_gibbs: need at least 5 observations");
  auto start = std::chrono::steady_clock::now();

  JsbParams state = config.jsb_initial ? *config.jsb_initial : initial_values_jsb(data);
  if (!state.valid() || !detail::jsb_feasible(data, state.lambda, state.xi))
    throw DataError("run_jsb_gibbs: initial values are invalid or leave observations outside the support");

  ChainOutput out;
  out.config = config;
  out.initial = state;
  out.draws.reserve(config.iterations);
  RngStream rng(config.seed);

  const bool warm = config.inner_start == InnerStart::current_state;
  for (std::size_t t = 0; t < config.iterations; ++t) {
    try {
      state.delta = sample_delta(rng, data, state.gamma, state.lambda, state.xi);
      state.gamma = sample_gamma_param(rng, data, state.delta, state.lambda, state.xi);
      MhResult lam = sample_lambda(rng, data, state.delta, state.gamma, state.xi, config.inner_mh_steps,
                                   warm ? std::optional<double>(state.lambda) : std::nullopt);
      state.lambda = lam.state;
      out.lambda_accepted += lam.accepted;
      MhResult xi = sample_xi(rng, data, state.delta, state.gamma, state.lambda, config.inner_mh_steps,
                              warm ? std::optional<double>(state.xi) : std::nullopt);
      state.xi = xi.state;
      out.xi_accepted += xi.accepted;
      out.inner_steps_total += config.inner_mh_steps;
    } catch (const std::exception& e) {
      std::ostringstream os;
      os.precision(12);
      os << "run_jsb_gibbs: sweep " << t + 1 << " failed at state (delta=" << state.delta
         << ", gamma=" << state.gamma << ", lambda=" << state.lambda << ", xi=" << state.xi << "): " << e.what();
      throw NumericalError(os.str());
    }
    out.draws.push_back(state);
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Componentwise mean of the rows after `burn_in`.
inline JsbParams posterior_estimate(std::span<const JsbParams> rows, std::size_t burn_in) {
  if (burn_in >= rows.size()) throw std::invalid_argument("posterior_estimate: burn_in must be smaller than the chain length");
  std::array<double, 4> sum{};
  for (std::size_t i = burn_in; i < rows.size(); ++i) {
    sum[0] += rows[i].delta;
    sum[1] += rows[i].gamma;
    sum[2] += rows[i].lambda;
    sum[3] += rows[i].xi;
  }
  double m = static_cast<double>(rows.size() - burn_in);
  return {sum[0] / m, sum[1] / m, sum[2] / m, sum[3] / m};
}

inline JsbParams posterior_estimate(const ChainOutput& chain) {
  return posterior_estimate(chain.draws, chain.config.burn_in);
}

/// CSV trace, header `iter,delta,gamma,lambda,xi`, iter starting at 1.
inline void write_trace_csv(std::ostream& os, const ChainOutput& chain) {
  os << "iter,delta,gamma,lambda,xi\n";
  char buf[160];
  for (std::size_t i = 0; i < chain.draws.size(); ++i) {
    const auto& r = chain.draws[i];
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g,%.12g\n", i + 1, r.delta, r.gamma, r.lambda, r.xi);
    os << buf;
  }
}

}  // namespace sbfit
