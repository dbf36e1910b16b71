// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbfit/distributions.hpp"
#include "sbfit/gof.hpp"
#include "sbfit/jsb_bayes.hpp"
#include "sbfit/ml_jsb.hpp"
#include "sbfit/parallel.hpp"
#include "sbfit/rng.hpp"
#include "sbfit/weibull_bayes.hpp"

namespace sbfit {

struct Range {
  double lower;
  double upper;
};

inline double draw(RngStream& rng, const Range& r) { return sample_uniform(rng, r.lower, r.upper); }

// ---------------------------------------------------------------------------
// ML convergence-failure study

struct NrStudyConfig {
  std::size_t replications = 500;
  std::vector<std::size_t> sizes{20, 100, 1000};
  Range delta{0.05, 10.0};
  Range gamma{-20.0, 20.0};
  Range lambda{1.0, 100.0};
  Range xi{-50.0, 50.0};
  // initial values; lambda0 ~ U(x_(n) - x_(1), lambda0_upper), xi0 ~ U(xi0_lower, x_(1))
  Range delta0{0.05, 10.0};
  Range gamma0{-20.0, 20.0};
  double lambda0_upper = 100.0;
  double xi0_lower = -50.0;
  MlOptions ml;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  /// Paper-scale protocol: 10000 replications at seven sample sizes.
  static NrStudyConfig paper_scale() {
    NrStudyConfig c;
    c.replications = 10000;
    c.sizes = {20, 50, 100, 250, 500, 1000, 5000};
    return c;
  }

  void validate() const {
    if (replications == 0) throw std::invalid_argument("nr study: replications must be >= 1");
    if (sizes.empty()) throw std::invalid_argument("nr study: sizes must not be empty");
    for (std::size_t n : sizes)
      if (n < 2) throw std::invalid_argument("nr study: every size must be >= 2");
  }
};

struct NrSizeResult {
  std::size_t n = 0;
  std::size_t replications = 0;
  std::size_t converged = 0;
  double percent_converged = 0.0;
  std::map<std::string, std::size_t> failures;  // by MlFailure name
  std::size_t degenerate_redraws = 0;
  std::size_t infeasible_starts = 0;
};

struct NrStudyResult {
  NrStudyConfig config;
  std::vector<NrSizeResult> sizes;
};

namespace detail {

struct NrRep {
  MlResult fit;
  std::size_t redraws = 0;
  bool infeasible_start = false;
};

inline NrRep nr_replication(const NrStudyConfig& c, std::size_t n, RngStream rng) {
  NrRep rep;
  std::vector<double> xs;
  for (;;) {
    JsbParams truth{draw(rng, c.delta), draw(rng, c.gamma), draw(rng, c.lambda), draw(rng, c.xi)};
    xs = jsb_draws(truth, n, rng);
    auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    if (*hi - *lo >= 1e-8) break;
    ++rep.redraws;
  }
  Dataset data(std::move(xs));
  JsbParams init;
  init.delta = draw(rng, c.delta0);
  init.gamma = draw(rng, c.gamma0);
  init.lambda = sample_uniform(rng, data.max() - data.min(), std::max(c.lambda0_upper, data.max() - data.min() + 1e-9));
  init.xi = sample_uniform(rng, std::min(c.xi0_lower, data.min() - 1e-9), data.min());
  rep.infeasible_start = !jsb_feasible_for(init, data);
  rep.fit = ml_fit_jsb(data, init, c.ml);
  return rep;
}

inline std::uint64_t size_stream(std::uint64_t master, std::size_t n) {
  return detail::splitmix64(master ^ detail::splitmix64(static_cast<std::uint64_t>(n)));
}

}  // namespace detail

/// For each sample size: draws a JSB truth and a starting point from the
/// configured uniform ranges, simulates data and records whether the ML fit
/// converged. Redraws samples whose range is below 1e-8.
inline NrStudyResult run_nr_failure_study(const NrStudyConfig& config) {
  config.validate();
  NrStudyResult res;
  res.config = config;
  for (std::size_t n : config.sizes) {
    const std::uint64_t stream = detail::size_stream(config.seed, n);
    auto reps = parallel_map<detail::NrRep>(
        config.replications,
        [&](std::size_t r) { return detail::nr_replication(config, n, RngStream::derive(stream, r)); },
        config.threads);
    NrSizeResult s;
    s.n = n;
    s.replications = config.replications;
    for (const char* name : {"non-convergence", "non-finite objective", "infeasible iterate"}) s.failures[name] = 0;
    for (const auto& r : reps) {
      if (r.fit.converged) ++s.converged;
      else ++s.failures[to_string(r.fit.failure)];
      s.degenerate_redraws += r.redraws;
      if (r.infeasible_start) ++s.infeasible_starts;
    }
    s.percent_converged = 100.0 * static_cast<double>(s.converged) / static_cast<double>(s.replications);
    res.sizes.push_back(std::move(s));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Descriptive statistics

struct Descriptive {
  double min = 0.0, q1 = 0.0, median = 0.0, mean = 0.0, q3 = 0.0, max = 0.0, sd = 0.0, skewness = 0.0;
  std::size_t count = 0;
};

/// Linear-interpolation quantile of sorted data (R type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty input");
  double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

/// sd uses the n-1 denominator; skewness is m3 / m2^(3/2) with central moments.
inline Descriptive describe(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("describe: empty input");
  Descriptive d;
  d.count = v.size();
  double nd = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  d.mean = sum / nd;
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    double e = x - d.mean;
    m2 += e * e;
    m3 += e * e * e;
  }
  d.sd = v.size() > 1 ? std::sqrt(m2 / (nd - 1.0)) : 0.0;
  m2 /= nd;
  m3 /= nd;
  d.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  std::sort(v.begin(), v.end());
  d.min = v.front();
  d.max = v.back();
  d.q1 = quantile_sorted(v, 0.25);
  d.median = quantile_sorted(v, 0.5);
  d.q3 = quantile_sorted(v, 0.75);
  return d;
}

/// Batch-means standard error of the mean of v (`batches` equal batches;
/// a remainder at the front is dropped).
inline double batch_means_se(std::span<const double> v, std::size_t batches = 10) {
  if (batches < 2 || v.size() < batches) throw std::invalid_argument("batch_means_se: too few values");
  std::size_t b = v.size() / batches;
  std::size_t off = v.size() - b * batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t k = 0; k < batches; ++k) {
    for (std::size_t i = 0; i < b; ++i) means[k] += v[off + k * b + i];
    means[k] /= static_cast<double>(b);
  }
  double m = 0.0;
  for (double x : means) m += x;
  m /= static_cast<double>(batches);
  double ss = 0.0;
  for (double x : means) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
}

// ---------------------------------------------------------------------------
// Initial-value robustness study

inline constexpr std::array<const char*, 4> kJsbNames{"delta", "gamma", "lambda", "xi"};

inline double component(const JsbParams& p, std::size_t k) {
  switch (k) {
    case 0: return p.delta;
    case 1: return p.gamma;
    case 2: return p.lambda;
    default: return p.xi;
  }
}

struct RobustnessConfig {
  std::size_t replications = 300;
  std::size_t n = 100;
  JsbParams truth{2.0, 2.0, 20.0, 0.0};
  Range delta0{0.1, 15.0};
  Range gamma0{-15.0, 15.0};
  Range lambda0{20.1, 60.0};
  Range xi0{-10.0, 10.0};
  JsbParams extreme_initial{15.0, -15.0, 60.0, -10.0};
  /// Sweeps averaged when comparing the extreme-initials chain to the
  /// default-initials chain.
  std::size_t tail = 1000;
  GibbsConfig gibbs;  // seed and initial values are set per replication
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  void validate() const {
    if (replications == 0) throw std::invalid_argument("robustness: replications must be >= 1");
    if (n < 5) throw std::invalid_argument("robustness: n must be >= 5");
    if (!truth.valid()) throw std::invalid_argument("robustness: invalid truth");
    gibbs.validate();
    if (tail == 0 || tail > gibbs.iterations - gibbs.burn_in)
      throw std::invalid_argument("robustness: tail must lie in [1, iterations - burn_in]");
  }
};

/// Chains from the extreme and the default starting point on the same data.
struct InitialComparison {
  ChainOutput extreme;
  ChainOutput standard;
  std::array<double, 4> extreme_tail_mean{};
  std::array<double, 4> standard_tail_mean{};
  std::array<double, 4> pooled_se{};  // sqrt(se_extreme^2 + se_standard^2), batch means
};

struct RobustnessResult {
  RobustnessConfig config;
  std::array<Descriptive, 4> pooled;  // post-burn-in draws over all replications
  std::vector<JsbParams> initials;
  std::vector<JsbParams> estimates;   // posterior means per replication
  std::size_t infeasible_redraws = 0;
  InitialComparison comparison;
};

using ReplicationCallback = std::function<void(std::size_t, const ChainOutput&)>;

namespace detail {

struct RobustRep {
  JsbParams initial;
  JsbParams estimate;
  std::size_t redraws = 0;
  std::array<std::vector<double>, 4> kept;
};

inline std::array<double, 4> tail_mean(const ChainOutput& c, std::size_t tail) {
  std::array<double, 4> m{};
  const std::size_t start = c.draws.size() - tail;
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t i = start; i < c.draws.size(); ++i) m[k] += component(c.draws[i], k);
    m[k] /= static_cast<double>(tail);
  }
  return m;
}

inline double tail_se(const ChainOutput& c, std::size_t tail, std::size_t k) {
  std::vector<double> v;
  v.reserve(tail);
  for (std::size_t i = c.draws.size() - tail; i < c.draws.size(); ++i) v.push_back(component(c.draws[i], k));
  return batch_means_se(v, 10);
}

}  // namespace detail

/// Data of replication `r` of the robustness study.
inline Dataset robustness_data(const RobustnessConfig& c, std::size_t r) {
  RngStream rng = RngStream::derive(c.seed, r);
  return jsb_sample(c.truth, c.n, rng);
}

/// Gibbs chains on JSB(truth) samples from random starting points; pools the
/// post-burn-in draws. Starting points that leave an observation outside the
/// support are redrawn and counted. `on_chain` (if set) sees every
/// replication's chain and may be called concurrently for distinct indices.
inline RobustnessResult run_robustness_study(const RobustnessConfig& config, const ReplicationCallback& on_chain = {}) {
  config.validate();
  auto reps = parallel_map<detail::RobustRep>(
      config.replications,
      [&](std::size_t r) {
        RngStream rng = RngStream::derive(config.seed, r);
        Dataset data = jsb_sample(config.truth, config.n, rng);
        detail::RobustRep rep;
        for (;;) {
          rep.initial = {draw(rng, config.delta0), draw(rng, config.gamma0), draw(rng, config.lambda0),
                         draw(rng, config.xi0)};
          if (jsb_feasible_for(rep.initial, data)) break;
          ++rep.redraws;
        }
        GibbsConfig g = config.gibbs;
        g.seed = rng.next_u64();
        g.jsb_initial = rep.initial;
        ChainOutput chain = run_jsb_gibbs(data, g);
        if (on_chain) on_chain(r, chain);
        rep.estimate = posterior_estimate(chain);
        for (std::size_t k = 0; k < 4; ++k) {
          rep.kept[k].reserve(chain.draws.size() - g.burn_in);
          for (std::size_t i = g.burn_in; i < chain.draws.size(); ++i) rep.kept[k].push_back(component(chain.draws[i], k));
        }
        return rep;
      },
      config.threads);

  RobustnessResult res;
  res.config = config;
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> pool;
    for (auto& rep : reps) {
      pool.insert(pool.end(), rep.kept[k].begin(), rep.kept[k].end());
      std::vector<double>().swap(rep.kept[k]);
    }
    res.pooled[k] = describe(std::move(pool));
  }
  for (const auto& rep : reps) {
    res.initials.push_back(rep.initial);
    res.estimates.push_back(rep.estimate);
    res.infeasible_redraws += rep.redraws;
  }

  Dataset data = robustness_data(config, 0);
  RngStream rng = RngStream::derive(detail::splitmix64(config.seed), config.replications);
  GibbsConfig g = config.gibbs;
  g.seed = rng.next_u64();
  g.jsb_initial = config.extreme_initial;
  InitialComparison& cmp = res.comparison;
  cmp.extreme = run_jsb_gibbs(data, g);
  g.seed = rng.next_u64();
  g.jsb_initial.reset();
  cmp.standard = run_jsb_gibbs(data, g);
  cmp.extreme_tail_mean = detail::tail_mean(cmp.extreme, config.tail);
  cmp.standard_tail_mean = detail::tail_mean(cmp.standard, config.tail);
  for (std::size_t k = 0; k < 4; ++k) {
    double a = detail::tail_se(cmp.extreme, config.tail, k);
    double b = detail::tail_se(cmp.standard, config.tail, k);
    cmp.pooled_se[k] = std::sqrt(a * a + b * b);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Two-model analysis of one dataset

struct DensityRow {
  double x;
  double jsb;
  double weibull;
};

struct AnalysisReport {
  ChainOutput jsb_chain;
  WeibullChainOutput weibull_chain;
  JsbParams jsb;
  WeibullParams weibull;
  ModelComparison comparison;
  std::vector<DensityRow> grid;
};

/// `points` equally spaced values from x_(1) to x_(n).
inline std::vector<DensityRow> density_grid(const Dataset& data, const JsbParams& jsb, const WeibullParams& weibull,
                                            std::size_t points = 200) {
  if (points < 2) throw std::invalid_argument("density_grid: need at least two points");
  std::vector<DensityRow> grid(points);
  const double lo = data.min(), hi = data.max();
  for (std::size_t i = 0; i < points; ++i) {
    double x = (i + 1 == points) ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    grid[i] = {x, jsb_pdf(jsb, x), weibull_pdf(weibull, x)};
  }
  return grid;
}

/// Both Gibbs fits (the Weibull chain uses a seed derived from config.seed),
/// their posterior means, the paired goodness-of-fit statistics and a
/// 200-point density table.
inline AnalysisReport run_two_model_analysis(const Dataset& data, const GibbsConfig& config) {
  AnalysisReport r;
  r.jsb_chain = run_jsb_gibbs(data, config);
  GibbsConfig wc = config;
  wc.seed = detail::splitmix64(config.seed ^ 0x57454942554c4cULL);
  r.weibull_chain = run_weibull_gibbs(data, wc);
  r.jsb = posterior_estimate(r.jsb_chain);
  r.weibull = posterior_estimate(r.weibull_chain);
  r.comparison = model_comparison(data, r.jsb, r.weibull);
  r.grid = density_grid(data, r.jsb, r.weibull);
  return r;
}

}  // namespace sbfit
