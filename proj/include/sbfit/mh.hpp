// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <stdexcept>

#include "sbfit/error.hpp"
#include "sbfit/rng.hpp"

namespace sbfit {

/// Proposal q(.|.) for a scalar Metropolis-Hastings chain.
template <class P>
concept MhProposal = requires(const P& p, RngStream& rng, double x) {
  { p.sample(rng, x) } -> std::convertible_to<double>;
  { p.log_density(x, x) } -> std::convertible_to<double>;  // log q(to | from)
};

template <class F>
concept ScalarLogTarget = requires(const F& f, double x) {
  { f(x) } -> std::convertible_to<double>;
};

/// Independence proposal, uniform on (lower, upper).
struct UniformProposal {
  double lower;
  double upper;

  double sample(RngStream& rng, double) const { return sample_uniform(rng, lower, upper); }
  double log_density(double to, double) const {
    return (to > lower && to < upper) ? -std::log(upper - lower) : -std::numeric_limits<double>::infinity();
  }
};

/// Independence proposal with density exp{-(x - shift)} on (shift, inf).
struct ShiftedExponentialProposal {
  double shift;

  double sample(RngStream& rng, double) const { return sample_shifted_exponential(rng, shift); }
  double log_density(double to, double) const {
    return to > shift ? -(to - shift) : -std::numeric_limits<double>::infinity();
  }
};

struct MhResult {
  double state;
  std::size_t accepted = 0;
  std::size_t steps = 0;
};

/// Runs `steps` Metropolis-Hastings iterations from `init` and returns the
/// final state. A candidate is accepted when u < eta with
///   eta = min{1, pi(x*) q(x_prev | x*) / (pi(x_prev) q(x* | x_prev))},
/// evaluated in log space. Candidates with zero target density are rejected.
template <ScalarLogTarget F, MhProposal P>
MhResult mh_chain(RngStream& rng, const F& log_target, const P& proposal, double init, std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("mh_chain: steps must be >= 1");
  double current = init;
  double current_lp = log_target(current);
  if (!std::isfinite(current_lp)) throw NumericalError("mh_chain: target is not finite at the initial state");

  MhResult result{current, 0, steps};
  for (std::size_t i = 0; i < steps; ++i) {
    double candidate = proposal.sample(rng, current);
    double candidate_lp = log_target(candidate);
    double u = rng.next_open01();
    if (!(candidate_lp > -std::numeric_limits<double>::infinity()) || std::isnan(candidate_lp)) continue;
    double log_eta = (candidate_lp + proposal.log_density(current, candidate)) -
                     (current_lp + proposal.log_density(candidate, current));
    if (std::log(u) < log_eta) {
      current = candidate;
      current_lp = candidate_lp;
      ++result.accepted;
    }
  }
  result.state = current;
  return result;
}

}  // namespace sbfit
