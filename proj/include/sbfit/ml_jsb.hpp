// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include "sbfit/distributions.hpp"

namespace sbfit {

enum class MlFailure { none, non_convergence, non_finite_objective, infeasible_iterate };

inline const char* to_string(MlFailure f) {
  switch (f) {
    case MlFailure::none: return "none";
    case MlFailure::non_convergence: return "non-convergence";
    case MlFailure::non_finite_objective: return "non-finite objective";
    default: return "infeasible iterate";
  }
}

struct MlResult {
  bool converged = false;
  JsbParams params;  // last iterate; meaningful only when converged
  std::size_t iterations = 0;
  double gradient_norm = std::numeric_limits<double>::quiet_NaN();
  double loglik = kNegInf;
  MlFailure failure = MlFailure::none;
};

using Vec4 = std::array<double, 4>;

inline Vec4 to_vec(const JsbParams& p) { return {p.delta, p.gamma, p.lambda, p.xi}; }
inline JsbParams to_params(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

inline bool jsb_feasible_for(const JsbParams& p, const Dataset& data) {
  return p.valid() && data.min() > p.xi && data.max() < p.upper();
}

/// Negative mean log-likelihood; +inf outside the parameter space or when an
/// observation leaves the support.
inline double jsb_mean_nll(const Vec4& v, const Dataset& data) {
  JsbParams p = to_params(v);
  if (!jsb_feasible_for(p, data)) return std::numeric_limits<double>::infinity();
  double ll = jsb_loglik(p, data);
  return std::isfinite(ll) ? -ll / static_cast<double>(data.size()) : std::numeric_limits<double>::infinity();
}

/// Central-difference gradient with per-coordinate step rel_step * max(1, |v_i|).
template <class F>
Vec4 numeric_gradient(const F& f, const Vec4& v, double rel_step) {
  Vec4 g{};
  for (std::size_t i = 0; i < 4; ++i) {
    double h = rel_step * std::max(1.0, std::abs(v[i]));
    Vec4 up = v, down = v;
    up[i] += h;
    down[i] -= h;
    g[i] = (f(up) - f(down)) / (up[i] - down[i]);
  }
  return g;
}

struct MlOptions {
  std::size_t max_iter = 500;
  double tol = 1e-6;
  double fd_step = 1e-6;
};

/// Quasi-Newton (BFGS) maximisation of the JSB log-likelihood in the natural
/// parameterisation, with finite-difference gradients and a backtracking
/// Armijo line search. The convergence test is on the Euclidean norm of the
/// gradient of the mean log-likelihood. Never throws on numerical failure;
/// the reason is reported in the result.
inline MlResult ml_fit_jsb(const Dataset& data, const JsbParams& init, const MlOptions& opt = {}) {
  MlResult res;
  res.params = init;
  auto f = [&data](const Vec4& v) { return jsb_mean_nll(v, data); };
  auto norm = [](const Vec4& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]); };
  auto dot = [](const Vec4& a, const Vec4& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]; };
  auto finite = [](const Vec4& v) {
    return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]) && std::isfinite(v[3]);
  };

  if (!init.valid() || !jsb_feasible_for(init, data)) {
    res.failure = MlFailure::infeasible_iterate;
    return res;
  }
  Vec4 x = to_vec(init);
  double fx = f(x);
  if (!std::isfinite(fx)) {
    res.failure = MlFailure::non_finite_objective;
    return res;
  }
  Vec4 g = numeric_gradient(f, x, opt.fd_step);
  if (!finite(g)) {
    res.failure = MlFailure::non_finite_objective;
    return res;
  }

  std::array<Vec4, 4> H{};
  auto reset = [&H](double scale) {
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) H[i][j] = (i == j) ? scale : 0.0;
  };
  reset(1.0);
  bool scaled = false;

  for (std::size_t it = 0;; ++it) {
    res.iterations = it;
    res.gradient_norm = norm(g);
    res.params = to_params(x);
    res.loglik = -fx * static_cast<double>(data.size());
    if (res.gradient_norm <= opt.tol) {
      res.converged = true;
      return res;
    }
    if (it >= opt.max_iter) break;

    Vec4 p{};
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) p[i] -= H[i][j] * g[j];
    double slope = dot(g, p);
    if (!(slope < 0.0)) {
      reset(1.0);
      for (std::size_t i = 0; i < 4; ++i) p[i] = -g[i];
      slope = -dot(g, g);
    }

    double step = 1.0;
    Vec4 xn{};
    double fn = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      for (std::size_t i = 0; i < 4; ++i) xn[i] = x[i] + step * p[i];
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * slope) {
        found = true;
        break;
      }
    }
    if (!found) break;

    Vec4 gn = numeric_gradient(f, xn, opt.fd_step);
    if (!finite(gn)) {
      res.params = to_params(xn);
      res.iterations = it + 1;
      res.failure = MlFailure::non_finite_objective;
      return res;
    }

    Vec4 s{}, y{};
    for (std::size_t i = 0; i < 4; ++i) {
      s[i] = xn[i] - x[i];
      y[i] = gn[i] - g[i];
    }
    double sy = dot(s, y);
    if (sy > 1e-12 * norm(s) * norm(y)) {
      if (!scaled) {
        reset(sy / dot(y, y));
        scaled = true;
      }
      // H <- (I - rho s y') H (I - rho y s') + rho s s'
      double rho = 1.0 / sy;
      Vec4 Hy{};
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) Hy[i] += H[i][j] * y[j];
      double yHy = dot(y, Hy);
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
          H[i][j] += rho * ((1.0 + rho * yHy) * s[i] * s[j] - Hy[i] * s[j] - s[i] * Hy[j]);
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  res.failure = MlFailure::non_convergence;
  return res;
}

inline MlResult ml_fit_jsb(const Dataset& data, const JsbParams& init, std::size_t max_iter, double tol) {
  MlOptions opt;
  opt.max_iter = max_iter;
  opt.tol = tol;
  return ml_fit_jsb(data, init, opt);
}

}  // namespace sbfit
