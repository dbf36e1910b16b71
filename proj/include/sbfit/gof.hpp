// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sbfit/distributions.hpp"
#include "sbfit/error.hpp"

namespace sbfit {

/// Goodness-of-fit statistics of one fitted model on one dataset.
///
/// `ks` is the two-sided Kolmogorov-Smirnov distance (ECDF left and right
/// limits); `ks_at_points` is the sup of |G(x_i) - G_n(x_i)| over the sample
/// points only, which can underestimate the distance.
struct GofReport {
  double ad = 0.0;
  double cm = 0.0;
  double ks = 0.0;
  double ks_at_points = 0.0;
  double ll = 0.0;

  bool operator==(const GofReport&) const = default;
};

/// Fraction of observations <= x.
inline double empirical_cdf(const Dataset& data, double x) {
  auto it = std::upper_bound(data.begin(), data.end(), x);
  return static_cast<double>(it - data.begin()) / static_cast<double>(data.size());
}

namespace detail {

/// With `strict` unset, an undefined Anderson-Darling term yields ad = +inf
/// instead of an error.
template <class Cdf, class Pdf>
GofReport gof_impl(const Dataset& data, const Cdf& cdf, const Pdf& pdf, bool strict) {
  const std::size_t n = data.size();
  if (n < 2) throw DataError("compute_gof: need at least two observations");
  const double nd = static_cast<double>(n);

  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = cdf(data[i]);

  GofReport r;
  double ad_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double lo = g[i];
    double hi = g[n - 1 - i];
    if (!(lo > 0.0 && lo < 1.0) || !(hi > 0.0 && hi < 1.0)) {
      if (!strict) {
        ad_sum = -std::numeric_limits<double>::infinity();
        break;
      }
      std::size_t bad = (lo > 0.0 && lo < 1.0) ? n - 1 - i : i;
      std::ostringstream os;
      os.precision(12);
      os << "compute_gof: fitted cdf is " << g[bad] << " at observation x_(" << bad + 1 << ") = " << data[bad]
         << "; Anderson-Darling is undefined";
      throw NumericalError(os.str());
    }
    ad_sum += (2.0 * static_cast<double>(i) + 1.0) * (std::log(lo) + std::log1p(-hi));
  }
  r.ad = -nd - ad_sum / nd;

  double cm = 1.0 / (12.0 * nd);
  for (std::size_t i = 0; i < n; ++i) {
    double d = g[i] - (2.0 * static_cast<double>(i) + 1.0) / (2.0 * nd);
    cm += d * d;
  }
  r.cm = cm;

  double ks = 0.0;
  double ks_pts = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double above = static_cast<double>(i + 1) / nd - g[i];
    double below = g[i] - static_cast<double>(i) / nd;
    ks = std::max({ks, above, below});
    ks_pts = std::max(ks_pts, std::abs(g[i] - empirical_cdf(data, data[i])));
  }
  r.ks = std::min(ks, 1.0);
  r.ks_at_points = ks_pts;

  double ll = 0.0;
  for (double x : data) {
    double d = pdf(x);
    ll += (d > 0.0) ? std::log(d) : kNegInf;
  }
  r.ll = std::isnan(ll) ? kNegInf : ll;
  return r;
}

}  // namespace detail

/// AD, CM, KS and LL for a fitted model given by its cdf and pdf.
///
///   AD = -n - (1/n) sum (2i-1) [log G(x_(i)) + log(1 - G(x_(n+1-i)))]
///   CM = 1/(12n) + sum (G(x_(i)) - (2i-1)/(2n))^2
///   KS = max_i max(i/n - G(x_(i)), G(x_(i)) - (i-1)/n)
///   LL = sum log g(x_i)
template <class Cdf, class Pdf>
  requires std::invocable<const Cdf&, double> && std::invocable<const Pdf&, double>
GofReport compute_gof(const Dataset& data, const Cdf& cdf, const Pdf& pdf) {
  return detail::gof_impl(data, cdf, pdf, true);
}

inline GofReport compute_gof(const Dataset& data, const JsbParams& t, bool strict = true) {
  GofReport r = detail::gof_impl(
      data, [&](double x) { return jsb_cdf(t, x); }, [&](double x) { return jsb_pdf(t, x); }, strict);
  r.ll = jsb_loglik(t, data);
  return r;
}

inline GofReport compute_gof(const Dataset& data, const WeibullParams& t, bool strict = true) {
  GofReport r = detail::gof_impl(
      data, [&](double x) { return weibull_cdf(t, x); }, [&](double x) { return weibull_pdf(t, x); }, strict);
  r.ll = weibull_loglik(t, data);
  return r;
}

enum class Winner { jsb, weibull, tie };

inline const char* to_string(Winner w) {
  switch (w) {
    case Winner::jsb: return "jsb";
    case Winner::weibull: return "weibull";
    default: return "tie";
  }
}

struct ModelComparison {
  GofReport jsb;
  GofReport weibull;
  Winner ad = Winner::tie;
  Winner cm = Winner::tie;
  Winner ks = Winner::tie;
  Winner ll = Winner::tie;
};

namespace detail {

inline Winner lower_wins(double jsb, double weibull) {
  if (jsb < weibull) return Winner::jsb;
  if (weibull < jsb) return Winner::weibull;
  return Winner::tie;
}

}  // namespace detail

/// Smaller AD/CM/KS wins, larger LL wins.
inline ModelComparison compare_reports(const GofReport& jsb, const GofReport& weibull) {
  ModelComparison c{jsb, weibull};
  c.ad = detail::lower_wins(jsb.ad, weibull.ad);
  c.cm = detail::lower_wins(jsb.cm, weibull.cm);
  c.ks = detail::lower_wins(jsb.ks, weibull.ks);
  c.ll = detail::lower_wins(-jsb.ll, -weibull.ll);
  return c;
}

/// A model whose cdf hits 0 or 1 at an observation gets ad = +inf here rather
/// than aborting the comparison.
inline ModelComparison model_comparison(const Dataset& data, const JsbParams& jsb, const WeibullParams& weibull) {
  return compare_reports(compute_gof(data, jsb, false), compute_gof(data, weibull, false));
}

}  // namespace sbfit
