// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sbfit/error.hpp"
#include "sbfit/rng.hpp"

namespace sbfit {

/// Value and first derivative of an unnormalised log density.
struct LogDensityPoint {
  double value;
  double slope;
};

/// Interval on which a log density is defined. Endpoints are open and may be
/// infinite.
struct Domain {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double x) const noexcept { return x > lower && x < upper; }
};

template <class F>
concept LogDensity = requires(const F& f, double x) {
  { f(x) } -> std::convertible_to<LogDensityPoint>;
};

/// Tangent-hull adaptive rejection sampler for a log-concave density.
///
/// The envelope is a piecewise-linear upper hull built from tangents at the
/// abscissae, and a lower squeeze built from chords between them. Every point
/// at which the target had to be evaluated is inserted into the envelope until
/// the abscissa budget is exhausted, after which the hull stays fixed.
template <LogDensity F>
class ArsSampler {
 public:
  static constexpr std::size_t kDefaultMaxPoints = 50;
  static constexpr std::size_t kMaxRejections = 100000;

  ArsSampler(F target, Domain domain, std::span<const double> init,
             std::size_t max_points = kDefaultMaxPoints)
      : target_(std::move(target)), domain_(domain), max_points_(std::max<std::size_t>(max_points, 2)) {
    if (init.size() < 2) throw std::invalid_argument("ars: need at least two initial abscissae");
    std::vector<double> xs(init.begin(), init.end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    if (xs.size() < 2) throw std::invalid_argument("ars: need at least two distinct initial abscissae");
    for (double x : xs) {
      if (!domain_.contains(x)) throw std::invalid_argument("ars: initial abscissa outside the target domain");
      LogDensityPoint p = evaluate(x);
      if (!std::isfinite(p.value) || !std::isfinite(p.slope))
        throw NumericalError(describe("ars: target is not finite at initial abscissa", x));
      xs_.push_back(x);
      h_.push_back(p.value);
      s_.push_back(p.slope);
    }
    if (!std::isfinite(domain_.lower) && !(s_.front() > 0.0))
      throw NumericalError("ars: hull not integrable, leftmost slope must be > 0 on an unbounded-below domain");
    if (!std::isfinite(domain_.upper) && !(s_.back() < 0.0))
      throw NumericalError("ars: hull not integrable, rightmost slope must be < 0 on an unbounded-above domain");
    rebuild();
  }

  /// One exact draw from the normalised target.
  double draw(RngStream& rng) {
    for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
      auto [x, j] = sample_hull(rng);
      double upper = hull_at(x, j);
      double log_u = std::log(rng.next_open01());
      if (log_u <= squeeze_at(x) - upper) return x;
      LogDensityPoint p = evaluate(x);
      if (std::isnan(p.value)) throw NumericalError(describe("ars: target evaluated to NaN", x));
      bool accept = log_u <= p.value - upper;
      if (std::isfinite(p.value) && std::isfinite(p.slope)) insert(x, p);
      if (accept) return x;
    }
    throw NumericalError("ars: rejection limit reached (target probably not log-concave)");
  }

  std::size_t size() const noexcept { return xs_.size(); }
  std::span<const double> abscissae() const noexcept { return xs_; }
  std::size_t evaluations() const noexcept { return evaluations_; }

  /// Upper hull value at x (x inside the domain).
  double upper_hull(double x) const { return hull_at(x, segment_of(x)); }

  /// Lower squeeze at x; -inf outside [x_1, x_k].
  double lower_squeeze(double x) const { return squeeze_at(x); }

  /// upper >= target >= squeeze at every abscissa and strictly increasing
  /// abscissae, up to a relative tolerance for rounding in the intersections.
  bool envelope_valid(double tol = 1e-9) const {
    for (std::size_t i = 0; i < xs_.size(); ++i) {
      if (i > 0 && !(xs_[i] > xs_[i - 1])) return false;
      double slack = tol * (1.0 + std::abs(h_[i]));
      if (upper_hull(xs_[i]) < h_[i] - slack) return false;
      if (lower_squeeze(xs_[i]) > h_[i] + slack) return false;
    }
    for (std::size_t i = 0; i + 1 < xs_.size(); ++i) {
      double mid = 0.5 * (xs_[i] + xs_[i + 1]);
      double slack = tol * (1.0 + std::abs(upper_hull(mid)));
      if (upper_hull(mid) < lower_squeeze(mid) - slack) return false;
    }
    return true;
  }

 private:
  LogDensityPoint evaluate(double x) {
    ++evaluations_;
    return target_(x);
  }

  std::string describe(const char* what, double x) const {
    std::ostringstream os;
    os.precision(17);
    os << what << " (x = " << x << ")";
    return os.str();
  }

  double tangent(std::size_t j, double x) const { return h_[j] + s_[j] * (x - xs_[j]); }

  void insert(double x, const LogDensityPoint& p) {
    if (xs_.size() >= max_points_) return;
    auto it = std::lower_bound(xs_.begin(), xs_.end(), x);
    if (it != xs_.end() && *it == x) return;
    auto k = static_cast<std::ptrdiff_t>(it - xs_.begin());
    xs_.insert(it, x);
    h_.insert(h_.begin() + k, p.value);
    s_.insert(s_.begin() + k, p.slope);
    rebuild();
  }

  void rebuild() {
    const std::size_t k = xs_.size();
    z_.assign(k + 1, 0.0);
    z_[0] = domain_.lower;
    z_[k] = domain_.upper;
    for (std::size_t j = 0; j + 1 < k; ++j) {
      double ds = s_[j] - s_[j + 1];
      double z;
      if (std::abs(ds) <= 1e-12 * std::max(std::abs(s_[j]), std::abs(s_[j + 1])) || ds == 0.0) {
        z = 0.5 * (xs_[j] + xs_[j + 1]);
      } else {
        z = (h_[j + 1] - h_[j] - xs_[j + 1] * s_[j + 1] + xs_[j] * s_[j]) / ds;
      }
      // exact arithmetic puts z in [x_j, x_{j+1}]; keep it there under rounding
      z_[j + 1] = std::clamp(z, xs_[j], xs_[j + 1]);
    }
    log_mass_.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) log_mass_[j] = segment_log_mass(j);
    double top = *std::max_element(log_mass_.begin(), log_mass_.end());
    if (!std::isfinite(top)) throw NumericalError("ars: upper hull has no finite mass");
    cumulative_.assign(k, 0.0);
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      acc += std::exp(log_mass_[j] - top);
      cumulative_[j] = acc;
    }
  }

  double segment_log_mass(std::size_t j) const {
    double a = z_[j], b = z_[j + 1];
    double s = s_[j];
    if (!(b > a)) return -std::numeric_limits<double>::infinity();
    if (s == 0.0) {
      if (!std::isfinite(b - a)) throw NumericalError("ars: flat hull segment on an unbounded interval");
      return h_[j] + std::log(b - a);
    }
    if (s > 0.0) {
      if (!std::isfinite(b)) throw NumericalError("ars: positive hull slope on an unbounded-above segment");
      double ub = tangent(j, b);
      double span = std::isfinite(a) ? s * (b - a) : std::numeric_limits<double>::infinity();
      return ub + std::log(-std::expm1(-span)) - std::log(s);
    }
    if (!std::isfinite(a)) throw NumericalError("ars: negative hull slope on an unbounded-below segment");
    double ua = tangent(j, a);
    double span = std::isfinite(b) ? -s * (b - a) : std::numeric_limits<double>::infinity();
    return ua + std::log(-std::expm1(-span)) - std::log(-s);
  }

  std::pair<double, std::size_t> sample_hull(RngStream& rng) const {
    double target = rng.next_open01() * cumulative_.back();
    std::size_t j = static_cast<std::size_t>(
        std::upper_bound(cumulative_.begin(), cumulative_.end(), target) - cumulative_.begin());
    j = std::min(j, cumulative_.size() - 1);
    double a = z_[j], b = z_[j + 1];
    double s = s_[j];
    double u = rng.next_open01();
    double x;
    // invert the truncated exponential from the heavier end
    if (s > 0.0) {
      double span = std::isfinite(a) ? s * (b - a) : std::numeric_limits<double>::infinity();
      x = b + std::log1p(u * std::expm1(-span)) / s;
    } else if (s < 0.0) {
      double span = std::isfinite(b) ? -s * (b - a) : std::numeric_limits<double>::infinity();
      x = a + std::log1p(u * std::expm1(-span)) / s;
    } else {
      x = a + u * (b - a);
    }
    x = std::clamp(x, a, b);
    if (!domain_.contains(x)) {
      // an endpoint of a bounded domain; nudge inside
      x = x <= domain_.lower ? std::nextafter(domain_.lower, domain_.upper)
                             : std::nextafter(domain_.upper, domain_.lower);
    }
    return {x, j};
  }

  std::size_t segment_of(double x) const {
    auto it = std::upper_bound(z_.begin() + 1, z_.end() - 1, x);
    return static_cast<std::size_t>(it - (z_.begin() + 1));
  }

  double hull_at(double x, std::size_t j) const { return tangent(j, x); }

  double squeeze_at(double x) const {
    if (x < xs_.front() || x > xs_.back()) return -std::numeric_limits<double>::infinity();
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    if (it == xs_.end()) return h_.back();
    std::size_t i = static_cast<std::size_t>(it - xs_.begin());
    std::size_t lo = i - 1;
    double w = (x - xs_[lo]) / (xs_[i] - xs_[lo]);
    return (1.0 - w) * h_[lo] + w * h_[i];
  }

  F target_;
  Domain domain_;
  std::size_t max_points_;
  std::vector<double> xs_, h_, s_;
  std::vector<double> z_;
  std::vector<double> log_mass_;
  std::vector<double> cumulative_;
  std::size_t evaluations_ = 0;
};

/// One draw from a log-concave target, building a fresh envelope from
/// `init`. Use ArsSampler directly to reuse the envelope across draws.
template <LogDensity F>
double ars_sample(RngStream& rng, F target, Domain domain, std::span<const double> init,
                  std::size_t max_points = ArsSampler<F>::kDefaultMaxPoints) {
  ArsSampler<F> sampler(std::move(target), domain, init, max_points);
  return sampler.draw(rng);
}

}  // namespace sbfit
