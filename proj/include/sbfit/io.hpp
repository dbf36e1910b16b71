// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sbfit/distributions.hpp"
#include "sbfit/error.hpp"
#include "sbfit/experiments.hpp"
#include "sbfit/gof.hpp"
#include "sbfit/jsb_bayes.hpp"
#include "sbfit/ml_jsb.hpp"

namespace sbfit {

using Json = nlohmann::ordered_json;

// ------------------------------------------------------------------ ingest

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  for (;;) {
    auto pos = line.find(',');
    out.push_back(trim(line.substr(0, pos)));
    if (pos == std::string_view::npos) return out;
    line.remove_prefix(pos + 1);
  }
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::string lower(std::string_view s) {
  std::string r(s);
  for (auto& c : r) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return r;
}

}  // namespace detail

/// Reads observations from text: one value per line, or CSV whose first line
/// is a header with a `dbh` column. Blank lines are skipped. Values must be
/// finite and positive; errors cite the 1-based line number.
inline Dataset parse_observations(std::istream& in, const std::string& source = "input") {
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  std::ptrdiff_t column = -1;  // -1: single-column mode
  bool first = true;
  auto fail = [&](const std::string& what) {
    throw DataError(source + ":" + std::to_string(lineno) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++lineno;
    std::string_view text = detail::trim(line);
    if (text.empty()) continue;
    if (first) {
      first = false;
      auto fields = detail::split_csv(text);
      double probe;
      if (fields.size() > 1 || !detail::parse_double(fields[0], probe)) {
        for (std::size_t i = 0; i < fields.size(); ++i)
          if (detail::lower(fields[i]) == "dbh") column = static_cast<std::ptrdiff_t>(i);
        if (column < 0) fail("header has no `dbh` column and the line is not a number");
        continue;
      }
    }
    std::string_view field = text;
    if (column >= 0) {
      auto fields = detail::split_csv(text);
      if (static_cast<std::size_t>(column) >= fields.size()) fail("missing `dbh` field");
      field = fields[static_cast<std::size_t>(column)];
    }
    double v;
    if (!detail::parse_double(field, v)) fail("cannot parse '" + std::string(field) + "' as a number");
    if (!std::isfinite(v)) fail("value is not finite");
    if (!(v > 0.0)) fail("value " + std::string(field) + " is not positive");
    values.push_back(v);
  }
  if (values.empty()) throw DataError(source + ": no observations");
  return Dataset(std::move(values));
}

inline Dataset ingest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  return parse_observations(in, path);
}

// -------------------------------------------------------------------- JSON

/// Rounds to 12 significant digits; non-finite values become null.
inline Json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

inline double num_from(const Json& j) {
  return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

inline Json to_json(const JsbParams& p) {
  return Json{{"delta", num(p.delta)}, {"gamma", num(p.gamma)}, {"lambda", num(p.lambda)}, {"xi", num(p.xi)}};
}

inline Json to_json(const WeibullParams& p) {
  return Json{{"alpha", num(p.alpha)}, {"beta", num(p.beta)}, {"mu", num(p.mu)}};
}

/// null in `ad` or `ll` stands for an undefined statistic (+inf AD, -inf LL).
inline Json to_json(const GofReport& r) {
  return Json{{"ad", num(r.ad)}, {"cm", num(r.cm)}, {"ks", num(r.ks)}, {"ks_at_points", num(r.ks_at_points)},
              {"ll", num(r.ll)}};
}

inline Json to_json(const GibbsConfig& c) {
  return Json{{"iterations", c.iterations},
              {"burn_in", c.burn_in},
              {"inner_mh_steps", c.inner_mh_steps},
              {"inner_start", c.inner_start == InnerStart::current_state ? "current-state" : "fixed-restart"},
              {"seed", c.seed}};
}

inline Json to_json(const ModelComparison& c) {
  return Json{{"ad", to_string(c.ad)}, {"cm", to_string(c.cm)}, {"ks", to_string(c.ks)}, {"ll", to_string(c.ll)}};
}

inline Json to_json(const MlResult& r) {
  return Json{{"converged", r.converged},
              {"params", to_json(r.params)},
              {"iterations", r.iterations},
              {"gradient_norm", num(r.gradient_norm)},
              {"loglik", num(r.loglik)},
              {"failure", to_string(r.failure)}};
}

inline Json to_json(const Descriptive& d) {
  return Json{{"min", num(d.min)},   {"q1", num(d.q1)}, {"median", num(d.median)}, {"mean", num(d.mean)},
              {"q3", num(d.q3)},     {"max", num(d.max)}, {"sd", num(d.sd)},       {"skewness", num(d.skewness)},
              {"count", d.count}};
}

inline Json to_json(const NrStudyResult& r) {
  Json sizes = Json::array();
  for (const auto& s : r.sizes) {
    Json f = Json::object();
    for (const auto& [k, v] : s.failures) f[k] = v;
    sizes.push_back(Json{{"n", s.n},
                         {"replications", s.replications},
                         {"converged", s.converged},
                         {"percent_converged", num(s.percent_converged)},
                         {"failures", f},
                         {"infeasible_starts", s.infeasible_starts},
                         {"degenerate_redraws", s.degenerate_redraws}});
  }
  const auto& c = r.config;
  auto range = [](const Range& x) { return Json::array({num(x.lower), num(x.upper)}); };
  return Json{{"study", "nr-failure"},
              {"config",
               Json{{"replications", c.replications},
                    {"sizes", c.sizes},
                    {"seed", c.seed},
                    {"truth_ranges", Json{{"delta", range(c.delta)},
                                          {"gamma", range(c.gamma)},
                                          {"lambda", range(c.lambda)},
                                          {"xi", range(c.xi)}}},
                    {"initial_ranges", Json{{"delta", range(c.delta0)},
                                            {"gamma", range(c.gamma0)},
                                            {"lambda", "U(x_(n) - x_(1), " + std::to_string(c.lambda0_upper) + ")"},
                                            {"xi", "U(" + std::to_string(c.xi0_lower) + ", x_(1))"}}},
                    {"max_iter", c.ml.max_iter},
                    {"tol", num(c.ml.tol)}}},
              {"failure_definition",
               "not converged when the gradient norm of the mean log-likelihood stays above tol after max_iter "
               "iterations or the line search stalls, when the objective or gradient is not finite, or when "
               "the starting point leaves an observation outside the support"},
              {"sizes", sizes}};
}

inline Json to_json(const RobustnessResult& r) {
  Json pooled = Json::object();
  for (std::size_t k = 0; k < 4; ++k) pooled[kJsbNames[k]] = to_json(r.pooled[k]);
  auto arr = [](const std::array<double, 4>& a) {
    Json j = Json::object();
    for (std::size_t k = 0; k < 4; ++k) j[kJsbNames[k]] = num(a[k]);
    return j;
  };
  Json estimates = Json::array();
  for (std::size_t i = 0; i < r.estimates.size(); ++i)
    estimates.push_back(Json{{"replication", i + 1}, {"initial", to_json(r.initials[i])}, {"estimate", to_json(r.estimates[i])}});
  const auto& c = r.config;
  auto range = [](const Range& x) { return Json::array({num(x.lower), num(x.upper)}); };
  const auto& cmp = r.comparison;
  return Json{{"study", "robustness"},
              {"config", Json{{"replications", c.replications},
                              {"n", c.n},
                              {"truth", to_json(c.truth)},
                              {"initial_ranges", Json{{"delta", range(c.delta0)},
                                                      {"gamma", range(c.gamma0)},
                                                      {"lambda", range(c.lambda0)},
                                                      {"xi", range(c.xi0)}}},
                              {"gibbs", to_json(c.gibbs)},
                              {"seed", c.seed}}},
              {"infeasible_initial_redraws", r.infeasible_redraws},
              {"pooled_post_burn_in", pooled},
              {"initials_comparison", Json{{"extreme_initial", to_json(c.extreme_initial)},
                                           {"default_initial", to_json(cmp.standard.initial)},
                                           {"tail_sweeps", c.tail},
                                           {"extreme_tail_mean", arr(cmp.extreme_tail_mean)},
                                           {"default_tail_mean", arr(cmp.standard_tail_mean)},
                                           {"pooled_se", arr(cmp.pooled_se)}}},
              {"replications", estimates}};
}

inline JsbParams jsb_from_json(const Json& j) {
  return {num_from(j.at("delta")), num_from(j.at("gamma")), num_from(j.at("lambda")), num_from(j.at("xi"))};
}

inline WeibullParams weibull_from_json(const Json& j) {
  return {num_from(j.at("alpha")), num_from(j.at("beta")), num_from(j.at("mu"))};
}

inline GofReport gof_from_json(const Json& j) {
  GofReport r;
  r.ad = j.at("ad").is_null() ? std::numeric_limits<double>::infinity() : j.at("ad").get<double>();
  r.cm = num_from(j.at("cm"));
  r.ks = num_from(j.at("ks"));
  r.ks_at_points = num_from(j.at("ks_at_points"));
  r.ll = num_from(j.at("ll"));
  return r;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path + ": write failed");
}

inline void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  return Json::parse(in);
}

/// CSV `x,jsb_pdf,weibull_pdf`; a column is omitted when its flag is off.
inline std::string density_grid_csv(const std::vector<DensityRow>& grid, bool jsb, bool weibull) {
  std::ostringstream os;
  os << "x";
  if (jsb) os << ",jsb_pdf";
  if (weibull) os << ",weibull_pdf";
  os << "\n";
  char buf[64];
  for (const auto& r : grid) {
    std::snprintf(buf, sizeof buf, "%.12g", r.x);
    os << buf;
    if (jsb) {
      std::snprintf(buf, sizeof buf, ",%.12g", r.jsb);
      os << buf;
    }
    if (weibull) {
      std::snprintf(buf, sizeof buf, ",%.12g", r.weibull);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace sbfit
