// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbfit/distributions.hpp"
#include "sbfit/error.hpp"
#include "sbfit/experiments.hpp"
#include "sbfit/gof.hpp"
#include "sbfit/io.hpp"
#include "sbfit/jsb_bayes.hpp"
#include "sbfit/ml_jsb.hpp"
#include "sbfit/weibull_bayes.hpp"

namespace sbfit {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct FitRequest {
  std::string input;
  std::string model = "both";   // jsb | weibull | both
  std::string method = "bayes"; // bayes | ml
  GibbsConfig gibbs;
  std::string out = ".";

  void validate() const {
    if (model != "jsb" && model != "weibull" && model != "both")
      throw UsageError("--model must be one of jsb, weibull, both (got '" + model + "')");
    if (method != "bayes" && method != "ml") throw UsageError("--method must be bayes or ml (got '" + method + "')");
    if (method == "ml" && model != "jsb") throw UsageError("--method ml is only available with --model jsb");
    if (gibbs.iterations <= gibbs.burn_in) throw UsageError("--iterations must exceed --burn-in");
    if (gibbs.inner_mh_steps == 0) throw UsageError("--inner-steps must be >= 1");
  }
};

struct ExperimentRequest {
  std::string name;  // nr-failure | robustness
  std::optional<std::size_t> reps;
  std::optional<std::vector<std::size_t>> sizes;
  GibbsConfig gibbs;
  std::string out = ".";
  std::size_t threads = 0;
};

struct GofRequest {
  std::string input;
  std::optional<JsbParams> jsb;
  std::optional<WeibullParams> weibull;
  std::string out = ".";
};

/// Minimum sample size accepted by `fit`.
inline constexpr std::size_t kMinFitSize = 5;

namespace detail {

inline std::string out_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError(dir + ": cannot create output directory (" + ec.message() + ")");
}

template <class Chain>
std::string trace_text(const Chain& chain) {
  std::ostringstream os;
  write_trace_csv(os, chain);
  return os.str();
}

template <class Params>
Json model_block(const Params& estimate, const Params& initial, const GofReport& gof) {
  return Json{{"estimate", to_json(estimate)}, {"initial", to_json(initial)}, {"gof", to_json(gof)}};
}

inline double rate(std::size_t accepted, std::size_t steps) {
  return steps == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(steps);
}

}  // namespace detail

/// Fits the requested model(s) and writes fit.json, trace_<model>.csv (Bayes
/// fits) and density_grid.csv into request.out. Returns the exit code.
inline int cmd_fit(const FitRequest& req, std::ostream& log = std::cerr) {
  req.validate();
  Dataset data = ingest(req.input);
  if (data.size() < kMinFitSize)
    throw DataError(req.input + ": need at least " + std::to_string(kMinFitSize) + " observations, got " +
                    std::to_string(data.size()));
  detail::ensure_dir(req.out);

  Json j;
  j["command"] = "fit";
  j["input"] = req.input;
  j["n"] = data.size();
  j["model"] = req.model;
  j["method"] = req.method;
  j["seed"] = req.gibbs.seed;
  int code = kExitOk;

  std::vector<DensityRow> grid;
  bool with_jsb = req.model != "weibull", with_weibull = req.model != "jsb";

  if (req.method == "ml") {
    JsbParams init = initial_values_jsb(data);
    MlOptions opt;
    MlResult fit = ml_fit_jsb(data, init, opt);
    j["config"] = Json{{"max_iter", opt.max_iter}, {"tol", num(opt.tol)}, {"fd_step", num(opt.fd_step)}};
    Json block{{"initial", to_json(init)}, {"ml", to_json(fit)}};
    if (fit.converged) {
      block["estimate"] = to_json(fit.params);
      block["gof"] = to_json(compute_gof(data, fit.params, false));
      grid = density_grid(data, fit.params, WeibullParams{}, 200);
    } else {
      log << "error: ML fit did not converge (" << to_string(fit.failure) << ")\n";
      code = kExitNumerical;
    }
    j["jsb"] = block;
  } else if (req.model == "both") {
    AnalysisReport r = run_two_model_analysis(data, req.gibbs);
    j["config"] = to_json(req.gibbs);
    Json jb = detail::model_block(r.jsb, r.jsb_chain.initial, r.comparison.jsb);
    jb["acceptance"] = Json{{"lambda", num(detail::rate(r.jsb_chain.lambda_accepted, r.jsb_chain.inner_steps_total))},
                            {"xi", num(detail::rate(r.jsb_chain.xi_accepted, r.jsb_chain.inner_steps_total))}};
    Json wb = detail::model_block(r.weibull, r.weibull_chain.initial, r.comparison.weibull);
    wb["weibull_seed"] = r.weibull_chain.config.seed;
    wb["acceptance"] = Json{{"mu", num(detail::rate(r.weibull_chain.mu_accepted, r.weibull_chain.inner_steps_total))}};
    j["jsb"] = jb;
    j["weibull"] = wb;
    j["winners"] = to_json(r.comparison);
    write_text_file(detail::out_path(req.out, "trace_jsb.csv"), detail::trace_text(r.jsb_chain));
    write_text_file(detail::out_path(req.out, "trace_weibull.csv"), detail::trace_text(r.weibull_chain));
    grid = r.grid;
  } else if (req.model == "jsb") {
    ChainOutput chain = run_jsb_gibbs(data, req.gibbs);
    JsbParams est = posterior_estimate(chain);
    j["config"] = to_json(req.gibbs);
    Json jb = detail::model_block(est, chain.initial, compute_gof(data, est, false));
    jb["acceptance"] = Json{{"lambda", num(detail::rate(chain.lambda_accepted, chain.inner_steps_total))},
                            {"xi", num(detail::rate(chain.xi_accepted, chain.inner_steps_total))}};
    j["jsb"] = jb;
    write_text_file(detail::out_path(req.out, "trace_jsb.csv"), detail::trace_text(chain));
    grid = density_grid(data, est, WeibullParams{}, 200);
  } else {
    WeibullChainOutput chain = run_weibull_gibbs(data, req.gibbs);
    WeibullParams est = posterior_estimate(chain);
    j["config"] = to_json(req.gibbs);
    Json wb = detail::model_block(est, chain.initial, compute_gof(data, est, false));
    wb["acceptance"] = Json{{"mu", num(detail::rate(chain.mu_accepted, chain.inner_steps_total))}};
    j["weibull"] = wb;
    write_text_file(detail::out_path(req.out, "trace_weibull.csv"), detail::trace_text(chain));
    grid = density_grid(data, JsbParams{}, est, 200);
  }

  write_json_file(detail::out_path(req.out, "fit.json"), j);
  if (!grid.empty())
    write_text_file(detail::out_path(req.out, "density_grid.csv"), density_grid_csv(grid, with_jsb, with_weibull));
  return code;
}

/// Runs a simulation study and writes study_<name>.json; the robustness study
/// also writes trace_rep_NNN.csv per replication plus the extreme- and
/// default-initials traces.
inline int cmd_experiment(const ExperimentRequest& req, std::ostream& log = std::cerr) {
  detail::ensure_dir(req.out);
  if (req.name == "nr-failure") {
    NrStudyConfig c;
    if (req.reps) c.replications = *req.reps;
    if (req.sizes) c.sizes = *req.sizes;
    c.seed = req.gibbs.seed;
    c.threads = req.threads;
    NrStudyResult r = run_nr_failure_study(c);
    write_json_file(detail::out_path(req.out, "study_nr-failure.json"), to_json(r));
    for (const auto& s : r.sizes) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "n=%zu converged %.1f%%\n", s.n, s.percent_converged);
      log << buf;
    }
    return kExitOk;
  }
  if (req.name == "robustness") {
    if (req.sizes) throw UsageError("--sizes applies only to the nr-failure experiment");
    RobustnessConfig c;
    if (req.reps) c.replications = *req.reps;
    c.gibbs = req.gibbs;
    c.seed = req.gibbs.seed;
    c.threads = req.threads;
    c.validate();
    RobustnessResult r = run_robustness_study(c, [&](std::size_t i, const ChainOutput& chain) {
      char name[32];
      std::snprintf(name, sizeof name, "trace_rep_%03zu.csv", i + 1);
      write_text_file(detail::out_path(req.out, name), detail::trace_text(chain));
    });
    write_text_file(detail::out_path(req.out, "trace_extreme_initials.csv"), detail::trace_text(r.comparison.extreme));
    write_text_file(detail::out_path(req.out, "trace_default_initials.csv"), detail::trace_text(r.comparison.standard));
    write_json_file(detail::out_path(req.out, "study_robustness.json"), to_json(r));
    return kExitOk;
  }
  throw UsageError("unknown experiment '" + req.name + "' (expected nr-failure or robustness)");
}

/// Goodness-of-fit of user-supplied parameters; writes gof.json.
inline int cmd_gof(const GofRequest& req) {
  if (!req.jsb && !req.weibull) throw UsageError("gof needs --jsb and/or --weibull parameters");
  if (req.jsb && !req.jsb->valid()) throw UsageError("--jsb: delta and lambda must be positive");
  if (req.weibull && !req.weibull->valid()) throw UsageError("--weibull: alpha and beta must be positive");
  Dataset data = ingest(req.input);
  if (data.size() < 2) throw DataError(req.input + ": need at least 2 observations");
  detail::ensure_dir(req.out);
  Json j;
  j["command"] = "gof";
  j["input"] = req.input;
  j["n"] = data.size();
  std::optional<GofReport> gj, gw;
  if (req.jsb) {
    gj = compute_gof(data, *req.jsb, false);
    j["jsb"] = Json{{"params", to_json(*req.jsb)}, {"gof", to_json(*gj)}};
  }
  if (req.weibull) {
    gw = compute_gof(data, *req.weibull, false);
    j["weibull"] = Json{{"params", to_json(*req.weibull)}, {"gof", to_json(*gw)}};
  }
  if (gj && gw) j["winners"] = to_json(compare_reports(*gj, *gw));
  write_json_file(detail::out_path(req.out, "gof.json"), j);
  return kExitOk;
}

/// Runs `fn`, mapping exceptions to exit codes: usage 1, data 2, numerical 3.
template <class F>
int run_guarded(F&& fn, std::ostream& err = std::cerr) {
  try {
    return fn();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace sbfit
