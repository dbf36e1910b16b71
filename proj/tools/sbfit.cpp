// Apache License, Version 2.0, refer to LICENSE.txt

// sbfit fit|experiment|gof [flags] <input>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sbfit/cli.hpp"

namespace {

std::vector<double> parse_list(const std::string& text, std::size_t expected, const char* flag) {
  std::vector<double> out;
  std::string field;
  std::stringstream ss(text);
  while (std::getline(ss, field, ',')) {
    double v;
    if (!sbfit::detail::parse_double(sbfit::detail::trim(field), v))
      throw sbfit::UsageError(std::string(flag) + ": cannot parse '" + field + "'");
    out.push_back(v);
  }
  if (out.size() != expected)
    throw sbfit::UsageError(std::string(flag) + ": expected " + std::to_string(expected) + " comma-separated values");
  return out;
}

std::uint64_t seed_from_env() {
  const char* s = std::getenv("SBFIT_SEED");
  if (s == nullptr || *s == '\0') return 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw sbfit::UsageError("SBFIT_SEED must be an unsigned integer");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Johnson SB and three-parameter Weibull fitting by Gibbs sampling"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file; command-line flags take precedence");

  std::string model = "both", method = "bayes", out = ".", sizes_text, jsb_text, weibull_text, inner_start = "current-state";
  std::size_t iterations = 10000, burn_in = 5000, inner_steps = 30, threads = 0, reps = 0;
  std::uint64_t seed = 0;

  app.add_option("--model", model, "jsb | weibull | both")->capture_default_str();
  app.add_option("--method", method, "bayes | ml (ml only with --model jsb)")->capture_default_str();
  app.add_option("--iterations", iterations, "Gibbs sweeps")->capture_default_str();
  app.add_option("--burn-in", burn_in, "sweeps discarded before averaging")->capture_default_str();
  app.add_option("--inner-steps", inner_steps, "length of the inner Metropolis-Hastings chains")->capture_default_str();
  app.add_option("--inner-start", inner_start, "current-state | fixed-restart")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "master seed (falls back to SBFIT_SEED, then 0)");
  app.add_option("--out", out, "output directory")->capture_default_str();
  auto* reps_opt = app.add_option("--reps", reps, "experiment replications");
  auto* sizes_opt = app.add_option("--sizes", sizes_text, "comma-separated sample sizes (nr-failure)");
  app.add_option("--threads", threads, "worker threads for experiments, 0 = all cores")->capture_default_str();
  auto* jsb_opt = app.add_option("--jsb", jsb_text, "gof: delta,gamma,lambda,xi");
  auto* weibull_opt = app.add_option("--weibull", weibull_text, "gof: alpha,beta,mu");

  std::string input, experiment;
  auto* fit = app.add_subcommand("fit", "fit one dataset")->fallthrough();
  fit->add_option("input", input, "data file")->required();
  auto* exp = app.add_subcommand("experiment", "run a simulation study")->fallthrough();
  exp->add_option("name", experiment, "nr-failure | robustness")->required();
  auto* gof = app.add_subcommand("gof", "goodness of fit of given parameters")->fallthrough();
  gof->add_option("input", input, "data file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return sbfit::kExitUsage;
  }

  return sbfit::run_guarded([&]() -> int {
    sbfit::GibbsConfig g;
    g.iterations = iterations;
    g.burn_in = burn_in;
    g.inner_mh_steps = inner_steps;
    if (inner_start == "current-state") g.inner_start = sbfit::InnerStart::current_state;
    else if (inner_start == "fixed-restart") g.inner_start = sbfit::InnerStart::fixed_restart;
    else throw sbfit::UsageError("--inner-start must be current-state or fixed-restart");
    g.seed = seed_opt->count() > 0 ? seed : seed_from_env();

    if (fit->parsed()) {
      sbfit::FitRequest req{input, model, method, g, out};
      return sbfit::cmd_fit(req);
    }
    if (exp->parsed()) {
      sbfit::ExperimentRequest req;
      req.name = experiment;
      if (reps_opt->count() > 0) req.reps = reps;
      if (sizes_opt->count() > 0) {
        std::vector<std::size_t> sizes;
        std::string field;
        std::stringstream ss(sizes_text);
        while (std::getline(ss, field, ',')) {
          double v;
          if (!sbfit::detail::parse_double(sbfit::detail::trim(field), v) || v < 2 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw sbfit::UsageError("--sizes: '" + field + "' is not an integer >= 2");
          sizes.push_back(static_cast<std::size_t>(v));
        }
        req.sizes = sizes;
      }
      req.gibbs = g;
      req.out = out;
      req.threads = threads;
      return sbfit::cmd_experiment(req);
    }
    sbfit::GofRequest req;
    req.input = input;
    req.out = out;
    if (jsb_opt->count() > 0) {
      auto v = parse_list(jsb_text, 4, "--jsb");
      req.jsb = sbfit::JsbParams{v[0], v[1], v[2], v[3]};
    }
    if (weibull_opt->count() > 0) {
      auto v = parse_list(weibull_text, 3, "--weibull");
      req.weibull = sbfit::WeibullParams{v[0], v[1], v[2]};
    }
    return sbfit::cmd_gof(req);
  });
}
