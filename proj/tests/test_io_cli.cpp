// Apache License, Version 2.0, refer to LICENSE.txt

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sbfit/cli.hpp"

using namespace sbfit;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / (std::string("sbfit_") + info->test_suite_name() + "_" + info->name());
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

fs::path sample_file(const fs::path& dir, const JsbParams& t, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  Dataset d = jsb_sample(t, n, rng);
  std::ostringstream os;
  os.precision(17);
  for (double x : d) os << x << "\n";
  fs::path p = dir / "data.txt";
  spit(p, os.str());
  return p;
}

GibbsConfig short_gibbs(std::uint64_t seed) {
  GibbsConfig g;
  g.iterations = 300;
  g.burn_in = 150;
  g.seed = seed;
  return g;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(SBFIT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Ingest, SingleColumn) {
  std::istringstream in("1.0\n2.0\n3.0");
  Dataset d = parse_observations(in);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.min(), 1.0);
  EXPECT_EQ(d.max(), 3.0);
}

TEST(Ingest, SortsAndSkipsBlankLines) {
  std::istringstream in("3.5\n\n  1.25  \n2\n");
  Dataset d = parse_observations(in);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0], 1.25);
  EXPECT_EQ(d[2], 3.5);
}

TEST(Ingest, ErrorsCiteLineNumber) {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_observations(in, "f.txt");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("1.0\nabc\n3.0").find("f.txt:2:"), std::string::npos);
  EXPECT_NE(message("1.0\n2.0\n-3.0").find("f.txt:3:"), std::string::npos);
  EXPECT_NE(message("1.0\n0\n").find("f.txt:2:"), std::string::npos);
  EXPECT_NE(message("1.0\ninf\n").find("f.txt:2:"), std::string::npos);
  EXPECT_NE(message("1.0\nnan\n").find("f.txt:2:"), std::string::npos);
  EXPECT_NE(message("").find("no observations"), std::string::npos);
  EXPECT_NE(message("plot,height\n1,2\n").find("f.txt:1:"), std::string::npos);
}

TEST(Ingest, CsvWithDbhColumn) {
  std::istringstream in("plot,dbh,species\n9,12.5,PP\n9,30.25,DF\n10,7,PP\n");
  Dataset d = parse_observations(in);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.min(), 7.0);
  EXPECT_EQ(d.max(), 30.25);
  std::istringstream short_row("plot,dbh\n9\n");
  EXPECT_THROW(parse_observations(short_row), DataError);
}

TEST(Ingest, MissingFile) { EXPECT_THROW(ingest("/nonexistent/sbfit.txt"), DataError); }

TEST(Json, NumbersRoundedAndRoundTrip) {
  EXPECT_EQ(num(1.0 / 3.0).get<double>(), 0.333333333333);
  EXPECT_TRUE(num(kNegInf).is_null());
  JsbParams p{1.0 / 3.0, -2.5, 17.25, 0.125};
  JsbParams back = jsb_from_json(Json::parse(to_json(p).dump()));
  EXPECT_EQ(back.gamma, -2.5);
  EXPECT_EQ(back.delta, 0.333333333333);
  EXPECT_EQ(to_json(back), to_json(p));
  WeibullParams w{1.682, 23.12, 7.436};
  EXPECT_EQ(weibull_from_json(to_json(w)), w);
  GofReport g{std::numeric_limits<double>::infinity(), 0.5, 0.25, 0.125, kNegInf};
  EXPECT_EQ(gof_from_json(Json::parse(to_json(g).dump())), g);
}

TEST(CmdFit, BothModelsDeterministicAndRoundTrips) {
  fs::path dir = scratch_dir();
  fs::path data = sample_file(dir, {2, 2, 20, 0}, 80, 1);
  FitRequest req{data.string(), "both", "bayes", short_gibbs(7), (dir / "a").string()};
  std::ostringstream log;
  ASSERT_EQ(cmd_fit(req, log), kExitOk);
  req.out = (dir / "b").string();
  ASSERT_EQ(cmd_fit(req, log), kExitOk);
  for (const char* f : {"fit.json", "trace_jsb.csv", "trace_weibull.csv", "density_grid.csv"}) {
    std::string a = slurp(dir / "a" / f), b = slurp(dir / "b" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, b) << f;
  }
  std::string jsb_trace = slurp(dir / "a" / "trace_jsb.csv");
  EXPECT_EQ(jsb_trace.substr(0, jsb_trace.find('\n')), "iter,delta,gamma,lambda,xi");
  std::string w_trace = slurp(dir / "a" / "trace_weibull.csv");
  EXPECT_EQ(w_trace.substr(0, w_trace.find('\n')), "iter,alpha,beta,mu");
  EXPECT_EQ(slurp(dir / "a" / "density_grid.csv").substr(0, 22), "x,jsb_pdf,weibull_pdf\n");

  Json j = read_json_file((dir / "a" / "fit.json").string());
  EXPECT_EQ(j.dump(2) + "\n", slurp(dir / "a" / "fit.json"));
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["n"], 80);
  EXPECT_EQ(j["config"]["iterations"], 300);
  JsbParams est = jsb_from_json(j["jsb"]["estimate"]);
  EXPECT_EQ(to_json(est), j["jsb"]["estimate"]);
  GofReport g = gof_from_json(j["jsb"]["gof"]);
  EXPECT_EQ(to_json(g), j["jsb"]["gof"]);
  for (const char* s : {"ad", "cm", "ks", "ll"}) EXPECT_TRUE(j["winners"].contains(s));
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    EXPECT_EQ(entry.path().string().rfind(dir.string(), 0), 0u);
}

TEST(CmdFit, SeedChangesOutput) {
  fs::path dir = scratch_dir();
  fs::path data = sample_file(dir, {2, 2, 20, 0}, 60, 2);
  FitRequest req{data.string(), "jsb", "bayes", short_gibbs(1), (dir / "a").string()};
  std::ostringstream log;
  ASSERT_EQ(cmd_fit(req, log), kExitOk);
  req.gibbs.seed = 2;
  req.out = (dir / "b").string();
  ASSERT_EQ(cmd_fit(req, log), kExitOk);
  EXPECT_NE(slurp(dir / "a" / "trace_jsb.csv"), slurp(dir / "b" / "trace_jsb.csv"));
  EXPECT_FALSE(fs::exists(dir / "a" / "trace_weibull.csv"));
}

TEST(CmdFit, UsageAndDataErrorsMapToExitCodes) {
  fs::path dir = scratch_dir();
  fs::path data = sample_file(dir, {2, 2, 20, 0}, 60, 3);
  std::ostringstream err;
  FitRequest ml_weibull{data.string(), "weibull", "ml", short_gibbs(1), dir.string()};
  EXPECT_EQ(run_guarded([&] { return cmd_fit(ml_weibull, err); }, err), kExitUsage);
  FitRequest burn{data.string(), "jsb", "bayes", short_gibbs(1), dir.string()};
  burn.gibbs.burn_in = burn.gibbs.iterations;
  EXPECT_EQ(run_guarded([&] { return cmd_fit(burn, err); }, err), kExitUsage);
  spit(dir / "tiny.txt", "1\n2\n3\n");
  FitRequest tiny{(dir / "tiny.txt").string(), "jsb", "bayes", short_gibbs(1), dir.string()};
  EXPECT_EQ(run_guarded([&] { return cmd_fit(tiny, err); }, err), kExitData);
  spit(dir / "bad.txt", "1\n2\nx\n");
  FitRequest bad{(dir / "bad.txt").string(), "jsb", "bayes", short_gibbs(1), dir.string()};
  EXPECT_EQ(run_guarded([&] { return cmd_fit(bad, err); }, err), kExitData);
  EXPECT_NE(err.str().find("bad.txt:3:"), std::string::npos);
}

TEST(CmdFit, MaximumLikelihoodJsb) {
  fs::path dir = scratch_dir();
  fs::path data = sample_file(dir, {2, 2, 20, 0}, 500, 4);
  FitRequest req{data.string(), "jsb", "ml", short_gibbs(1), dir.string()};
  std::ostringstream log;
  int code = cmd_fit(req, log);
  Json j = read_json_file((dir / "fit.json").string());
  EXPECT_EQ(j["method"], "ml");
  if (code == kExitOk) {
    EXPECT_TRUE(j["jsb"]["ml"]["converged"].get<bool>());
    EXPECT_TRUE(j["jsb"].contains("estimate"));
  } else {
    EXPECT_EQ(code, kExitNumerical);
    EXPECT_FALSE(j["jsb"]["ml"]["converged"].get<bool>());
  }
}

TEST(CmdExperiment, NrFailureSmall) {
  fs::path dir = scratch_dir();
  ExperimentRequest req;
  req.name = "nr-failure";
  req.reps = 10;
  req.sizes = std::vector<std::size_t>{20};
  req.gibbs.seed = 1;
  req.out = dir.string();
  std::ostringstream log;
  ASSERT_EQ(cmd_experiment(req, log), kExitOk);
  Json j = read_json_file((dir / "study_nr-failure.json").string());
  ASSERT_EQ(j["sizes"].size(), 1u);
  double pct = j["sizes"][0]["percent_converged"].get<double>();
  EXPECT_GE(pct, 0.0);
  EXPECT_LE(pct, 100.0);
  EXPECT_TRUE(j.contains("failure_definition"));
}

TEST(CmdExperiment, RobustnessSmall) {
  fs::path dir = scratch_dir();
  ExperimentRequest req;
  req.name = "robustness";
  req.reps = 2;
  req.gibbs = short_gibbs(1);
  req.gibbs.iterations = 1200;
  req.gibbs.burn_in = 150;
  req.out = dir.string();
  std::ostringstream log;
  ASSERT_EQ(cmd_experiment(req, log), kExitOk);
  EXPECT_TRUE(fs::exists(dir / "trace_rep_001.csv"));
  EXPECT_TRUE(fs::exists(dir / "trace_rep_002.csv"));
  EXPECT_FALSE(fs::exists(dir / "trace_rep_003.csv"));
  EXPECT_TRUE(fs::exists(dir / "trace_extreme_initials.csv"));
  Json j = read_json_file((dir / "study_robustness.json").string());
  EXPECT_EQ(j["pooled_post_burn_in"]["delta"]["count"], 2 * 1050);
  EXPECT_EQ(j["replications"].size(), 2u);
  req.name = "bogus";
  EXPECT_THROW(cmd_experiment(req, log), UsageError);
}

TEST(CmdGof, WritesComparison) {
  fs::path dir = scratch_dir();
  fs::path data = sample_file(dir, {2, 2, 20, 0}, 50, 5);
  GofRequest req{data.string(), JsbParams{2, 2, 20, 0}, WeibullParams{2.5, 8, -1}, dir.string()};
  ASSERT_EQ(cmd_gof(req), kExitOk);
  Json j = read_json_file((dir / "gof.json").string());
  Dataset d = ingest(data.string());
  EXPECT_EQ(j["jsb"]["gof"], to_json(compute_gof(d, JsbParams{2, 2, 20, 0})));
  EXPECT_TRUE(j.contains("winners"));
  GofRequest none{data.string(), std::nullopt, std::nullopt, dir.string()};
  EXPECT_THROW(cmd_gof(none), UsageError);
}

TEST(Binary, ExitCodesAndDeterminism) {
  fs::path dir = scratch_dir();
  fs::path data = sample_file(dir, {2, 2, 20, 0}, 60, 6);
  std::string common = " --iterations 200 --burn-in 100 --seed 7 " + data.string();
  EXPECT_EQ(run_cli("fit --out " + (dir / "a").string() + common), 0);
  EXPECT_EQ(run_cli("fit --out " + (dir / "b").string() + common), 0);
  EXPECT_EQ(slurp(dir / "a" / "fit.json"), slurp(dir / "b" / "fit.json"));
  EXPECT_EQ(run_cli("fit --model weibull --method ml " + data.string()), 1);
  EXPECT_EQ(run_cli("fit --model nope " + data.string()), 1);
  EXPECT_EQ(run_cli("fit --out " + dir.string() + " /nonexistent/file.txt"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("gof --jsb 1,2,3 " + data.string()), 1);

  // config file values apply, flags win
  spit(dir / "run.ini", "iterations = 200\nburn-in = 100\nseed = 3\n");
  EXPECT_EQ(run_cli("fit --config " + (dir / "run.ini").string() + " --seed 7 --out " + (dir / "c").string() + " " +
                    data.string()),
            0);
  EXPECT_EQ(slurp(dir / "a" / "fit.json"), slurp(dir / "c" / "fit.json"));

  // environment seed fallback
  std::string env = "SBFIT_SEED=7 ";
  int status = std::system((env + SBFIT_CLI_PATH + " fit --iterations 200 --burn-in 100 --out " + (dir / "d").string() +
                            " " + data.string() + " >/dev/null 2>&1")
                               .c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
  EXPECT_EQ(slurp(dir / "a" / "fit.json"), slurp(dir / "d" / "fit.json"));
}
