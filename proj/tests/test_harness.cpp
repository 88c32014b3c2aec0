#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mvsde/cli.hpp"
#include "mvsde/experiments.hpp"

using namespace mvsde;

namespace {

ChaosConfig tiny_chaos() {
  KeyValueConfig cfg = KeyValueConfig::from_string(
      "grid = 16,32,64\nn_ref = 256\nreps = 8\nmeasure_time = 1\ndelta = 0.05\n");
  ChaosConfig c = ChaosConfig::from_config(cfg);
  cfg.finish();
  return c;
}

std::string strip_wall_clock(std::string json) {
  const auto pos = json.find("\"wall_clock_sec\"");
  REQUIRE(pos != std::string::npos);
  return json.substr(0, pos);
}

}  // namespace

TEST_CASE("config parsing: values, comments, lists") {
  KeyValueConfig cfg = KeyValueConfig::from_string(
      "# comment line\nscheme = tamed  # trailing\n delta = 0.25 \ngrid = 1, 2,4 \n");
  CHECK(cfg.get_string("scheme", "x") == "tamed");
  CHECK(cfg.get_double("delta", 0.0) == 0.25);
  const auto grid = cfg.get_double_list("grid", {});
  REQUIRE(grid.size() == 3);
  CHECK(grid[2] == 4.0);
  cfg.finish();
}

TEST_CASE("config errors name the offending key") {
  KeyValueConfig bad = KeyValueConfig::from_string("delta = abc\n");
  CHECK_THROWS_WITH_AS(bad.get_double("delta", 1.0), doctest::Contains("delta"), ConfigError);

  KeyValueConfig unknown = KeyValueConfig::from_string("dleta = 0.1\n");
  unknown.get_double("delta", 1.0);
  CHECK_THROWS_WITH_AS(unknown.finish(), doctest::Contains("dleta"), ConfigError);

  CHECK_THROWS_AS(KeyValueConfig::from_string("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::from_string("just a line\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::from_file("/nonexistent/path.cfg"), ConfigError);
}

TEST_CASE("reports are a pure function of config and seed") {
  const ChaosConfig c = tiny_chaos();
  ExperimentReport a = run_chaos_experiment(c, 99, 1);
  ExperimentReport b = run_chaos_experiment(c, 99, 4);
  CHECK(strip_wall_clock(a.to_json()) == strip_wall_clock(b.to_json()));
  CHECK(a.to_csv() == b.to_csv());

  ExperimentReport other_seed = run_chaos_experiment(c, 100, 1);
  CHECK(strip_wall_clock(a.to_json()) != strip_wall_clock(other_seed.to_json()));
}

TEST_CASE("report JSON is schema complete") {
  const ChaosConfig c = tiny_chaos();
  const ExperimentReport rep = run_chaos_experiment(c, 5, 1);
  const std::string json = rep.to_json();
  for (const char* field :
       {"\"experiment\"", "\"version\"", "\"seed\"", "\"pass\"", "\"error\"", "\"config\"",
        "\"grid\"", "\"fit\"", "\"notes\"", "\"wall_clock_sec\"", "\"slope\"",
        "\"r_squared\"", "\"stderrs\""}) {
    CAPTURE(field);
    CHECK(json.find(field) != std::string::npos);
  }
}

TEST_CASE("CSV series and JSON fit agree") {
  KeyValueConfig kv = KeyValueConfig::from_string("pool = 512\nreps = 2\nhorizon = 1\n");
  DelayRateConfig c = DelayRateConfig::from_config(kv);
  kv.finish();
  const ExperimentReport rep = run_delay_experiment(c, 17, 1);
  REQUIRE(rep.has_fit);

  // recompute the (unweighted) fit from the CSV rows
  std::istringstream csv(rep.to_csv());
  std::string line;
  std::getline(csv, line);
  CHECK(line == "grid_value,time,estimate,stderr");
  std::vector<double> xs, ys;
  while (std::getline(csv, line)) {
    double g, t, e, s;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &g, &t, &e, &s) == 4);
    xs.push_back(g);
    ys.push_back(e);
  }
  const RateFit refit = fit_loglog_slope(xs, ys);
  CHECK(refit.slope == doctest::Approx(rep.fit.slope).epsilon(1e-12));
  CHECK(refit.r_squared == doctest::Approx(rep.fit.r_squared).epsilon(1e-12));
}

TEST_CASE("report files are written to the output directory") {
  namespace fs = std::filesystem;
  const ChaosConfig c = tiny_chaos();
  const ExperimentReport rep = run_chaos_experiment(c, 5, 1);
  const std::string dir = (fs::temp_directory_path() / "mvsde_test_out").string();
  fs::remove_all(dir);
  rep.write(dir);
  CHECK(fs::exists(fs::path(dir) / "series.csv"));
  CHECK(fs::exists(fs::path(dir) / "report.json"));
  fs::remove_all(dir);
}

TEST_CASE("cli: exit codes") {
  // missing config file
  CHECK(run_cli({"chaos", "--config", "/no/such/file.cfg"}) == 1);
  // unknown key in config
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "mvsde_bad.cfg").string();
  {
    std::ofstream out(path);
    out << "not_a_key = 1\n";
  }
  CHECK(run_cli({"moments", "--config", path}) == 1);
  fs::remove(path);
  // deterministic pass
  CHECK(run_cli({"contraction-check", "--model", "double-well-1d"}) == 0);
  CHECK(run_cli({"contraction-check", "--model", "ou"}) == 0);
  CHECK(run_cli({"contraction-check", "--model", "double-well-nd"}) == 0);
  // unknown subcommand
  CHECK(run_cli({"frobnicate"}) != 0);
}

TEST_CASE("cli: simulate writes a trajectory") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "mvsde_sim_out").string();
  fs::remove_all(dir);
  const std::string cfg_path = (fs::temp_directory_path() / "mvsde_sim.cfg").string();
  {
    std::ofstream out(cfg_path);
    out << "model = ou\nscheme = explicit\ndelta = 0.1\nhorizon = 1\nN = 4\n"
        << "init = point\ninit_a = 1\nsnapshot_times = 0.5,1\n";
  }
  CHECK(run_cli({"simulate", "--config", cfg_path, "--out", dir}) == 0);
  std::ifstream traj(fs::path(dir) / "trajectory.csv");
  REQUIRE(traj.good());
  std::string header;
  std::getline(traj, header);
  CHECK(header == "time,particle,coord_0");
  int rows = 0;
  std::string line;
  while (std::getline(traj, line)) ++rows;
  CHECK(rows == 2 * 4);  // t = 0.5, 1 snapshots x 4 particles
  fs::remove_all(dir);
  fs::remove(cfg_path);
}

TEST_CASE("chaos with K = 0 reports the bias slope without asserting it") {
  KeyValueConfig kv = KeyValueConfig::from_string(
      "K_interaction = 0\ngrid = 16,32,64\nn_ref = 256\nreps = 8\nmeasure_time = 1\n"
      "delta = 0.05\n");
  ChaosConfig c = ChaosConfig::from_config(kv);
  kv.finish();
  const ExperimentReport rep = run_chaos_experiment(c, 31, 1);
  CHECK(rep.pass);  // no window asserted in the degenerate case
  bool noted = false;
  for (const auto& n : rep.notes) noted = noted || n.find("not asserted") != std::string::npos;
  CHECK(noted);
}

TEST_CASE("decay with identical initial laws stays at exactly zero") {
  KeyValueConfig kv = KeyValueConfig::from_string(
      "x0_a = 2\nx0_b = 2\nN = 32\nreps = 2\nhorizon = 2\nsample_dt = 0.5\ntail_start = 0.5\n");
  DecayConfig c = DecayConfig::from_config(kv);
  kv.finish();
  const ExperimentReport rep = run_decay_experiment(c, 9, 1);
  for (const auto& g : rep.grid)
    for (std::size_t i = 0; i < g.estimates.size(); ++i)
      CHECK(g.estimates[i] <= 3.0 * g.stderrs[i]);  // identically zero, in fact
}

TEST_CASE("zero-noise moments converge to the fixed-point power") {
  // sigma = 0 from inside the basin of x* = 1: |x|^p -> 1
  KeyValueConfig kv = KeyValueConfig::from_string(
      "sigma = 0\nK_interaction = 0\nx0 = 0.5\nN = 4\nreps = 1\ndelta = 0.01\n"
      "horizon = 40\nsample_dt = 1\np_grid = 2,4\n");
  MomentConfig c = MomentConfig::from_config(kv);
  kv.finish();
  const ExperimentReport rep = run_moment_experiment(c, 3, 1);
  // the tamed/backward/adaptive series all end at |x*|^p = 1
  for (const auto& g : rep.grid)
    CHECK(g.estimates.back() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("backward EM on the linear model superconverges (slope near 1)") {
  KeyValueConfig kv = KeyValueConfig::from_string(
      "model = ou\nbeta = 1\nscheme = backward\npool = 2048\nslope_min = 0.75\n"
      "slope_max = 1.3\nr2_min = 0.9\n");
  DeltaRateConfig c = DeltaRateConfig::from_config(kv);
  kv.finish();
  const ExperimentReport rep = run_delta_experiment(c, 23, 1);
  REQUIRE(rep.has_fit);
  CHECK(rep.fit.slope > 0.75);
  CHECK(rep.pass);
}

TEST_CASE("model selection by config name with overrides") {
  KeyValueConfig kv =
      KeyValueConfig::from_string("model = ou\nbeta = 2\nalpha = 0.5\nsigma = 0.3\n");
  const ModelSpec m = model_from_config(kv, "double-well-1d");
  kv.finish();
  CHECK(m.name == "ou");
  CHECK(m.sigma == 0.3);
  double x = 0.0, b = 0.0;
  m.b1(&x, &b);
  CHECK(b == 1.0);  // beta (alpha - x) = 2 * 0.5
}
