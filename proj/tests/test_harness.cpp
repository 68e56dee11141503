#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "abmc/experiment.hpp"
#include "abmc/report.hpp"
#include "doctest.h"

using namespace abmc;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ABMC_CLI_PATH) + " " + args +
                          " > cli_stdout.txt 2> cli_stderr.txt";
  const int raw = std::system(cmd.c_str());
  return WEXITSTATUS(raw);
}

ReportRow row(const std::string& id, const std::string& model,
              const std::string& method, double log_ml) {
  ReportRow r;
  r.dataset_id = id;
  r.model = model;
  r.method = method;
  r.log_ml = log_ml;
  r.draws = 8;
  return r;
}

}  // namespace

TEST_CASE("root-mean-square error by hand") {
  // errors 3 and 4 -> sqrt((9+16)/2)
  CHECK(rmse({3.0, 4.0}, {0.0, 0.0}) ==
        doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
  CHECK(rmse({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
  // order of the pairs is irrelevant
  CHECK(rmse({5.0, -1.0}, {2.0, 1.0}) ==
        doctest::Approx(rmse({-1.0, 5.0}, {1.0, 2.0})).epsilon(1e-12));
  CHECK_THROWS_AS(rmse({1.0}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(rmse({}, {}), std::invalid_argument);
}

TEST_CASE("paired error deltas") {
  std::vector<ReportRow> rows;
  for (int i = 0; i < 4; ++i) {
    const std::string id = "set_" + std::to_string(i);
    const double truth = static_cast<double>(i);
    rows.push_back(row(id, "m", "truth", truth));
    rows.push_back(row(id, "m", "plain", truth + 2.0));
    rows.push_back(row(id, "m", "halved", truth + 1.0));
    rows.push_back(row(id, "m", "same", truth + 2.0));
  }
  CHECK(delta_rmse(rows, "same", "plain", "truth") == 0.0);
  CHECK(delta_rmse(rows, "halved", "plain", "truth") ==
        doctest::Approx(-1.0).epsilon(1e-12));

  rows.push_back(row("set_9", "m", "plain", 0.0));
  rows.push_back(row("set_9", "m", "truth", 0.0));
  // "halved" has no row for set_9
  CHECK_THROWS_WITH_AS(delta_rmse(rows, "halved", "plain", "truth"),
                       doctest::Contains("missing pairing"),
                       std::invalid_argument);
}

TEST_CASE("per-group aggregation splits on the id prefix") {
  std::vector<ReportRow> rows;
  for (const std::string& group : {"mu0", "mu5"})
    for (int i = 0; i < 3; ++i) {
      const std::string id = group + "_" + std::to_string(i);
      rows.push_back(row(id, "m", "truth", 1.0));
      rows.push_back(row(id, "m", "est", group == "mu0" ? 1.5 : 3.0));
    }
  const std::vector<RmseCell> cells = aggregate_rmse(rows, "truth");
  REQUIRE(cells.size() == 2);
  for (const RmseCell& c : cells) {
    CHECK(c.count == 3);
    CHECK(c.method == "est");
    if (c.group == "mu0") CHECK(c.rmse == doctest::Approx(0.5).epsilon(1e-12));
    if (c.group == "mu5") CHECK(c.rmse == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("report files survive a write-read cycle") {
  std::vector<ReportRow> rows;
  rows.push_back(row("a_0", "m1", "npe", -31.25));
  rows.back().mc_se = 0.125;
  rows.back().skipped_draws = 2;
  rows.push_back(row("a_1", "m2", "bridge", 1e-17));
  const std::string path = "report_roundtrip_test.csv";
  write_report_csv(rows, path);
  const std::vector<ReportRow> back = read_report_csv(path);
  std::remove(path.c_str());
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].dataset_id == rows[i].dataset_id);
    CHECK(back[i].model == rows[i].model);
    CHECK(back[i].method == rows[i].method);
    CHECK(back[i].log_ml == rows[i].log_ml);  // full-precision round trip
    CHECK(back[i].mc_se == rows[i].mc_se);
    CHECK(back[i].draws == rows[i].draws);
    CHECK(back[i].skipped_draws == rows[i].skipped_draws);
  }
}

TEST_CASE("manifest hashing is stable and content-sensitive") {
  CHECK(fnv1a_hash("") == 14695981039346656037ull);
  CHECK(fnv1a_hash("a") != fnv1a_hash("b"));
  CHECK(fnv1a_hash("abc") == fnv1a_hash("abc"));
}

TEST_CASE("configuration parsing rejects stray keys at every level") {
  const std::string base = R"({
    "experiment": "gaussian",
    "mode": "npe",
    "model": {"dim": 1, "rows": 5},
    "training": {"epochs": 2, "steps_per_epoch": 2, "batch_size": 8},
    "test": {"count": 2},
    "oracles": ["analytic"]
  })";
  CHECK_NOTHROW(parse_experiment_config(base));

  auto inject = [&](const std::string& needle, const std::string& extra) {
    std::string s = base;
    const std::size_t at = s.find(needle);
    REQUIRE(at != std::string::npos);
    s.insert(at, extra);
    return s;
  };
  // top level
  CHECK_THROWS_AS(
      parse_experiment_config(inject("\"experiment\"", "\"typo\": 1, ")),
      std::invalid_argument);
  // inside model
  CHECK_THROWS_AS(parse_experiment_config(inject("\"dim\"", "\"rowz\": 3, ")),
                  std::invalid_argument);
  // inside training
  CHECK_THROWS_AS(
      parse_experiment_config(inject("\"epochs\"", "\"epoch\": 2, ")),
      std::invalid_argument);
  // inside test
  CHECK_THROWS_AS(
      parse_experiment_config(inject("\"count\"", "\"shiftz\": [], ")),
      std::invalid_argument);

  // unknown oracle name
  std::string bad_oracle = base;
  const std::size_t at = bad_oracle.find("analytic");
  bad_oracle.replace(at, 8, "exactly");
  CHECK_THROWS_AS(parse_experiment_config(bad_oracle), std::invalid_argument);
}

TEST_CASE("the factorized likelihood mode refuses ordered series") {
  const std::string cfg = R"({
    "experiment": "ar",
    "mode": "nlpe",
    "model": {"transitions": 15},
    "training": {"epochs": 2, "steps_per_epoch": 2, "batch_size": 8},
    "test": {"count": 2},
    "oracles": ["bridge"]
  })";
  CHECK_THROWS_WITH_AS(parse_experiment_config(cfg),
                       doctest::Contains("not exchangeable"),
                       std::invalid_argument);
}

TEST_CASE("command line surface") {
  namespace fs = std::filesystem;
  fs::remove_all("cli_harness_out");

  SUBCASE("help exits cleanly") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("experiment --help") == 0);
  }

  SUBCASE("bad invocations exit with a usage error") {
    CHECK(run_cli("swim") == 2);
    CHECK(run_cli("experiment") == 2);  // --config is required
    CHECK(run_cli("experiment --config does_not_exist.json") == 2);
  }

  SUBCASE("a failing run exits one and names the stage") {
    std::ofstream("cli_bad_config.json")
        << R"({"experiment": "gaussian", "bogus": 1})";
    CHECK(run_cli("experiment --config cli_bad_config.json") == 1);
    const std::string err = slurp("cli_stderr.txt");
    CHECK(err.find("abmc experiment:") != std::string::npos);
    std::remove("cli_bad_config.json");
  }

  SUBCASE("a tiny run is reproducible byte for byte") {
    std::ofstream("cli_tiny_config.json") << R"({
      "experiment": "gaussian",
      "mode": "npe",
      "model": {"dim": 1, "rows": 4},
      "training": {"epochs": 2, "steps_per_epoch": 2, "batch_size": 8},
      "test": {"count": 2},
      "oracles": ["analytic"],
      "estimate_draws": 8,
      "out": "cli_harness_out",
      "seed": 7
    })";
    REQUIRE(run_cli("experiment --config cli_tiny_config.json") == 0);
    const std::string first = slurp("cli_harness_out/report.csv");
    const std::string first_scatter = slurp("cli_harness_out/scatter.csv");
    REQUIRE(run_cli("experiment --config cli_tiny_config.json") == 0);
    CHECK(slurp("cli_harness_out/report.csv") == first);
    CHECK(slurp("cli_harness_out/scatter.csv") == first_scatter);

    // the report subcommand aggregates without a pairing error
    CHECK(run_cli("report --config cli_tiny_config.json") == 0);
    CHECK(fs::exists("cli_harness_out/aggregates.csv"));
    CHECK(fs::exists("cli_harness_out/deltas.csv"));

    std::remove("cli_tiny_config.json");
    fs::remove_all("cli_harness_out");
  }

  std::remove("cli_stdout.txt");
  std::remove("cli_stderr.txt");
}
