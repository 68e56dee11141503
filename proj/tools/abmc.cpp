// Command-line front end: simulate / train / estimate / oracle / report /
// experiment, all driven by one JSON config. Exit 0 on success, 1 on a stage
// failure (message names the stage), 2 on usage errors.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "abmc/experiment.hpp"
#include "abmc/report.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "JSON experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", args.seed, "override the config seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  sub->add_option("--out", args.out, "override the output directory");
  sub->add_option("--jobs", args.jobs,
                  "parallel dataset evaluation bound (default: config)");
  sub->add_flag("--quiet", args.quiet, "suppress progress output");
}

abmc::ExperimentConfig resolve(const CommonArgs& args) {
  abmc::ExperimentConfig cfg = abmc::load_experiment_config(args.config);
  if (args.seed_set) cfg.seed = args.seed;
  if (!args.out.empty()) cfg.out = args.out;
  if (args.jobs > 0) cfg.jobs = args.jobs;
  return cfg;
}

std::string group_of(const std::string& dataset_id) {
  const auto pos = dataset_id.rfind('_');
  return pos == std::string::npos ? dataset_id : dataset_id.substr(0, pos);
}

// Aggregate an existing report.csv: per-group RMSE cells against the first
// configured oracle, plus per-group SC-minus-plain RMSE deltas.
void do_report(const abmc::ExperimentConfig& cfg, bool quiet) {
  const std::string path = cfg.out + "/report.csv";
  const std::vector<abmc::ReportRow> rows = abmc::read_report_csv(path);
  if (cfg.oracles.empty())
    throw std::invalid_argument(
        "config: report aggregation needs at least one oracle");
  const std::string truth = cfg.oracles.front();

  const std::vector<abmc::RmseCell> cells = abmc::aggregate_rmse(rows, truth);
  abmc::write_aggregate_csv(cells, cfg.out + "/aggregates.csv");
  if (!quiet) {
    for (const abmc::RmseCell& c : cells)
      std::printf("rmse  group=%s model=%s method=%s  %.6f  (n=%zu)\n",
                  c.group.c_str(), c.model.c_str(), c.method.c_str(), c.rmse,
                  c.count);
  }

  const std::string base =
      cfg.mode == abmc::SurrogateMode::kNpe ? "npe" : "nlpe";
  const std::string base_sc = base + "_sc";
  bool any_pair = false;
  for (const abmc::ReportRow& r : rows)
    if (r.method == base || r.method == base_sc) any_pair = true;
  if (any_pair) {
    std::set<std::string> groups;
    for (const abmc::ReportRow& r : rows) groups.insert(group_of(r.dataset_id));
    std::FILE* f = std::fopen((cfg.out + "/deltas.csv").c_str(), "w");
    if (!f) throw std::runtime_error("cannot write deltas.csv");
    std::fprintf(f, "group,method_sc,method_plain,truth,delta_rmse\n");
    for (const std::string& g : groups) {
      std::vector<abmc::ReportRow> in_group;
      for (const abmc::ReportRow& r : rows)
        if (group_of(r.dataset_id) == g) in_group.push_back(r);
      double delta;
      try {
        delta = abmc::delta_rmse(in_group, base_sc, base, truth);
      } catch (...) {
        std::fclose(f);
        throw;
      }
      std::fprintf(f, "%s,%s,%s,%s,%.17g\n", g.c_str(), base_sc.c_str(),
                   base.c_str(), truth.c_str(), delta);
      if (!quiet)
        std::printf("delta_rmse  group=%s  %s - %s vs %s  %.6f\n", g.c_str(),
                    base_sc.c_str(), base.c_str(), truth.c_str(), delta);
    }
    std::fclose(f);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation-based model comparison workbench"};
  app.require_subcommand(1);

  CommonArgs args;
  const std::vector<std::string> names = {"simulate", "train",  "estimate",
                                          "oracle",   "report", "experiment"};
  const std::vector<std::string> descriptions = {
      "generate and write the configured test/SC datasets",
      "train plain and SC surrogate variants, write checkpoints + traces",
      "evidence estimates from existing checkpoints, merged into report.csv",
      "run the configured oracles, merged into report.csv",
      "aggregate RMSE and SC deltas from an existing report.csv",
      "full pipeline: train, estimate, oracles, reports"};
  for (std::size_t i = 0; i < names.size(); ++i)
    add_common(app.add_subcommand(names[i], descriptions[i]), args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;  // unknown subcommand/flag, missing argument: usage error
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    const abmc::ExperimentConfig cfg = resolve(args);
    if (sub == "simulate") {
      abmc::run_simulate(cfg);
      if (!args.quiet)
        std::printf("wrote datasets under %s/data\n", cfg.out.c_str());
    } else if (sub == "train") {
      abmc::run_train(cfg);
      if (!args.quiet)
        std::printf("wrote checkpoints and traces under %s\n",
                    cfg.out.c_str());
    } else if (sub == "estimate") {
      const abmc::ExperimentResult r = abmc::run_estimate(cfg);
      if (!args.quiet)
        std::printf("estimated %zu rows -> %s/report.csv\n", r.rows.size(),
                    cfg.out.c_str());
    } else if (sub == "oracle") {
      const abmc::ExperimentResult r = abmc::run_oracle(cfg);
      if (!args.quiet)
        std::printf("oracle %zu rows -> %s/report.csv\n", r.rows.size(),
                    cfg.out.c_str());
    } else if (sub == "report") {
      do_report(cfg, args.quiet);
    } else {
      const abmc::ExperimentResult r = abmc::run_experiment(cfg);
      if (!args.quiet)
        std::printf("experiment complete: %zu report rows under %s\n",
                    r.rows.size(), cfg.out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "abmc %s: %s\n", sub.c_str(), e.what());
    return 1;
  }
  return 0;
}
