#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "abmc/models.hpp"
#include "abmc/report.hpp"
#include "abmc/training.hpp"

namespace abmc {

enum class ExperimentKind { kGaussian, kDiffusion, kAr };
enum class SurrogateMode { kNpe, kNlpe };

struct ScSpec {
  std::size_t count = 0;  // 0 disables the SC variant's penalty entirely
  double shift = 5.0;     // OOD recipe parameter (family-specific)
  LambdaSchedule schedule;
  std::size_t s_train = 16;
  std::size_t max_per_step = 32;
};

struct TestSpec {
  std::size_t count = 64;
  std::vector<double> shifts = {0.0};  // gaussian data means; ar OOD captured
                                       // by sc.shift; unused for diffusion
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::kGaussian;
  SurrogateMode mode = SurrogateMode::kNpe;
  ScSpec sc;
  TrainingConfig training;
  GaussianConfig gaussian;
  RaceConfig race;
  ArConfig ar;  // variant field ignored: all four variants run
  TestSpec test;
  std::vector<std::string> oracles;
  std::size_t estimate_draws = 128;
  std::string out = "out";
  std::uint64_t seed = 1;
  int jobs = 1;
};

// Strict parse: unknown keys anywhere are an error.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// Canonical serialized form (stable across reruns; used for echo + hashing).
std::string config_echo(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::vector<ReportRow> rows;
  std::vector<ScatterRow> scatter;
};

// Candidate models of the configured family (diffusion: shared + split
// boundary; ar: all four variants).
std::vector<std::unique_ptr<GenerativeModel>> experiment_models(
    const ExperimentConfig& cfg);

// Deterministic test and SC sets for the configured family; ids encode the
// generating condition ("mu5_003", "m0_011", "ood_002", "indist_007").
void experiment_datasets(
    const ExperimentConfig& cfg,
    const std::vector<std::unique_ptr<GenerativeModel>>& models,
    std::vector<Dataset>& test_sets, std::vector<Dataset>& sc_sets);

// Partial pipelines backing the CLI subcommands. Each writes its artifacts
// under cfg.out plus a manifest; estimate/oracle merge their rows into any
// existing report.csv (replacing rows of the same methods) so the staged
// path train -> estimate -> oracle -> report composes.
void run_simulate(const ExperimentConfig& cfg);   // datasets -> out/data/
void run_train(const ExperimentConfig& cfg);      // checkpoints + traces
ExperimentResult run_estimate(const ExperimentConfig& cfg);  // needs checkpoints
ExperimentResult run_oracle(const ExperimentConfig& cfg);

// Full pipeline: train plain and SC variants of every model in the family,
// build test sets, run surrogate estimates and configured oracles, and write
// report/scatter/trace/checkpoint/manifest artifacts under cfg.out.
// Stage failures rethrow with the stage name; artifacts written so far stay.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace abmc
