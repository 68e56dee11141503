#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "abmc/classifier.hpp"
#include "abmc/dataset.hpp"
#include "abmc/models.hpp"
#include "abmc/surrogate.hpp"

namespace abmc {

// SC weight warm-up: 0 through zero_until, linear to 1 at ramp_end, 1 after.
// Epochs are 1-indexed.
struct LambdaSchedule {
  std::size_t zero_until = 20;
  std::size_t ramp_end = 30;

  void validate() const;
  double operator()(std::size_t epoch) const;
};

struct SCConfig {
  std::vector<Dataset> datasets;  // unlabeled, typically observed/OOD
  LambdaSchedule schedule;
  std::size_t s_train = 16;      // surrogate draws per SC term
  std::size_t max_per_step = 32;  // larger pools are subsampled w/o replacement
};

enum class TrainMode { kOnline, kOffline };

struct TrainingConfig {
  TrainMode mode = TrainMode::kOnline;
  std::size_t epochs = 50;
  std::size_t steps_per_epoch = 64;  // offline: 0 picks budget/batch_size
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t simulation_budget = 1024;  // offline table size
  std::uint64_t seed = 1;
  bool mmd_on_summaries = false;
  double l2_coefficient = 0.0;
  std::size_t dataset_rows = 0;  // 0 = model default
  std::size_t checkpoint_every = 0;
  std::string checkpoint_path;
};

struct TraceRow {
  std::size_t epoch = 0;
  double base_loss = 0.0;
  double sc_loss = 0.0;  // raw variance term, before the lambda weight
  double mmd_loss = 0.0;
  double lambda = 0.0;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  std::uint64_t table_hash = 0;  // offline simulation table; 0 when online
};

struct TrainSetup {
  FlowPosterior* posterior = nullptr;
  FlowLikelihood* likelihood = nullptr;  // present -> joint NLPE objective
  const GenerativeModel* model = nullptr;
};

// ---------------------------------------------------------------- losses

// Mean over the batch of -log q(theta | y). Plain evaluation, no penalty.
double npe_loss(const PosteriorDensity& q, const std::vector<Draw>& batch);

// npe_loss plus the mean of -log q_psi(y | theta).
double nlpe_loss(const PosteriorDensity& q, const LikelihoodDensity& lik,
                 const std::vector<Draw>& batch);

// Sample variance over draws theta_s ~ q(.|y) of
// log prior(theta_s) + log_lik(y, theta_s) - log q(theta_s | y).
double sc_variance_term(
    const PosteriorDensity& q,
    const std::function<double(const Dataset&, const std::vector<double>&)>&
        log_lik,
    const GenerativeModel& prior_model, const Dataset& data,
    std::size_t s_train, Rng& rng);

// Dataset log-density for a [S,dim] block of theta rows -> [S,1].
using GraphLikelihood =
    std::function<Tensor(const Dataset&, const Tensor& theta)>;

// Differentiable SC term: draws reparametrized through the flow from the
// given base noise z [S,dim]; cond is the dataset's conditioning row [1,c].
Tensor sc_variance_graph(const FlowPosterior& q, const GraphLikelihood& log_lik,
                         const GenerativeModel& prior_model,
                         const Dataset& data, const Tensor& cond,
                         const Tensor& z);

// Cross-entropy over the labeled batch plus lambda times the mean over SC
// datasets of the variance over models of
// log p(M_k) + log p(y|M_k) - log q(M_k|y).
double classifier_sc_objective(
    const ModelClassifier& clf,
    const std::vector<std::pair<const Dataset*, std::size_t>>& labeled,
    const std::vector<Dataset>& sc_datasets,
    const std::vector<std::function<double(const Dataset&)>>& log_marginal_fns,
    const std::vector<double>& prior_model_probs, double lambda);

// Differentiable form of the same objective.
Tensor classifier_sc_objective_graph(
    const ModelClassifier& clf, const std::vector<const Dataset*>& batch,
    const std::vector<std::size_t>& labels,
    const std::vector<Dataset>& sc_datasets,
    const std::vector<std::function<double(const Dataset&)>>& log_marginal_fns,
    const std::vector<double>& prior_model_probs, double lambda);

// ---------------------------------------------------------------- loops

TrainResult train(const TrainSetup& setup, const TrainingConfig& cfg,
                  const SCConfig& sc);

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::string& path);

// FNV-1a over the table's theta/context/observation bytes.
std::uint64_t simulation_table_hash(const std::vector<Draw>& table);

}  // namespace abmc
