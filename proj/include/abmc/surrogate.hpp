#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "abmc/dataset.hpp"
#include "abmc/flow.hpp"
#include "abmc/models.hpp"
#include "abmc/optimizer.hpp"
#include "abmc/rng.hpp"
#include "abmc/summary.hpp"

namespace abmc {

// Conditional density over the parameter vector given a dataset.
class PosteriorDensity {
 public:
  virtual ~PosteriorDensity() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::pair<std::vector<double>, double>>
  sample_with_log_prob(const Dataset& data, std::size_t count,
                       Rng& rng) const = 0;
  virtual double log_prob(const Dataset& data,
                          const std::vector<double>& theta) const = 0;
};

// Density of a dataset given the parameter vector.
class LikelihoodDensity {
 public:
  virtual ~LikelihoodDensity() = default;
  virtual double log_prob(const Dataset& data,
                          const std::vector<double>& theta) const = 0;
};

// --------------------------------------------------------------------------

struct FlowPosteriorConfig {
  std::size_t theta_dim = 1;
  std::size_t obs_cols = 1;
  std::size_t context_dim = 0;
  bool recurrent_summary = false;  // ordered series use the recurrent encoder
  DeepSetConfig deepset;
  GruConfig gru;
  FlowConfig flow;
};

// Posterior surrogate: summary network feeding a conditional coupling flow.
// Owns its parameters. The tensor-level methods build differentiable graphs
// when a tape is active; the interface methods evaluate plain values.
class FlowPosterior : public PosteriorDensity {
 public:
  FlowPosterior(const FlowPosteriorConfig& cfg, std::uint64_t init_seed);

  std::size_t dim() const override { return cfg_.theta_dim; }
  std::size_t condition_dim() const;
  const FlowPosteriorConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const SummaryNet& summary() const { return *summary_; }
  const ConditionalFlow& flow() const { return *flow_; }

  // Summary batch [B, summary_out]; graph when a tape is active.
  Tensor summary_batch(const std::vector<const Dataset*>& batch) const;
  // Conditioning rows: summaries with any dataset context columns appended.
  Tensor conditions_from(const Tensor& summaries,
                         const std::vector<const Dataset*>& batch) const;
  Tensor condition(const Dataset& data) const;

  // log q(theta | cond) rowwise: theta [B,d], cond [B,c] -> [B,1].
  Tensor log_prob_graph(const Tensor& theta, const Tensor& cond) const;
  // Reparametrized draws from base noise z [S,d] with their log-densities.
  std::pair<Tensor, Tensor> sample_graph(const Tensor& z,
                                         const Tensor& cond) const;

  std::vector<std::pair<std::vector<double>, double>> sample_with_log_prob(
      const Dataset& data, std::size_t count, Rng& rng) const override;
  double log_prob(const Dataset& data,
                  const std::vector<double>& theta) const override;

  void save(const std::string& path) const;
  static std::unique_ptr<FlowPosterior> load(const std::string& path);

 private:
  FlowPosteriorConfig cfg_;
  ParamStore params_;
  std::unique_ptr<SummaryNet> summary_;
  std::unique_ptr<ConditionalFlow> flow_;
};

// --------------------------------------------------------------------------

struct FlowLikelihoodConfig {
  std::size_t theta_dim = 1;
  std::size_t obs_cols = 1;
  std::vector<std::size_t> modeled_cols = {0};  // columns the flow models
  std::vector<std::size_t> cov_cols = {};       // per-row conditioning columns
  FlowConfig flow;
};

// Likelihood surrogate for exchangeable data: one flow over a single
// observation row, conditioned on theta (and any per-row covariate columns);
// the dataset log-density is the sum over rows.
class FlowLikelihood : public LikelihoodDensity {
 public:
  FlowLikelihood(const FlowLikelihoodConfig& cfg, std::uint64_t init_seed);

  const FlowLikelihoodConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ConditionalFlow& flow() const { return *flow_; }

  // Mean over the batch of -log q(y_b | theta_b), one stacked flow pass.
  Tensor batch_loss(const std::vector<Draw>& batch) const;
  // Dataset log-density for each sampled theta row: theta [S,d] -> [S,1].
  Tensor log_prob_dataset_graph(const Dataset& data,
                                const Tensor& theta) const;

  double log_prob(const Dataset& data,
                  const std::vector<double>& theta) const override;

  void save(const std::string& path) const;
  static std::unique_ptr<FlowLikelihood> load(const std::string& path);

 private:
  FlowLikelihoodConfig cfg_;
  ParamStore params_;
  std::unique_ptr<ConditionalFlow> flow_;
};

// --------------------------------------------------------------------------

// Analytic conjugate posterior of the Gaussian location model.
class ExactPosteriorStub : public PosteriorDensity {
 public:
  explicit ExactPosteriorStub(const GaussianLocationModel& model)
      : model_(model) {}
  std::size_t dim() const override { return model_.dim(); }
  std::vector<std::pair<std::vector<double>, double>> sample_with_log_prob(
      const Dataset& data, std::size_t count, Rng& rng) const override;
  double log_prob(const Dataset& data,
                  const std::vector<double>& theta) const override;

 private:
  const GaussianLocationModel& model_;
};

// Exact model likelihood behind the surrogate interface.
class ExactLikelihoodStub : public LikelihoodDensity {
 public:
  explicit ExactLikelihoodStub(const GenerativeModel& model) : model_(model) {}
  double log_prob(const Dataset& data,
                  const std::vector<double>& theta) const override {
    return model_.likelihood_log_density(data, theta);
  }

 private:
  const GenerativeModel& model_;
};

// log q = scale * log p + offset; deliberately miscalibrated for tests.
class BiasedLikelihood : public LikelihoodDensity {
 public:
  BiasedLikelihood(const LikelihoodDensity& base, double scale, double offset)
      : base_(base), scale_(scale), offset_(offset) {}
  double log_prob(const Dataset& data,
                  const std::vector<double>& theta) const override {
    return scale_ * base_.log_prob(data, theta) + offset_;
  }

 private:
  const LikelihoodDensity& base_;
  double scale_, offset_;
};

// --------------------------------------------------------------------------

double flow_log_prob(const FlowPosterior& q, const std::vector<double>& theta,
                     const Dataset& data);
std::vector<std::pair<std::vector<double>, double>> flow_sample(
    const FlowPosterior& q, const Dataset& data, std::size_t count, Rng& rng);
Tensor summarize(const SummaryNet& net, const Tensor& obs);

}  // namespace abmc
