#pragma once

#include <memory>
#include <string>
#include <vector>

#include "abmc/dataset.hpp"
#include "abmc/nn.hpp"
#include "abmc/optimizer.hpp"
#include "abmc/summary.hpp"

namespace abmc {

struct ClassifierConfig {
  std::size_t num_models = 2;
  std::size_t obs_cols = 1;
  std::size_t context_dim = 0;
  DeepSetConfig deepset;
  std::size_t trunk_hidden = 64;
  Act trunk_activation = Act::kSilu;
};

// K-way model-posterior surrogate: deep-set summary, one dense trunk, and a
// zero-initialized softmax head (uniform over models before training).
class ModelClassifier {
 public:
  ModelClassifier(const ClassifierConfig& cfg, std::uint64_t init_seed);

  std::size_t num_models() const { return cfg_.num_models; }
  const ClassifierConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Rowwise log q(M | y): one row of K log-probabilities per dataset.
  Tensor log_probs_graph(const std::vector<const Dataset*>& batch) const;
  std::vector<double> log_probs(const Dataset& data) const;

 private:
  ClassifierConfig cfg_;
  ParamStore params_;
  std::unique_ptr<DeepSetSummary> summary_;
  Dense trunk_;
  Dense head_;
};

// Probability vector over the K candidate models for one dataset.
std::vector<double> classifier_pmps(const ModelClassifier& clf,
                                    const Dataset& data);

}  // namespace abmc
