#include "abmc/classifier.hpp"

#include <cmath>
#include <stdexcept>

namespace abmc {

ModelClassifier::ModelClassifier(const ClassifierConfig& cfg,
                                 std::uint64_t init_seed)
    : cfg_(cfg) {
  if (cfg_.num_models < 2)
    throw std::invalid_argument("classifier: need at least two models");
  Rng rng = stream_rng(init_seed, "init");
  summary_ = std::make_unique<DeepSetSummary>(params_, "summary",
                                              cfg_.obs_cols, cfg_.deepset,
                                              rng);
  trunk_ = make_dense(params_, "trunk",
                      summary_->out_dim() + cfg_.context_dim,
                      cfg_.trunk_hidden, rng);
  head_ = make_dense_zero(params_, "head", cfg_.trunk_hidden, cfg_.num_models);
}

Tensor ModelClassifier::log_probs_graph(
    const std::vector<const Dataset*>& batch) const {
  if (batch.empty())
    throw std::invalid_argument("log_probs_graph: empty batch");
  std::vector<Tensor> obs;
  obs.reserve(batch.size());
  for (const Dataset* d : batch) {
    if (d->context.size() != cfg_.context_dim)
      throw std::invalid_argument(
          "log_probs_graph: dataset context width mismatch");
    obs.push_back(d->obs);
  }
  Tensor cond = summary_->summarize_batch(obs);
  if (cfg_.context_dim > 0) {
    Tensor ctx(batch.size(), cfg_.context_dim);
    for (std::size_t b = 0; b < batch.size(); ++b)
      for (std::size_t j = 0; j < cfg_.context_dim; ++j)
        ctx.at(b, j) = batch[b]->context[j];
    cond = ops::concat_cols({cond, ctx});
  }
  Tensor h = activate(trunk_(cond), cfg_.trunk_activation);
  return ops::log_softmax_rows(head_(h));
}

std::vector<double> ModelClassifier::log_probs(const Dataset& data) const {
  std::vector<const Dataset*> one{&data};
  Tensor lp = log_probs_graph(one);
  std::vector<double> out(cfg_.num_models);
  for (std::size_t k = 0; k < cfg_.num_models; ++k) out[k] = lp.at(0, k);
  return out;
}

std::vector<double> classifier_pmps(const ModelClassifier& clf,
                                    const Dataset& data) {
  std::vector<double> p = clf.log_probs(data);
  for (double& v : p) v = std::exp(v);
  return p;
}

}  // namespace abmc
