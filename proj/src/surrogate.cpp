#include "abmc/surrogate.hpp"

#include <cmath>
#include <stdexcept>

#include "abmc/checkpoint.hpp"
#include "abmc/stats.hpp"

namespace abmc {

namespace {

nlohmann::json flow_meta(const FlowConfig& f) {
  return {{"layers", f.layers},
          {"hidden", f.hidden},
          {"activation", act_name(f.activation)}};
}

FlowConfig flow_from_meta(const nlohmann::json& m) {
  FlowConfig f;
  f.layers = m.at("layers").get<std::size_t>();
  f.hidden = m.at("hidden").get<std::size_t>();
  f.activation = act_from_name(m.at("activation").get<std::string>());
  return f;
}

}  // namespace

// -------------------------------------------------------------- FlowPosterior

FlowPosterior::FlowPosterior(const FlowPosteriorConfig& cfg,
                             std::uint64_t init_seed)
    : cfg_(cfg) {
  Rng rng = stream_rng(init_seed, "init");
  if (cfg_.recurrent_summary)
    summary_ = std::make_unique<GruSummary>(params_, "summary", cfg_.obs_cols,
                                            cfg_.gru, rng);
  else
    summary_ = std::make_unique<DeepSetSummary>(params_, "summary",
                                                cfg_.obs_cols, cfg_.deepset,
                                                rng);
  flow_ = std::make_unique<ConditionalFlow>(params_, "flow", cfg_.theta_dim,
                                            condition_dim(), cfg_.flow, rng);
}

std::size_t FlowPosterior::condition_dim() const {
  return summary_->out_dim() + cfg_.context_dim;
}

Tensor FlowPosterior::summary_batch(
    const std::vector<const Dataset*>& batch) const {
  if (batch.empty())
    throw std::invalid_argument("summary_batch: empty batch");
  std::vector<Tensor> obs;
  obs.reserve(batch.size());
  for (const Dataset* d : batch) obs.push_back(d->obs);
  return summary_->summarize_batch(obs);
}

Tensor FlowPosterior::conditions_from(
    const Tensor& summaries, const std::vector<const Dataset*>& batch) const {
  for (const Dataset* d : batch)
    if (d->context.size() != cfg_.context_dim)
      throw std::invalid_argument(
          "conditions_from: dataset context width mismatch");
  if (cfg_.context_dim == 0) return summaries;
  Tensor ctx(batch.size(), cfg_.context_dim);
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t j = 0; j < cfg_.context_dim; ++j)
      ctx.at(b, j) = batch[b]->context[j];
  return ops::concat_cols({summaries, ctx});
}

Tensor FlowPosterior::condition(const Dataset& data) const {
  std::vector<const Dataset*> one{&data};
  return conditions_from(summary_batch(one), one);
}

Tensor FlowPosterior::log_prob_graph(const Tensor& theta,
                                     const Tensor& cond) const {
  return flow_->log_prob(theta, cond);
}

std::pair<Tensor, Tensor> FlowPosterior::sample_graph(const Tensor& z,
                                                      const Tensor& cond)
    const {
  return flow_->forward_with_log_prob(z, cond);
}

std::vector<std::pair<std::vector<double>, double>>
FlowPosterior::sample_with_log_prob(const Dataset& data, std::size_t count,
                                    Rng& rng) const {
  if (count == 0)
    throw std::invalid_argument("sample_with_log_prob: count must be >= 1");
  Tensor z(count, cfg_.theta_dim);
  for (double& v : z.data()) v = rng.normal();
  Tensor cond = ops::repeat_rows(condition(data), count);
  auto [x, lq] = flow_->forward_with_log_prob(z, cond);
  std::vector<std::pair<std::vector<double>, double>> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> theta(cfg_.theta_dim);
    for (std::size_t j = 0; j < cfg_.theta_dim; ++j) theta[j] = x.at(s, j);
    out.emplace_back(std::move(theta), lq.at(s, 0));
  }
  return out;
}

double FlowPosterior::log_prob(const Dataset& data,
                               const std::vector<double>& theta) const {
  if (theta.size() != cfg_.theta_dim)
    throw std::invalid_argument("log_prob: theta dimension mismatch");
  Tensor th = Tensor::row(theta);
  return flow_->log_prob(th, condition(data)).item();
}

void FlowPosterior::save(const std::string& path) const {
  nlohmann::json meta;
  meta["kind"] = "flow_posterior";
  meta["theta_dim"] = cfg_.theta_dim;
  meta["obs_cols"] = cfg_.obs_cols;
  meta["context_dim"] = cfg_.context_dim;
  if (cfg_.recurrent_summary) {
    meta["summary"] = {{"variant", "recurrent"},
                       {"hidden", cfg_.gru.hidden},
                       {"dense", cfg_.gru.dense},
                       {"out", cfg_.gru.out},
                       {"activation", act_name(cfg_.gru.activation)}};
  } else {
    meta["summary"] = {{"variant", "deepset"},
                       {"eq_hidden", cfg_.deepset.eq_hidden},
                       {"inv_hidden", cfg_.deepset.inv_hidden},
                       {"out", cfg_.deepset.out},
                       {"activation", act_name(cfg_.deepset.activation)}};
  }
  meta["flow"] = flow_meta(cfg_.flow);
  save_checkpoint(params_, meta, path);
}

std::unique_ptr<FlowPosterior> FlowPosterior::load(const std::string& path) {
  const nlohmann::json doc = read_checkpoint(path);
  const nlohmann::json& meta = doc.at("meta");
  if (meta.at("kind").get<std::string>() != "flow_posterior")
    throw std::runtime_error("load: " + path + " is not a posterior surrogate");
  FlowPosteriorConfig cfg;
  cfg.theta_dim = meta.at("theta_dim").get<std::size_t>();
  cfg.obs_cols = meta.at("obs_cols").get<std::size_t>();
  cfg.context_dim = meta.at("context_dim").get<std::size_t>();
  const nlohmann::json& s = meta.at("summary");
  if (s.at("variant").get<std::string>() == "recurrent") {
    cfg.recurrent_summary = true;
    cfg.gru.hidden = s.at("hidden").get<std::size_t>();
    cfg.gru.dense = s.at("dense").get<std::size_t>();
    cfg.gru.out = s.at("out").get<std::size_t>();
    cfg.gru.activation = act_from_name(s.at("activation").get<std::string>());
  } else {
    cfg.deepset.eq_hidden = s.at("eq_hidden").get<std::size_t>();
    cfg.deepset.inv_hidden = s.at("inv_hidden").get<std::size_t>();
    cfg.deepset.out = s.at("out").get<std::size_t>();
    cfg.deepset.activation =
        act_from_name(s.at("activation").get<std::string>());
  }
  cfg.flow = flow_from_meta(meta.at("flow"));
  auto q = std::make_unique<FlowPosterior>(cfg, 0);
  load_params(q->params_, doc);
  return q;
}

// ------------------------------------------------------------ FlowLikelihood

FlowLikelihood::FlowLikelihood(const FlowLikelihoodConfig& cfg,
                               std::uint64_t init_seed)
    : cfg_(cfg) {
  if (cfg_.modeled_cols.empty())
    throw std::invalid_argument("likelihood flow: no modeled columns");
  for (std::size_t c : cfg_.modeled_cols)
    if (c >= cfg_.obs_cols)
      throw std::invalid_argument("likelihood flow: modeled column out of range");
  for (std::size_t c : cfg_.cov_cols)
    if (c >= cfg_.obs_cols)
      throw std::invalid_argument("likelihood flow: covariate column out of range");
  Rng rng = stream_rng(init_seed, "init");
  flow_ = std::make_unique<ConditionalFlow>(
      params_, "flow", cfg_.modeled_cols.size(),
      cfg_.theta_dim + cfg_.cov_cols.size(), cfg_.flow, rng);
}

Tensor FlowLikelihood::batch_loss(const std::vector<Draw>& batch) const {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  std::size_t total = 0;
  for (const Draw& d : batch) total += d.data.obs.rows();
  const std::size_t m = cfg_.modeled_cols.size();
  const std::size_t cc = cfg_.cov_cols.size();
  Tensor x(total, m);
  Tensor cond(total, cfg_.theta_dim + cc);
  std::size_t r = 0;
  for (const Draw& d : batch) {
    if (d.theta.size() != cfg_.theta_dim)
      throw std::invalid_argument("batch_loss: theta dimension mismatch");
    for (std::size_t i = 0; i < d.data.obs.rows(); ++i, ++r) {
      for (std::size_t j = 0; j < m; ++j)
        x.at(r, j) = d.data.obs.at(i, cfg_.modeled_cols[j]);
      for (std::size_t j = 0; j < cfg_.theta_dim; ++j)
        cond.at(r, j) = d.theta[j];
      for (std::size_t j = 0; j < cc; ++j)
        cond.at(r, cfg_.theta_dim + j) = d.data.obs.at(i, cfg_.cov_cols[j]);
    }
  }
  Tensor lq = flow_->log_prob(x, cond);
  return ops::scale(ops::sum(lq), -1.0 / static_cast<double>(batch.size()));
}

Tensor FlowLikelihood::log_prob_dataset_graph(const Dataset& data,
                                              const Tensor& theta) const {
  if (!data.obs.defined() || data.obs.rows() == 0)
    throw std::invalid_argument("log_prob_dataset_graph: empty dataset");
  if (theta.cols() != cfg_.theta_dim)
    throw std::invalid_argument("log_prob_dataset_graph: theta width mismatch");
  const std::size_t s = theta.rows();
  const std::size_t n = data.obs.rows();
  const std::size_t m = cfg_.modeled_cols.size();
  const std::size_t cc = cfg_.cov_cols.size();

  Tensor x(s * n, m);
  std::vector<std::size_t> rep(s * n);
  for (std::size_t si = 0; si < s; ++si)
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = si * n + i;
      rep[r] = si;
      for (std::size_t j = 0; j < m; ++j)
        x.at(r, j) = data.obs.at(i, cfg_.modeled_cols[j]);
    }
  Tensor cond = ops::gather_rows(theta, rep);
  if (cc > 0) {
    Tensor cov(s * n, cc);
    for (std::size_t si = 0; si < s; ++si)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cc; ++j)
          cov.at(si * n + i, j) = data.obs.at(i, cfg_.cov_cols[j]);
    cond = ops::concat_cols({cond, cov});
  }
  Tensor lq = flow_->log_prob(x, cond);  // [s*n, 1]

  // Sum each draw's rows with one grouping product.
  Tensor g(s, s * n);
  for (std::size_t si = 0; si < s; ++si)
    for (std::size_t i = 0; i < n; ++i) g.at(si, si * n + i) = 1.0;
  return ops::matmul(g, lq);
}

double FlowLikelihood::log_prob(const Dataset& data,
                                const std::vector<double>& theta) const {
  if (theta.size() != cfg_.theta_dim)
    throw std::invalid_argument("log_prob: theta dimension mismatch");
  Tensor th = Tensor::row(theta);
  return log_prob_dataset_graph(data, th).item();
}

void FlowLikelihood::save(const std::string& path) const {
  nlohmann::json meta;
  meta["kind"] = "flow_likelihood";
  meta["theta_dim"] = cfg_.theta_dim;
  meta["obs_cols"] = cfg_.obs_cols;
  meta["modeled_cols"] = cfg_.modeled_cols;
  meta["cov_cols"] = cfg_.cov_cols;
  meta["flow"] = flow_meta(cfg_.flow);
  save_checkpoint(params_, meta, path);
}

std::unique_ptr<FlowLikelihood> FlowLikelihood::load(const std::string& path) {
  const nlohmann::json doc = read_checkpoint(path);
  const nlohmann::json& meta = doc.at("meta");
  if (meta.at("kind").get<std::string>() != "flow_likelihood")
    throw std::runtime_error("load: " + path +
                             " is not a likelihood surrogate");
  FlowLikelihoodConfig cfg;
  cfg.theta_dim = meta.at("theta_dim").get<std::size_t>();
  cfg.obs_cols = meta.at("obs_cols").get<std::size_t>();
  cfg.modeled_cols =
      meta.at("modeled_cols").get<std::vector<std::size_t>>();
  cfg.cov_cols = meta.at("cov_cols").get<std::vector<std::size_t>>();
  cfg.flow = flow_from_meta(meta.at("flow"));
  auto q = std::make_unique<FlowLikelihood>(cfg, 0);
  load_params(q->params_, doc);
  return q;
}

// --------------------------------------------------------------------- stubs

std::vector<std::pair<std::vector<double>, double>>
ExactPosteriorStub::sample_with_log_prob(const Dataset& data,
                                         std::size_t count, Rng& rng) const {
  const auto [mean, sd] = model_.conjugate_posterior(data);
  std::vector<std::pair<std::vector<double>, double>> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> theta(mean.size());
    double lq = 0.0;
    for (std::size_t j = 0; j < mean.size(); ++j) {
      theta[j] = rng.normal(mean[j], sd);
      lq += normal_log_pdf(theta[j], mean[j], sd);
    }
    out.emplace_back(std::move(theta), lq);
  }
  return out;
}

double ExactPosteriorStub::log_prob(const Dataset& data,
                                    const std::vector<double>& theta) const {
  const auto [mean, sd] = model_.conjugate_posterior(data);
  if (theta.size() != mean.size())
    throw std::invalid_argument("log_prob: theta dimension mismatch");
  double lq = 0.0;
  for (std::size_t j = 0; j < mean.size(); ++j)
    lq += normal_log_pdf(theta[j], mean[j], sd);
  return lq;
}

// ------------------------------------------------------------ free functions

double flow_log_prob(const FlowPosterior& q, const std::vector<double>& theta,
                     const Dataset& data) {
  return q.log_prob(data, theta);
}

std::vector<std::pair<std::vector<double>, double>> flow_sample(
    const FlowPosterior& q, const Dataset& data, std::size_t count, Rng& rng) {
  return q.sample_with_log_prob(data, count, rng);
}

Tensor summarize(const SummaryNet& net, const Tensor& obs) {
  return net.summarize(obs);
}

}  // namespace abmc
