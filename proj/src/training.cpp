#include "abmc/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "abmc/mmd.hpp"
#include "abmc/stats.hpp"

namespace abmc {

void LambdaSchedule::validate() const {
  if (ramp_end < zero_until)
    throw std::invalid_argument(
        "lambda schedule: ramp must not end before the zero phase does");
}

double LambdaSchedule::operator()(std::size_t epoch) const {
  if (epoch <= zero_until) return 0.0;
  if (epoch >= ramp_end) return 1.0;
  return static_cast<double>(epoch - zero_until) /
         static_cast<double>(ramp_end - zero_until);
}

// ------------------------------------------------------------------ losses

double npe_loss(const PosteriorDensity& q, const std::vector<Draw>& batch) {
  if (batch.empty()) throw std::invalid_argument("npe_loss: empty batch");
  double total = 0.0;
  for (const Draw& d : batch) total -= q.log_prob(d.data, d.theta);
  return total / static_cast<double>(batch.size());
}

double nlpe_loss(const PosteriorDensity& q, const LikelihoodDensity& lik,
                 const std::vector<Draw>& batch) {
  if (batch.empty()) throw std::invalid_argument("nlpe_loss: empty batch");
  double like = 0.0;
  for (const Draw& d : batch) like -= lik.log_prob(d.data, d.theta);
  return npe_loss(q, batch) + like / static_cast<double>(batch.size());
}

double sc_variance_term(
    const PosteriorDensity& q,
    const std::function<double(const Dataset&, const std::vector<double>&)>&
        log_lik,
    const GenerativeModel& prior_model, const Dataset& data,
    std::size_t s_train, Rng& rng) {
  if (s_train < 2)
    throw std::invalid_argument(
        "sc_variance_term: variance needs at least two draws");
  const auto draws = q.sample_with_log_prob(data, s_train, rng);
  std::vector<double> terms;
  terms.reserve(s_train);
  for (const auto& [theta, lq] : draws) {
    const double t = prior_model.prior_log_density(theta, data.context) +
                     log_lik(data, theta) - lq;
    if (!std::isfinite(t))
      throw NumericalFailure("self-consistency term for dataset '" + data.id +
                             "' is not finite");
    terms.push_back(t);
  }
  return variance_of(terms);
}

Tensor sc_variance_graph(const FlowPosterior& q, const GraphLikelihood& log_lik,
                         const GenerativeModel& prior_model,
                         const Dataset& data, const Tensor& cond,
                         const Tensor& z) {
  if (z.rows() < 2)
    throw std::invalid_argument(
        "sc_variance_graph: variance needs at least two draws");
  if (z.cols() != q.dim())
    throw std::invalid_argument("sc_variance_graph: noise width mismatch");
  Tensor cond_rep = ops::repeat_rows(cond, z.rows());
  auto [theta, lq] = q.sample_graph(z, cond_rep);
  Tensor lp = prior_model.prior_log_density_graph(theta, data.context);
  Tensor ll = log_lik(data, theta);
  Tensor terms = ops::sub(ops::add(lp, ll), lq);
  return ops::variance(terms, 1);
}

// ------------------------------------------------------------ classifier

namespace {

void check_model_priors(const std::vector<double>& priors, std::size_t k) {
  if (priors.size() != k)
    throw std::invalid_argument("classifier objective: prior length mismatch");
  double total = 0.0;
  for (double p : priors) {
    if (!(p >= 0.0))
      throw std::invalid_argument(
          "classifier objective: negative model prior");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument(
        "classifier objective: model priors must sum to 1");
}

}  // namespace

double classifier_sc_objective(
    const ModelClassifier& clf,
    const std::vector<std::pair<const Dataset*, std::size_t>>& labeled,
    const std::vector<Dataset>& sc_datasets,
    const std::vector<std::function<double(const Dataset&)>>& log_marginal_fns,
    const std::vector<double>& prior_model_probs, double lambda) {
  const std::size_t k = clf.num_models();
  if (labeled.empty() && sc_datasets.empty())
    throw std::invalid_argument("classifier objective: nothing to score");
  double ce = 0.0;
  for (const auto& [data, label] : labeled) {
    if (label >= k)
      throw std::invalid_argument("classifier objective: label out of range");
    ce -= clf.log_probs(*data)[label];
  }
  if (!labeled.empty()) ce /= static_cast<double>(labeled.size());

  double sc = 0.0;
  if (lambda != 0.0 && !sc_datasets.empty()) {
    if (log_marginal_fns.size() != k)
      throw std::invalid_argument(
          "classifier objective: marginal evaluator missing for some model");
    check_model_priors(prior_model_probs, k);
    for (const Dataset& y : sc_datasets) {
      const std::vector<double> lq = clf.log_probs(y);
      std::vector<double> terms(k);
      for (std::size_t i = 0; i < k; ++i)
        terms[i] =
            std::log(prior_model_probs[i]) + log_marginal_fns[i](y) - lq[i];
      sc += variance_of(terms);
    }
    sc /= static_cast<double>(sc_datasets.size());
  }
  return ce + lambda * sc;
}

Tensor classifier_sc_objective_graph(
    const ModelClassifier& clf, const std::vector<const Dataset*>& batch,
    const std::vector<std::size_t>& labels,
    const std::vector<Dataset>& sc_datasets,
    const std::vector<std::function<double(const Dataset&)>>& log_marginal_fns,
    const std::vector<double>& prior_model_probs, double lambda) {
  const std::size_t k = clf.num_models();
  if (batch.size() != labels.size())
    throw std::invalid_argument("classifier objective: label count mismatch");
  if (batch.empty() && sc_datasets.empty())
    throw std::invalid_argument("classifier objective: nothing to score");

  Tensor total;
  if (!batch.empty()) {
    Tensor lp = clf.log_probs_graph(batch);
    Tensor onehot(batch.size(), k);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (labels[b] >= k)
        throw std::invalid_argument(
            "classifier objective: label out of range");
      onehot.at(b, labels[b]) = 1.0;
    }
    total = ops::scale(ops::sum(ops::mul(lp, onehot)),
                       -1.0 / static_cast<double>(batch.size()));
  }

  if (lambda != 0.0 && !sc_datasets.empty()) {
    if (log_marginal_fns.size() != k)
      throw std::invalid_argument(
          "classifier objective: marginal evaluator missing for some model");
    check_model_priors(prior_model_probs, k);
    std::vector<const Dataset*> scp;
    scp.reserve(sc_datasets.size());
    for (const Dataset& y : sc_datasets) scp.push_back(&y);
    Tensor lq = clf.log_probs_graph(scp);  // [M,K]
    Tensor scores(scp.size(), k);
    for (std::size_t m = 0; m < scp.size(); ++m)
      for (std::size_t i = 0; i < k; ++i)
        scores.at(m, i) =
            std::log(prior_model_probs[i]) + log_marginal_fns[i](*scp[m]);
    Tensor diff = ops::sub(scores, lq);
    Tensor centered = ops::sub(diff, ops::rowmean(diff));
    Tensor rowvar = ops::scale(ops::rowsum(ops::square(centered)),
                               1.0 / static_cast<double>(k - 1));
    Tensor sc = ops::scale(ops::mean(rowvar), lambda);
    total = total.defined() ? ops::add(total, sc) : sc;
  }
  return total;
}

// ------------------------------------------------------------------ loop

std::uint64_t simulation_table_hash(const std::vector<Draw>& table) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  };
  for (const Draw& d : table) {
    mix(static_cast<double>(d.theta.size()));
    for (double v : d.theta) mix(v);
    mix(static_cast<double>(d.data.context.size()));
    for (double v : d.data.context) mix(v);
    mix(static_cast<double>(d.data.obs.rows()));
    mix(static_cast<double>(d.data.obs.cols()));
    for (double v : d.data.obs.data()) mix(v);
  }
  return h;
}

namespace {

std::vector<std::size_t> sc_pick(std::size_t m, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (m > cap) {
    rng.shuffle(idx);
    idx.resize(cap);
  }
  return idx;
}

}  // namespace

TrainResult train(const TrainSetup& setup, const TrainingConfig& cfg,
                  const SCConfig& sc) {
  if (setup.posterior == nullptr || setup.model == nullptr)
    throw std::invalid_argument("train: posterior and model are required");
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw std::invalid_argument("train: epochs and batch size must be >= 1");
  if (!(cfg.learning_rate > 0.0))
    throw std::invalid_argument("train: learning rate must be positive");
  sc.schedule.validate();
  if (!sc.datasets.empty() && sc.s_train < 2)
    throw std::invalid_argument("train: SC variance needs at least two draws");
  if (cfg.mode == TrainMode::kOnline && cfg.steps_per_epoch < 1)
    throw std::invalid_argument("train: steps_per_epoch must be >= 1");

  FlowPosterior& post = *setup.posterior;
  const GenerativeModel& model = *setup.model;
  post.params().l2_coefficient = cfg.l2_coefficient;
  if (setup.likelihood != nullptr)
    setup.likelihood->params().l2_coefficient = cfg.l2_coefficient;

  GraphLikelihood graph_lik;
  if (setup.likelihood != nullptr) {
    FlowLikelihood* lik = setup.likelihood;
    graph_lik = [lik](const Dataset& d, const Tensor& theta) {
      return lik->log_prob_dataset_graph(d, theta);
    };
  } else {
    const GenerativeModel* m = &model;
    graph_lik = [m](const Dataset& d, const Tensor& theta) {
      return m->likelihood_log_density_graph(d, theta);
    };
  }

  TrainResult result;
  std::vector<Draw> table;
  std::size_t steps = cfg.steps_per_epoch;
  if (cfg.mode == TrainMode::kOffline) {
    if (cfg.simulation_budget < 1)
      throw std::invalid_argument("train: offline mode needs a budget");
    Rng sim = stream_rng(cfg.seed, "sim");
    table.reserve(cfg.simulation_budget);
    for (std::size_t i = 0; i < cfg.simulation_budget; ++i)
      table.push_back(model.sample_joint(sim, cfg.dataset_rows));
    result.table_hash = simulation_table_hash(table);
    if (steps == 0)
      steps = std::max<std::size_t>(1, table.size() / cfg.batch_size);
  }

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order;
    if (cfg.mode == TrainMode::kOffline) {
      if (simulation_table_hash(table) != result.table_hash)
        throw std::logic_error("train: offline simulation table changed");
      order.resize(table.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng perm = stream_rng(cfg.seed, "batch", epoch);
      perm.shuffle(order);
    }
    const double lambda = sc.schedule(epoch);
    double base_sum = 0.0, sc_sum = 0.0, mmd_sum = 0.0;
    std::size_t cursor = 0;

    for (std::size_t step = 1; step <= steps; ++step) {
      std::vector<Draw> batch;
      batch.reserve(cfg.batch_size);
      if (cfg.mode == TrainMode::kOnline) {
        Rng sim = stream_rng(cfg.seed, "sim", epoch, step);
        for (std::size_t b = 0; b < cfg.batch_size; ++b)
          batch.push_back(model.sample_joint(sim, cfg.dataset_rows));
      } else {
        for (std::size_t b = 0; b < cfg.batch_size; ++b)
          batch.push_back(table[order[cursor++ % order.size()]]);
      }

      try {
        Tape tape;
        std::vector<const Dataset*> ptrs;
        ptrs.reserve(batch.size());
        for (const Draw& d : batch) ptrs.push_back(&d.data);
        Tensor summaries = post.summary_batch(ptrs);
        Tensor conds = post.conditions_from(summaries, ptrs);
        Tensor thetas(batch.size(), post.dim());
        for (std::size_t b = 0; b < batch.size(); ++b)
          for (std::size_t j = 0; j < post.dim(); ++j)
            thetas.at(b, j) = batch[b].theta[j];
        Tensor base = ops::scale(ops::sum(post.log_prob_graph(thetas, conds)),
                                 -1.0 / static_cast<double>(batch.size()));
        if (setup.likelihood != nullptr)
          base = ops::add(base, setup.likelihood->batch_loss(batch));
        Tensor total = base;

        Tensor mmd_t;
        if (cfg.mmd_on_summaries) {
          Rng mrng = stream_rng(cfg.seed, "mmdref", epoch, step);
          mmd_t = mmd_penalty(summaries, mrng);
          total = ops::add(total, mmd_t);
        }

        Tensor sc_t;
        if (lambda > 0.0 && !sc.datasets.empty()) {
          Rng scrng = stream_rng(cfg.seed, "sc", epoch, step);
          const std::vector<std::size_t> picked =
              sc_pick(sc.datasets.size(), sc.max_per_step, scrng);
          std::vector<const Dataset*> scp;
          scp.reserve(picked.size());
          for (std::size_t i : picked) scp.push_back(&sc.datasets[i]);
          Tensor sc_sum_t;
          Tensor sc_summaries = post.summary_batch(scp);
          Tensor sc_conds = post.conditions_from(sc_summaries, scp);
          for (std::size_t j = 0; j < picked.size(); ++j) {
            Tensor crow = ops::gather_rows(sc_conds, {j});
            Tensor z(sc.s_train, post.dim());
            for (double& v : z.data()) v = scrng.normal();
            Tensor v = sc_variance_graph(post, graph_lik, model,
                                         sc.datasets[picked[j]], crow, z);
            sc_sum_t = sc_sum_t.defined() ? ops::add(sc_sum_t, v) : v;
          }
          sc_t = ops::scale(sc_sum_t, 1.0 / static_cast<double>(picked.size()));
          total = ops::add(total, ops::scale(sc_t, lambda));
        }

        base_sum += base.item();
        if (mmd_t.defined()) mmd_sum += mmd_t.item();
        if (sc_t.defined()) {
          const double v = sc_t.item();
          if (v < -1e-12)
            throw std::logic_error(
                "train: self-consistency variance went negative");
          sc_sum += v;
        }

        tape.backward(total);
        optimizer_step(post.params(), cfg.learning_rate);
        if (setup.likelihood != nullptr)
          optimizer_step(setup.likelihood->params(), cfg.learning_rate);
      } catch (const NumericalFailure& nf) {
        throw NumericalFailure("epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(step) + ": " + nf.what());
      }
    }

    TraceRow row;
    row.epoch = epoch;
    row.base_loss = base_sum / static_cast<double>(steps);
    row.sc_loss = sc_sum / static_cast<double>(steps);
    row.mmd_loss = mmd_sum / static_cast<double>(steps);
    row.lambda = lambda;
    result.trace.push_back(row);

    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
        epoch % cfg.checkpoint_every == 0) {
      post.save(cfg.checkpoint_path);
      if (setup.likelihood != nullptr)
        setup.likelihood->save(cfg.checkpoint_path + ".lik");
    }
  }
  return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file " + path);
  out << "epoch,base_loss,sc_loss,mmd_loss,lambda\n";
  char buf[128];
  for (const TraceRow& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                  r.base_loss, r.sc_loss, r.mmd_loss, r.lambda);
    out << buf;
  }
}

}  // namespace abmc
