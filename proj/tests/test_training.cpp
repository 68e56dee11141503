#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "abmc/models.hpp"
#include "abmc/rng.hpp"
#include "abmc/stats.hpp"
#include "abmc/surrogate.hpp"
#include "abmc/tensor.hpp"
#include "abmc/training.hpp"
#include "doctest.h"

using namespace abmc;

namespace {

GaussianLocationModel small_model() {
  GaussianConfig gc;
  gc.dim = 1;
  gc.rows = 5;
  gc.sigma_mu = 1.0;
  return GaussianLocationModel(gc);
}

FlowPosteriorConfig small_posterior_config() {
  FlowPosteriorConfig pc;
  pc.theta_dim = 1;
  pc.obs_cols = 1;
  return pc;
}

std::vector<Draw> draw_table(const GenerativeModel& model, std::size_t n,
                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Draw> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(model.sample_joint(rng));
  return out;
}

bool same_params(const ParamStore& a, const ParamStore& b) {
  const auto ia = a.items();
  const auto ib = b.items();
  if (ia.size() != ib.size()) return false;
  for (std::size_t k = 0; k < ia.size(); ++k) {
    if (ia[k].first != ib[k].first) return false;
    const Tensor& ta = ia[k].second;
    const Tensor& tb = ib[k].second;
    if (ta.rows() != tb.rows() || ta.cols() != tb.cols()) return false;
    for (std::size_t i = 0; i < ta.rows(); ++i)
      for (std::size_t j = 0; j < ta.cols(); ++j)
        if (ta.at(i, j) != tb.at(i, j)) return false;
  }
  return true;
}

class PriorAsPosterior : public PosteriorDensity {
 public:
  explicit PriorAsPosterior(const GenerativeModel& model) : model_(model) {}
  std::size_t dim() const override { return model_.dim(); }
  std::vector<std::pair<std::vector<double>, double>> sample_with_log_prob(
      const Dataset& data, std::size_t count, Rng& rng) const override {
    std::vector<std::pair<std::vector<double>, double>> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
      const std::vector<double> theta = model_.prior_sample(rng, data.context);
      out.emplace_back(theta, model_.prior_log_density(theta, data.context));
    }
    return out;
  }
  double log_prob(const Dataset& data,
                  const std::vector<double>& theta) const override {
    return model_.prior_log_density(theta, data.context);
  }

 private:
  const GenerativeModel& model_;
};

class ConstantLikelihood : public LikelihoodDensity {
 public:
  explicit ConstantLikelihood(double v) : v_(v) {}
  double log_prob(const Dataset&, const std::vector<double>&) const override {
    return v_;
  }

 private:
  double v_;
};

}  // namespace

TEST_CASE("penalty weight warms up on the documented schedule") {
  LambdaSchedule s;
  s.zero_until = 20;
  s.ramp_end = 30;
  s.validate();
  CHECK(s(1) == 0.0);
  CHECK(s(10) == 0.0);
  CHECK(s(20) == 0.0);
  CHECK(s(25) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s(22) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(s(30) == 1.0);
  CHECK(s(35) == 1.0);

  LambdaSchedule step;
  step.zero_until = 4;
  step.ramp_end = 4;  // degenerate ramp = a step function
  step.validate();
  CHECK(step(4) == 0.0);
  CHECK(step(5) == 1.0);

  LambdaSchedule bad;
  bad.zero_until = 9;
  bad.ramp_end = 5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("an empty penalty pool reproduces plain training exactly") {
  const GaussianLocationModel model = small_model();
  TrainingConfig tc;
  tc.epochs = 3;
  tc.steps_per_epoch = 4;
  tc.batch_size = 8;
  tc.learning_rate = 1e-3;
  tc.seed = 11;

  FlowPosterior plain(small_posterior_config(), 11);
  TrainResult plain_result =
      train({&plain, nullptr, &model}, tc, SCConfig{});

  // same seeds, but a penalty configuration with nothing in the pool
  FlowPosterior pooled(small_posterior_config(), 11);
  SCConfig sc;
  sc.schedule.zero_until = 0;
  sc.schedule.ramp_end = 0;
  TrainResult pooled_result = train({&pooled, nullptr, &model}, tc, sc);

  REQUIRE(plain_result.trace.size() == pooled_result.trace.size());
  for (std::size_t i = 0; i < plain_result.trace.size(); ++i) {
    CHECK(plain_result.trace[i].base_loss == pooled_result.trace[i].base_loss);
    CHECK(pooled_result.trace[i].sc_loss == 0.0);
  }
  CHECK(same_params(plain.params(), pooled.params()));

  // a populated pool behind a still-zero weight also changes nothing
  FlowPosterior dormant(small_posterior_config(), 11);
  SCConfig lazy;
  Rng sc_rng(99);
  lazy.datasets.push_back(model.sample_joint(sc_rng).data);
  lazy.schedule.zero_until = 100;
  lazy.schedule.ramp_end = 200;
  TrainResult dormant_result = train({&dormant, nullptr, &model}, tc, lazy);
  for (std::size_t i = 0; i < plain_result.trace.size(); ++i)
    CHECK(plain_result.trace[i].base_loss ==
          dormant_result.trace[i].base_loss);
  CHECK(same_params(plain.params(), dormant.params()));
}

TEST_CASE("training lowers the fit loss and beats the prior baseline") {
  const GaussianLocationModel model = small_model();
  TrainingConfig tc;
  tc.epochs = 8;
  tc.steps_per_epoch = 16;
  tc.batch_size = 32;
  tc.learning_rate = 1e-3;
  tc.seed = 5;

  FlowPosterior q(small_posterior_config(), 5);
  const TrainResult result = train({&q, nullptr, &model}, tc, SCConfig{});
  REQUIRE(result.trace.size() == tc.epochs);
  CHECK(result.trace.back().base_loss < result.trace.front().base_loss);
  CHECK(result.table_hash == 0);  // online mode has no table

  // held-out fit should beat the prior's own average surprisal
  const std::vector<Draw> held_out = draw_table(model, 64, 777);
  const double fit = npe_loss(q, held_out);
  Rng prior_rng(31);
  std::vector<double> nlp;
  nlp.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> theta = model.prior_sample(prior_rng, {});
    nlp.push_back(-model.prior_log_density(theta, {}));
  }
  CHECK(fit < mean_of(nlp));
}

TEST_CASE("the variance penalty ignores constant likelihood offsets") {
  const GaussianLocationModel model = small_model();
  Rng rng(3);
  const Dataset data = model.sample_joint(rng).data;
  const PriorAsPosterior q(model);

  auto exact = [&](const Dataset& d, const std::vector<double>& t) {
    return model.likelihood_log_density(d, t);
  };
  auto offset = [&](const Dataset& d, const std::vector<double>& t) {
    return model.likelihood_log_density(d, t) + 7.5;
  };
  Rng r1(41), r2(41);
  const double v1 = sc_variance_term(q, exact, model, data, 16, r1);
  const double v2 = sc_variance_term(q, offset, model, data, 16, r2);
  CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
  // the prior is not the posterior here, so the identity spread is real
  CHECK(v1 > 1e-3);
  Rng r3(41);
  CHECK_THROWS_AS(sc_variance_term(q, exact, model, data, 1, r3),
                  std::invalid_argument);
}

TEST_CASE("joint objective is the posterior fit plus the likelihood fit") {
  const GaussianLocationModel model = small_model();
  const std::vector<Draw> batch = draw_table(model, 16, 21);
  FlowPosterior q(small_posterior_config(), 7);
  const ConstantLikelihood lik(-3.2);
  CHECK(nlpe_loss(q, lik, batch) ==
        doctest::Approx(npe_loss(q, batch) + 3.2).epsilon(1e-12));
}

TEST_CASE("row duplication leaves the fit loss unchanged") {
  const GaussianLocationModel model = small_model();
  std::vector<Draw> batch = draw_table(model, 8, 13);
  std::vector<Draw> doubled = batch;
  for (Draw& d : doubled) {
    const Tensor& y = d.data.obs;
    Tensor rep(2 * y.rows(), y.cols());
    for (std::size_t i = 0; i < y.rows(); ++i)
      for (std::size_t j = 0; j < y.cols(); ++j) {
        rep.at(i, j) = y.at(i, j);
        rep.at(i + y.rows(), j) = y.at(i, j);
      }
    d.data.obs = rep;
  }
  FlowPosterior q(small_posterior_config(), 9);
  CHECK(npe_loss(q, batch) ==
        doctest::Approx(npe_loss(q, doubled)).epsilon(1e-9));
}

TEST_CASE("offline mode freezes one simulation table per seed") {
  const GaussianLocationModel model = small_model();
  TrainingConfig tc;
  tc.mode = TrainMode::kOffline;
  tc.epochs = 2;
  tc.steps_per_epoch = 0;  // derive from the budget
  tc.batch_size = 16;
  tc.simulation_budget = 64;
  tc.learning_rate = 1e-3;
  tc.seed = 17;
  tc.checkpoint_every = 1;
  tc.checkpoint_path = "offline_ckpt_test.json";

  FlowPosterior a(small_posterior_config(), 17);
  const TrainResult ra = train({&a, nullptr, &model}, tc, SCConfig{});
  FlowPosterior b(small_posterior_config(), 17);
  const TrainResult rb = train({&b, nullptr, &model}, tc, SCConfig{});
  CHECK(ra.table_hash != 0);
  CHECK(ra.table_hash == rb.table_hash);
  CHECK(same_params(a.params(), b.params()));

  tc.seed = 18;
  FlowPosterior c(small_posterior_config(), 17);
  const TrainResult rc = train({&c, nullptr, &model}, tc, SCConfig{});
  CHECK(rc.table_hash != ra.table_hash);

  FILE* f = std::fopen("offline_ckpt_test.json", "rb");
  REQUIRE(f != nullptr);
  std::fclose(f);
  std::remove("offline_ckpt_test.json");
}

TEST_CASE("penalty epochs report a positive raw variance") {
  const GaussianLocationModel model = small_model();
  TrainingConfig tc;
  tc.epochs = 4;
  tc.steps_per_epoch = 4;
  tc.batch_size = 8;
  tc.learning_rate = 1e-3;
  tc.seed = 23;

  SCConfig sc;
  Rng pool_rng(55);
  for (int k = 0; k < 3; ++k)
    sc.datasets.push_back(model.sample_joint(pool_rng).data);
  sc.schedule.zero_until = 1;
  sc.schedule.ramp_end = 3;

  FlowPosterior q(small_posterior_config(), 23);
  const TrainResult result = train({&q, nullptr, &model}, tc, sc);
  REQUIRE(result.trace.size() == 4);
  CHECK(result.trace[0].lambda == 0.0);
  CHECK(result.trace[1].lambda == doctest::Approx(0.5));
  CHECK(result.trace[2].lambda == 1.0);
  CHECK(result.trace[3].lambda == 1.0);
  CHECK(result.trace[0].sc_loss == 0.0);  // skipped entirely while dormant
  for (std::size_t e = 1; e < 4; ++e) CHECK(result.trace[e].sc_loss > 0.0);
}

TEST_CASE("summary statistics can be pulled toward a reference batch") {
  const GaussianLocationModel model = small_model();
  TrainingConfig tc;
  tc.epochs = 2;
  tc.steps_per_epoch = 4;
  tc.batch_size = 16;
  tc.learning_rate = 1e-3;
  tc.seed = 29;
  tc.mmd_on_summaries = true;

  FlowPosterior q(small_posterior_config(), 29);
  const TrainResult with_mmd = train({&q, nullptr, &model}, tc, SCConfig{});
  for (const TraceRow& row : with_mmd.trace) CHECK(row.mmd_loss > 0.0);

  tc.mmd_on_summaries = false;
  FlowPosterior p(small_posterior_config(), 29);
  const TrainResult without = train({&p, nullptr, &model}, tc, SCConfig{});
  for (const TraceRow& row : without.trace) CHECK(row.mmd_loss == 0.0);
}

TEST_CASE("a diverging run names the epoch and step that failed") {
  const GaussianLocationModel model = small_model();
  TrainingConfig tc;
  tc.epochs = 3;
  tc.steps_per_epoch = 8;
  tc.batch_size = 16;
  tc.learning_rate = 1e8;  // guaranteed blow-up
  tc.seed = 31;

  FlowPosterior q(small_posterior_config(), 31);
  bool threw = false;
  try {
    train({&q, nullptr, &model}, tc, SCConfig{});
  } catch (const NumericalFailure& nf) {
    threw = true;
    const std::string msg = nf.what();
    CHECK(msg.rfind("epoch ", 0) == 0);
    CHECK(msg.find(", step ") != std::string::npos);
  }
  CHECK(threw);
}
