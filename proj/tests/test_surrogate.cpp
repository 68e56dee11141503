#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
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

void jitter(ParamStore& store, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& [name, p] : store.items()) {
    Tensor shared = p;
    for (double& v : shared.data()) v += 0.05 * rng.normal();
  }
}

}  // namespace

TEST_CASE("posterior checkpoints restore the density bit for bit") {
  FlowPosteriorConfig pc;
  pc.theta_dim = 2;
  pc.obs_cols = 2;
  FlowPosterior q(pc, 42);
  jitter(q.params(), 43);

  const std::string path = "surrogate_roundtrip_test.json";
  q.save(path);
  const auto loaded = FlowPosterior::load(path);
  std::remove(path.c_str());

  REQUIRE(loaded != nullptr);
  CHECK(loaded->config().theta_dim == 2);
  CHECK(loaded->params().total_values() == q.params().total_values());

  GaussianConfig gc;
  gc.dim = 2;
  gc.rows = 5;
  GaussianLocationModel model(gc);
  Rng rng(7);
  for (int rep = 0; rep < 8; ++rep) {
    const Draw d = model.sample_joint(rng);
    CHECK(loaded->log_prob(d.data, d.theta) == q.log_prob(d.data, d.theta));
  }
}

TEST_CASE("likelihood checkpoints restore the density bit for bit") {
  FlowLikelihoodConfig lc;
  lc.theta_dim = 1;
  lc.obs_cols = 1;
  lc.modeled_cols = {0};
  FlowLikelihood lik(lc, 17);
  jitter(lik.params(), 18);

  const std::string path = "likelihood_roundtrip_test.json";
  lik.save(path);
  const auto loaded = FlowLikelihood::load(path);
  std::remove(path.c_str());

  const GaussianLocationModel model = small_model();
  Rng rng(19);
  for (int rep = 0; rep < 8; ++rep) {
    const Draw d = model.sample_joint(rng);
    CHECK(loaded->log_prob(d.data, d.theta) == lik.log_prob(d.data, d.theta));
  }
}

TEST_CASE("the conditioning path reaches the density") {
  FlowPosteriorConfig pc;
  pc.theta_dim = 1;
  pc.obs_cols = 1;
  FlowPosterior q(pc, 23);
  jitter(q.params(), 24);

  const GaussianLocationModel model = small_model();
  Rng rng(29);
  std::size_t distinct = 0;
  for (int rep = 0; rep < 32; ++rep) {
    const Draw a = model.sample_joint(rng);
    const Draw b = model.sample_joint(rng);
    const std::vector<double> theta = {0.3};
    if (q.log_prob(a.data, theta) != q.log_prob(b.data, theta)) ++distinct;
  }
  CHECK(distinct >= 31);  // different data must move the conditional density
}

TEST_CASE("a short fit makes the posterior track the sample mean") {
  const GaussianLocationModel model = small_model();
  TrainingConfig tc;
  tc.epochs = 10;
  tc.steps_per_epoch = 16;
  tc.batch_size = 32;
  tc.learning_rate = 1e-3;
  tc.seed = 31;

  FlowPosteriorConfig pc;
  pc.theta_dim = 1;
  pc.obs_cols = 1;
  FlowPosterior q(pc, 31);
  train({&q, nullptr, &model}, tc, SCConfig{});

  std::vector<double> conjugate_means, surrogate_means;
  Rng rng(37);
  for (int rep = 0; rep < 32; ++rep) {
    Draw d = model.sample_joint(rng);
    // spread the datasets out so the correlation is over a real range
    const double shift = -3.0 + 6.0 * rep / 31.0;
    for (double& v : d.data.obs.data()) v += shift;
    const auto [mean, sd] = model.conjugate_posterior(d.data);
    conjugate_means.push_back(mean[0]);
    const auto draws = q.sample_with_log_prob(d.data, 64, rng);
    std::vector<double> thetas;
    for (const auto& [theta, lq] : draws) thetas.push_back(theta[0]);
    surrogate_means.push_back(mean_of(thetas));
  }
  CHECK(pearson_r(conjugate_means, surrogate_means) > 0.9);
}

TEST_CASE("likelihood batch loss equals the per-draw average") {
  FlowLikelihoodConfig lc;
  lc.theta_dim = 1;
  lc.obs_cols = 1;
  lc.modeled_cols = {0};
  FlowLikelihood lik(lc, 41);
  jitter(lik.params(), 42);

  const GaussianLocationModel model = small_model();
  Rng rng(43);
  std::vector<Draw> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(model.sample_joint(rng));

  const Tensor loss = lik.batch_loss(batch);
  double by_hand = 0.0;
  for (const Draw& d : batch) by_hand -= lik.log_prob(d.data, d.theta);
  by_hand /= static_cast<double>(batch.size());
  CHECK(loss.at(0, 0) == doctest::Approx(by_hand).epsilon(1e-10));
}

TEST_CASE("dataset log-density graph matches the scalar interface") {
  FlowLikelihoodConfig lc;
  lc.theta_dim = 1;
  lc.obs_cols = 1;
  lc.modeled_cols = {0};
  FlowLikelihood lik(lc, 47);
  jitter(lik.params(), 48);

  const GaussianLocationModel model = small_model();
  Rng rng(49);
  const Draw d = model.sample_joint(rng);

  const std::size_t s = 5;
  Tensor theta(s, 1);
  for (std::size_t i = 0; i < s; ++i) theta.at(i, 0) = -1.0 + 0.5 * i;
  const Tensor graph = lik.log_prob_dataset_graph(d.data, theta);
  REQUIRE(graph.rows() == s);
  for (std::size_t i = 0; i < s; ++i)
    CHECK(graph.at(i, 0) ==
          doctest::Approx(lik.log_prob(d.data, {theta.at(i, 0)}))
              .epsilon(1e-10));
}

TEST_CASE("race likelihood surrogate conditions on the covariate column") {
  FlowLikelihoodConfig lc;
  lc.theta_dim = 4;
  lc.obs_cols = 2;
  lc.modeled_cols = {0};
  lc.cov_cols = {1};
  FlowLikelihood lik(lc, 53);
  jitter(lik.params(), 54);

  RaceConfig rc;
  rc.trials_per_condition = 4;
  RacingDiffusionModel race(rc);
  Rng rng(55);
  const Draw d = race.sample_joint(rng);
  const double base = lik.log_prob(d.data, d.theta);

  // flipping the condition column must change the density
  Dataset flipped = d.data;
  for (std::size_t i = 0; i < flipped.obs.rows(); ++i)
    flipped.obs.at(i, 1) = 1.0 - flipped.obs.at(i, 1);
  CHECK(lik.log_prob(flipped, d.theta) != base);
}
