#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "abmc/classifier.hpp"
#include "abmc/evidence.hpp"
#include "abmc/models.hpp"
#include "abmc/optimizer.hpp"
#include "abmc/rng.hpp"
#include "abmc/tensor.hpp"
#include "abmc/training.hpp"
#include "doctest.h"

using namespace abmc;

namespace {

GaussianLocationModel scale_model(double sigma_mu) {
  GaussianConfig gc;
  gc.dim = 1;
  gc.rows = 10;
  gc.sigma_mu = sigma_mu;
  return GaussianLocationModel(gc);
}

}  // namespace

TEST_CASE("an untrained classifier is exactly uniform over models") {
  for (std::size_t k : {2u, 3u, 5u}) {
    ClassifierConfig cc;
    cc.num_models = k;
    const ModelClassifier clf(cc, 7);
    Rng rng(1);
    const GaussianLocationModel model = scale_model(1.0);
    const Dataset data = model.sample_joint(rng).data;
    const std::vector<double> pmp = classifier_pmps(clf, data);
    REQUIRE(pmp.size() == k);
    double total = 0.0;
    for (double p : pmp) {
      CHECK(p == doctest::Approx(1.0 / static_cast<double>(k)).epsilon(1e-12));
      total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("objective pieces behave at the exact answers") {
  // two scale hypotheses for the same location family
  const GaussianLocationModel narrow = scale_model(std::exp(-1.5));
  const GaussianLocationModel wide = scale_model(std::exp(1.5));
  std::vector<const GenerativeModel*> models = {&narrow, &wide};
  const std::vector<double> prior = {0.5, 0.5};

  Rng rng(13);
  std::vector<Dataset> pool;
  for (int i = 0; i < 6; ++i) pool.push_back(narrow.sample_joint(rng).data);
  for (int i = 0; i < 6; ++i) pool.push_back(wide.sample_joint(rng).data);

  std::vector<std::function<double(const Dataset&)>> marginals;
  for (const GenerativeModel* m : models)
    marginals.emplace_back([m](const Dataset& d) {
      return static_cast<const GaussianLocationModel*>(m)
          ->analytic_log_evidence(d);
    });

  // with q(M|y) equal to the true model posterior the bracketed terms are
  // all log p(y), a constant across models, so the variance vanishes
  for (const Dataset& d : pool) {
    std::vector<double> evidences(2), scores(2);
    for (int k = 0; k < 2; ++k)
      evidences[k] = marginals[k](d);
    const std::vector<double> pmp = pmps_from_evidences(evidences, prior);
    std::vector<double> terms(2);
    for (int k = 0; k < 2; ++k)
      terms[k] = std::log(prior[k]) + evidences[k] - std::log(pmp[k]);
    CHECK(std::abs(terms[0] - terms[1]) < 1e-10);
  }

  // an untrained (uniform) classifier leaves a real spread on separated models
  ClassifierConfig cc;
  cc.num_models = 2;
  ModelClassifier uniform_clf(cc, 3);
  const double spread = classifier_sc_objective(uniform_clf, {}, pool,
                                                marginals, prior, 1.0);
  CHECK(spread > 1e-3);

  // cross-entropy vanishes when the classifier nails every label; the
  // uniform classifier instead pays exactly log 2 per dataset
  std::vector<std::pair<const Dataset*, std::size_t>> labeled;
  for (std::size_t i = 0; i < pool.size(); ++i)
    labeled.emplace_back(&pool[i], i < 6 ? 0u : 1u);
  const double ce_only =
      classifier_sc_objective(uniform_clf, labeled, {}, marginals, prior, 0.0);
  CHECK(ce_only == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("a short training separates two scale hypotheses") {
  const GaussianLocationModel narrow = scale_model(std::exp(-1.5));
  const GaussianLocationModel wide = scale_model(std::exp(1.5));

  ClassifierConfig cc;
  cc.num_models = 2;
  ModelClassifier clf(cc, 19);

  Rng train_rng(23);
  for (int step = 0; step < 300; ++step) {
    std::vector<Dataset> batch;
    std::vector<const Dataset*> ptrs;
    std::vector<std::size_t> labels;
    for (int i = 0; i < 16; ++i) {
      const bool w = train_rng.uniform() < 0.5;
      batch.push_back((w ? wide : narrow).sample_joint(train_rng).data);
      labels.push_back(w ? 1 : 0);
    }
    for (const Dataset& d : batch) ptrs.push_back(&d);
    Tape tape;
    const Tensor loss = classifier_sc_objective_graph(
        clf, ptrs, labels, {}, {}, {0.5, 0.5}, 0.0);
    tape.backward(loss);
    optimizer_step(clf.params(), 1e-2);
  }

  // argmax agreement with the exact model posterior on held-out data
  const std::vector<const GaussianLocationModel*> models = {&narrow, &wide};
  Rng test_rng(29);
  std::size_t agree = 0, total = 0;
  for (int rep = 0; rep < 128; ++rep) {
    for (int truth = 0; truth < 2; ++truth) {
      const Dataset d = models[truth]->sample_joint(test_rng).data;
      const std::vector<double> exact_pmp = pmps_from_evidences(
          {models[0]->analytic_log_evidence(d),
           models[1]->analytic_log_evidence(d)},
          {0.5, 0.5});
      const std::vector<double> got = classifier_pmps(clf, d);
      const std::size_t exact_arg = exact_pmp[0] >= exact_pmp[1] ? 0 : 1;
      const std::size_t got_arg = got[0] >= got[1] ? 0 : 1;
      agree += exact_arg == got_arg;
      ++total;
    }
  }
  CHECK(total == 256);
  CHECK(static_cast<double>(agree) / static_cast<double>(total) >= 0.9);
}
