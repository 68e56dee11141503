#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "abmc/evidence.hpp"
#include "abmc/models.hpp"
#include "abmc/rng.hpp"
#include "abmc/training.hpp"
#include "doctest.h"

using namespace abmc;

namespace {

// the conjugate posterior itself, wrapped as a surrogate; every Bayes-identity
// term is then the log evidence, a constant
class ExactGaussianPosterior : public PosteriorDensity {
 public:
  explicit ExactGaussianPosterior(const GaussianLocationModel& model,
                                  double sd_scale = 1.0)
      : model_(model), sd_scale_(sd_scale) {}

  std::size_t dim() const override { return model_.dim(); }

  std::vector<std::pair<std::vector<double>, double>> sample_with_log_prob(
      const Dataset& data, std::size_t count, Rng& rng) const override {
    const auto [mean, sd] = model_.conjugate_posterior(data);
    std::vector<std::pair<std::vector<double>, double>> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
      std::vector<double> theta(dim());
      for (std::size_t j = 0; j < dim(); ++j)
        theta[j] = rng.normal(mean[j], sd_scale_ * sd);
      out.emplace_back(theta, log_prob(data, theta));
    }
    return out;
  }

  double log_prob(const Dataset& data,
                  const std::vector<double>& theta) const override {
    const auto [mean, base_sd] = model_.conjugate_posterior(data);
    const double sd = sd_scale_ * base_sd;
    double lp = 0.0;
    for (std::size_t j = 0; j < dim(); ++j) {
      const double z = (theta[j] - mean[j]) / sd;
      lp += -0.5 * z * z - std::log(sd) -
            0.5 * std::log(2.0 * std::numbers::pi);
    }
    return lp;
  }

 private:
  const GaussianLocationModel& model_;
  double sd_scale_;
};

class ShiftedLikelihood : public LikelihoodDensity {
 public:
  ShiftedLikelihood(const GenerativeModel& model, double offset)
      : model_(model), offset_(offset) {}
  double log_prob(const Dataset& data,
                  const std::vector<double>& theta) const override {
    return model_.likelihood_log_density(data, theta) + offset_;
  }

 private:
  const GenerativeModel& model_;
  double offset_;
};

class UnsupportedLikelihood : public LikelihoodDensity {
 public:
  double log_prob(const Dataset&, const std::vector<double>&) const override {
    return -std::numeric_limits<double>::infinity();
  }
};

GaussianLocationModel make_model() {
  GaussianConfig gc;
  gc.dim = 1;
  gc.rows = 10;
  gc.sigma_mu = 1.0;
  return GaussianLocationModel(gc);
}

}  // namespace

TEST_CASE("an exact posterior makes every draw report the exact evidence") {
  const GaussianLocationModel model = make_model();
  Rng rng(3);
  const std::vector<double> theta = model.prior_sample(rng, {});
  const Dataset data = model.simulate(theta, {}, rng);
  const double exact = model.analytic_log_evidence(data);
  const ExactGaussianPosterior q(model);

  Rng est_rng(5);
  const EvidenceEstimate est = estimate_log_ml_npe(q, model, data, 64, est_rng);
  CHECK(est.log_ml == doctest::Approx(exact).epsilon(1e-8));
  CHECK(est.draws == 64);
  CHECK(est.skipped_draws == 0);
  const auto [lo, hi] = std::minmax_element(est.per_draw_terms.begin(),
                                            est.per_draw_terms.end());
  CHECK(*hi - *lo < 1e-8);
  CHECK(est.mc_std_error < 1e-8);

  // the self-consistency variance vanishes for the true posterior
  Rng sc_rng(7);
  const double var = sc_variance_term(
      q,
      [&](const Dataset& d, const std::vector<double>& t) {
        return model.likelihood_log_density(d, t);
      },
      model, data, 16, sc_rng);
  CHECK(var >= 0.0);
  CHECK(var < 1e-10);
}

TEST_CASE("a deliberately wrong posterior spreads the draw terms") {
  const GaussianLocationModel model = make_model();
  Rng rng(3);
  const std::vector<double> theta = model.prior_sample(rng, {});
  const Dataset data = model.simulate(theta, {}, rng);
  const ExactGaussianPosterior q(model, 1.5);  // inflated sd

  Rng est_rng(5);
  const EvidenceEstimate est =
      estimate_log_ml_npe(q, model, data, 128, est_rng);
  const auto [lo, hi] = std::minmax_element(est.per_draw_terms.begin(),
                                            est.per_draw_terms.end());
  CHECK(*hi - *lo > 1e-3);
  CHECK(est.mc_std_error > 0.0);

  Rng sc_rng(7);
  const double var = sc_variance_term(
      q,
      [&](const Dataset& d, const std::vector<double>& t) {
        return model.likelihood_log_density(d, t);
      },
      model, data, 16, sc_rng);
  CHECK(var > 1e-4);
}

TEST_CASE("an additive likelihood offset shifts the estimate exactly") {
  const GaussianLocationModel model = make_model();
  Rng rng(11);
  const std::vector<double> theta = model.prior_sample(rng, {});
  const Dataset data = model.simulate(theta, {}, rng);
  const ExactGaussianPosterior q(model, 1.3);
  const double c = 4.75;
  const ShiftedLikelihood lik(model, c);

  Rng r1(13), r2(13);
  const EvidenceEstimate base = estimate_log_ml_npe(q, model, data, 32, r1);
  const EvidenceEstimate shifted =
      estimate_log_ml_nlpe(q, lik, model, data, 32, r2);
  CHECK(shifted.log_ml == doctest::Approx(base.log_ml + c).epsilon(1e-12));
  CHECK(shifted.method == "nlpe");
  CHECK(base.method == "npe");
}

TEST_CASE("a single draw is a legal estimate") {
  const GaussianLocationModel model = make_model();
  Rng rng(17);
  const std::vector<double> theta = model.prior_sample(rng, {});
  const Dataset data = model.simulate(theta, {}, rng);
  const ExactGaussianPosterior q(model);
  Rng est_rng(19);
  const EvidenceEstimate est = estimate_log_ml_npe(q, model, data, 1, est_rng);
  CHECK(est.draws == 1);
  CHECK(est.mc_std_error == 0.0);
  CHECK(est.log_ml ==
        doctest::Approx(model.analytic_log_evidence(data)).epsilon(1e-8));
  Rng bad_rng(19);
  CHECK_THROWS_AS(estimate_log_ml_npe(q, model, data, 0, bad_rng),
                  std::invalid_argument);
}

TEST_CASE("draws outside the likelihood support fail loudly") {
  const GaussianLocationModel model = make_model();
  Rng rng(23);
  const std::vector<double> theta = model.prior_sample(rng, {});
  const Dataset data = model.simulate(theta, {}, rng);
  const ExactGaussianPosterior q(model);
  const UnsupportedLikelihood lik;
  Rng est_rng(29);
  CHECK_THROWS_WITH_AS(
      estimate_log_ml_nlpe(q, lik, model, data, 8, est_rng),
      "evidence estimation failed: every draw fell outside the likelihood "
      "support",
      std::runtime_error);
}

TEST_CASE("posterior model probabilities from evidences") {
  const std::vector<double> pmp =
      pmps_from_evidences({std::log(3.0), 0.0}, {0.5, 0.5});
  CHECK(pmp[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(pmp[1] == doctest::Approx(0.25).epsilon(1e-12));

  // invariant to a common shift, even a large one
  const std::vector<double> shifted =
      pmps_from_evidences({std::log(3.0) + 700.0, 700.0}, {0.5, 0.5});
  CHECK(shifted[0] == doctest::Approx(0.75).epsilon(1e-12));

  // normalization for an arbitrary triple
  const std::vector<double> three =
      pmps_from_evidences({-31.2, -29.8, -35.0}, {0.2, 0.5, 0.3});
  double total = 0.0;
  for (double p : three) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // a larger prior mass can only raise a model's posterior probability
  const std::vector<double> even =
      pmps_from_evidences({-1.0, -2.0}, {0.5, 0.5});
  const std::vector<double> tilted =
      pmps_from_evidences({-1.0, -2.0}, {0.25, 0.75});
  CHECK(tilted[1] > even[1]);

  CHECK_THROWS_AS(pmps_from_evidences({1.0}, {0.5, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(pmps_from_evidences({1.0, 2.0}, {0.9, 0.3}),
                  std::invalid_argument);
  CHECK_THROWS_AS(pmps_from_evidences({1.0, 2.0}, {1.2, -0.2}),
                  std::invalid_argument);
}

TEST_CASE("bayes factor is the exponentiated evidence gap") {
  CHECK(bayes_factor(1.5, 0.25) ==
        doctest::Approx(std::exp(1.25)).epsilon(1e-10));
  CHECK(bayes_factor(-3.0, -3.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bayes_factor(0.0, std::log(2.0)) ==
        doctest::Approx(0.5).epsilon(1e-10));
}
