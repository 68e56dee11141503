#include "abmc/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "abmc/stats.hpp"

namespace abmc {

namespace {

EvidenceEstimate estimate_impl(
    const PosteriorDensity& q, const GenerativeModel& prior_model,
    const Dataset& data, std::size_t s, Rng& rng, const char* method,
    const std::function<double(const std::vector<double>&)>& log_lik) {
  if (s < 1) throw std::invalid_argument("evidence: need at least one draw");
  EvidenceEstimate est;
  est.method = method;
  est.per_draw_terms.reserve(s);
  const auto draws = q.sample_with_log_prob(data, s, rng);
  for (const auto& [theta, lq] : draws) {
    const double lp = prior_model.prior_log_density(theta, data.context);
    const double ll = log_lik(theta);
    const double term = lp + ll - lq;
    if (!std::isfinite(term)) {
      ++est.skipped_draws;
      continue;
    }
    est.per_draw_terms.push_back(term);
  }
  est.draws = est.per_draw_terms.size();
  if (est.draws == 0)
    throw std::runtime_error(
        "evidence estimation failed: every draw fell outside the likelihood "
        "support");
  est.log_ml = mean_of(est.per_draw_terms);
  est.mc_std_error =
      est.draws > 1 ? std::sqrt(variance_of(est.per_draw_terms) /
                                static_cast<double>(est.draws))
                    : 0.0;
  return est;
}

}  // namespace

EvidenceEstimate estimate_log_ml_npe(const PosteriorDensity& q,
                                     const GenerativeModel& model,
                                     const Dataset& data, std::size_t s,
                                     Rng& rng) {
  return estimate_impl(q, model, data, s, rng, "npe",
                       [&](const std::vector<double>& theta) {
                         return model.likelihood_log_density(data, theta);
                       });
}

EvidenceEstimate estimate_log_ml_nlpe(const PosteriorDensity& q,
                                      const LikelihoodDensity& lik,
                                      const GenerativeModel& prior_model,
                                      const Dataset& data, std::size_t s,
                                      Rng& rng) {
  return estimate_impl(q, prior_model, data, s, rng, "nlpe",
                       [&](const std::vector<double>& theta) {
                         return lik.log_prob(data, theta);
                       });
}

std::vector<double> pmps_from_evidences(
    const std::vector<double>& log_evidences,
    const std::vector<double>& prior_model_probs) {
  const std::size_t k = log_evidences.size();
  if (k == 0 || prior_model_probs.size() != k)
    throw std::invalid_argument("pmps: evidence/prior length mismatch");
  double prior_sum = 0.0;
  for (double p : prior_model_probs) {
    if (!(p >= 0.0))
      throw std::invalid_argument("pmps: negative prior model probability");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9)
    throw std::invalid_argument("pmps: prior model probabilities must sum to 1");

  std::vector<double> score(k);
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    score[i] = std::log(prior_model_probs[i]) + log_evidences[i];
    hi = std::max(hi, score[i]);
  }
  if (!std::isfinite(hi))
    throw std::runtime_error("pmps: all models have vanishing evidence");
  double total = 0.0;
  std::vector<double> pmp(k);
  for (std::size_t i = 0; i < k; ++i) {
    pmp[i] = std::exp(score[i] - hi);
    total += pmp[i];
  }
  for (double& p : pmp) p /= total;
  return pmp;
}

double bayes_factor(double log_ml_a, double log_ml_b) {
  return std::exp(log_ml_a - log_ml_b);
}

}  // namespace abmc
