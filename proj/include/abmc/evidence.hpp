#pragma once

#include <string>
#include <vector>

#include "abmc/models.hpp"
#include "abmc/surrogate.hpp"

namespace abmc {

struct EvidenceEstimate {
  double log_ml = 0.0;
  std::vector<double> per_draw_terms;  // empty for closed-form methods
  double mc_std_error = 0.0;
  std::size_t draws = 0;  // terms that entered the estimate
  std::string method;     // npe|nlpe|analytic|quadrature|laplace_is|bridge
  std::size_t skipped_draws = 0;
  std::size_t iterations = 0;  // bridge fixed-point iterations
};

// Mean over theta_s ~ q(.|y) of log p(theta_s) + log p(y|theta_s) -
// log q(theta_s|y), with the exact model likelihood.
EvidenceEstimate estimate_log_ml_npe(const PosteriorDensity& q,
                                     const GenerativeModel& model,
                                     const Dataset& data, std::size_t s,
                                     Rng& rng);

// Same identity with a learned likelihood in place of the exact one; the
// prior still comes from the generative model (context-aware).
EvidenceEstimate estimate_log_ml_nlpe(const PosteriorDensity& q,
                                      const LikelihoodDensity& lik,
                                      const GenerativeModel& prior_model,
                                      const Dataset& data, std::size_t s,
                                      Rng& rng);

// softmax(log prior + log evidence), max-subtracted; sums to 1.
std::vector<double> pmps_from_evidences(
    const std::vector<double>& log_evidences,
    const std::vector<double>& prior_model_probs);

// BF of the first model over the second.
double bayes_factor(double log_ml_a, double log_ml_b);

}  // namespace abmc
