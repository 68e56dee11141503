#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "abmc/evidence.hpp"
#include "abmc/models.hpp"
#include "abmc/rng.hpp"

namespace abmc {

using LogDensity = std::function<double(const std::vector<double>&)>;

// ------------------------------------------------------------- quadrature

// log of the Gauss-Legendre integral of exp(log_joint) over [lo, hi],
// accumulated with log-sum-exp.
double quadrature_log_evidence_1d(const std::function<double(double)>& log_joint,
                                  double lo, double hi, std::size_t nodes);

// Model-facing: exact for one-dimensional models; multi-dimensional models
// must factorize per coordinate (Gaussian location), else unsupported.
// Integrates each coordinate over its prior mean +- 10 prior sds.
double quadrature_log_evidence(const GenerativeModel& model,
                               const Dataset& data, std::size_t nodes = 512);

// ------------------------------------------------------------------ MCMC

struct McmcChain {
  std::vector<std::vector<double>> draws;  // post burn-in, thinned
  double acceptance_rate = 0.0;
  bool flagged = false;  // acceptance left (0.1, 0.6) after adaptation
};

// Gaussian random-walk Metropolis, single-site updates with per-coordinate
// step adaptation toward 0.3 acceptance over the first half (burn-in), then
// frozen. steps counts total sweeps; the second half is kept, thinned.
McmcChain rwm_sample(const LogDensity& log_target,
                     const std::vector<double>& init, std::size_t steps,
                     Rng& rng, std::size_t thin = 1);

// ------------------------------------------------------------ Laplace-IS

// MAP by adaptive-moment ascent on log_joint (finite-difference gradients),
// finite-difference Hessian, multivariate-t proposal (df 5, covariance
// 1.5 x inverse negative Hessian); log-mean-exp importance estimate.
EvidenceEstimate laplace_is_log_evidence(const LogDensity& log_joint,
                                         const std::vector<double>& init,
                                         Rng& rng, std::size_t n_draws);

EvidenceEstimate laplace_is_log_evidence(const GenerativeModel& model,
                                         const Dataset& data, Rng& rng,
                                         std::size_t n_draws = 100000);

// -------------------------------------------------------------- bridge

// Iterative optimal bridge: the first half of the chain moment-matches a
// Gaussian proposal, the second half estimates; fixed-point iteration until
// the log-evidence moves < 1e-10, at most 1000 iterations.
EvidenceEstimate bridge_sampling_log_evidence(const LogDensity& log_joint,
                                              const McmcChain& chain, Rng& rng,
                                              std::size_t n_proposal);

// Runs its own chain on the model posterior, then bridges.
EvidenceEstimate bridge_log_evidence(const GenerativeModel& model,
                                     const Dataset& data, Rng& rng,
                                     std::size_t chain_steps = 40000,
                                     std::size_t n_proposal = 20000);

// Joint log density log p(theta) + log p(y | theta) for one dataset.
LogDensity model_log_joint(const GenerativeModel& model, const Dataset& data);

}  // namespace abmc
