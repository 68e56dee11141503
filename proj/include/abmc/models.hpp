#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "abmc/dataset.hpp"
#include "abmc/rng.hpp"
#include "abmc/tensor.hpp"

namespace abmc {

// One coordinate of the unconstrained parameter vector. Constrained
// quantities enter the simulators through the transform baked into the name
// (log_*, logit_*); priors are independent normals on this scale, so no
// change-of-variables terms arise anywhere in the stack.
struct ParamSpec {
  std::string name;
  double prior_mean = 0.0;
  double prior_sd = 1.0;
};

struct Draw {
  std::vector<double> theta;
  Dataset data;
};

enum class Family { kGaussian, kRace, kAr };

class GenerativeModel {
 public:
  virtual ~GenerativeModel() = default;

  virtual const std::string& name() const = 0;
  virtual Family family() const = 0;
  virtual const std::vector<ParamSpec>& param_specs() const = 0;
  std::size_t dim() const { return param_specs().size(); }
  virtual std::size_t obs_cols() const = 0;
  virtual std::size_t default_rows() const = 0;

  // Ordered series use a recurrent summary and rule out a per-row factorized
  // likelihood surrogate.
  virtual bool exchangeable_rows() const { return true; }

  // Direct conditioning values drawn fresh per dataset; empty by default.
  virtual std::size_t context_dim() const { return 0; }
  virtual std::vector<double> sample_context(Rng& rng) const { return {}; }

  // Prior moments, possibly context-dependent (randomized prior scale).
  virtual std::vector<ParamSpec> effective_specs(
      const std::vector<double>& context) const {
    return param_specs();
  }

  std::vector<double> prior_sample(Rng& rng,
                                   const std::vector<double>& context) const;
  double prior_log_density(const std::vector<double>& theta,
                           const std::vector<double>& context) const;
  // theta [S,dim] -> [S,1], differentiable in theta.
  Tensor prior_log_density_graph(const Tensor& theta,
                                 const std::vector<double>& context) const;

  // rows = 0 picks the model's default size.
  virtual Dataset simulate(const std::vector<double>& theta,
                           const std::vector<double>& context, Rng& rng,
                           std::size_t rows = 0) const = 0;
  Draw sample_joint(Rng& rng, std::size_t rows = 0) const;

  virtual double likelihood_log_density(const Dataset& data,
                                        const std::vector<double>& theta)
      const = 0;
  // theta [S,dim] -> [S,1], differentiable in theta.
  virtual Tensor likelihood_log_density_graph(const Dataset& data,
                                              const Tensor& theta) const = 0;

  virtual bool has_analytic_log_evidence() const { return false; }
  virtual double analytic_log_evidence(const Dataset& data) const;
};

// --------------------------------------------------------------------------
// Conjugate Gaussian location family: y_ij ~ N(mu_j, 1), mu_j ~ N(0, sigma_mu).
// With randomized_scale, log sigma_mu^2 ~ U(lo, hi) is drawn per dataset and
// passed as a conditioning value.

struct GaussianConfig {
  std::size_t dim = 1;
  std::size_t rows = 10;
  double sigma_mu = 1.0;
  bool randomized_scale = false;
  double log_var_lo = -3.0;
  double log_var_hi = 3.0;
};

class GaussianLocationModel : public GenerativeModel {
 public:
  explicit GaussianLocationModel(const GaussianConfig& cfg);

  const std::string& name() const override { return name_; }
  Family family() const override { return Family::kGaussian; }
  const std::vector<ParamSpec>& param_specs() const override { return specs_; }
  std::size_t obs_cols() const override { return cfg_.dim; }
  std::size_t default_rows() const override { return cfg_.rows; }
  const GaussianConfig& config() const { return cfg_; }

  std::size_t context_dim() const override {
    return cfg_.randomized_scale ? 1 : 0;
  }
  std::vector<double> sample_context(Rng& rng) const override;
  std::vector<ParamSpec> effective_specs(
      const std::vector<double>& context) const override;

  Dataset simulate(const std::vector<double>& theta,
                   const std::vector<double>& context, Rng& rng,
                   std::size_t rows = 0) const override;
  double likelihood_log_density(const Dataset& data,
                                const std::vector<double>& theta) const
      override;
  Tensor likelihood_log_density_graph(const Dataset& data,
                                      const Tensor& theta) const override;

  bool has_analytic_log_evidence() const override { return true; }
  double analytic_log_evidence(const Dataset& data) const override;

  double sigma_mu_for(const std::vector<double>& context) const;
  // Conjugate posterior over mu: per-dimension means, shared sd.
  std::pair<std::vector<double>, double> conjugate_posterior(
      const Dataset& data) const;

 private:
  GaussianConfig cfg_;
  std::string name_;
  std::vector<ParamSpec> specs_;
};

double gaussian_analytic_log_evidence(const GaussianLocationModel& model,
                                      const Dataset& data);

// --------------------------------------------------------------------------
// Racing diffusion: two inverse-Gaussian accumulators race; the winner's
// first-passage time plus a non-decision time is the response time, and its
// sign encodes correctness. Two experiment conditions; the split-threshold
// variant gives each condition its own boundary.

struct RaceConfig {
  bool split_alpha = false;  // shared boundary vs per-condition boundaries
  std::size_t trials_per_condition = 64;
};

// Natural-scale parameters (boundaries per condition; equal when shared).
struct RaceTheta {
  double alpha[2];
  double nu_correct;
  double nu_incorrect;
  double tau;  // in (0,1); t0 = tau * min |rt|
};

// Density of a hidden-boundary race trial: winning accumulator's
// first-passage density times the loser's survival, at decision time
// t = |rt| - t0. Returns -inf for |rt| <= t0.
double wald_log_pdf(double t, double alpha, double nu);
double wald_log_survival(double t, double alpha, double nu);
double wald_race_log_density(double signed_rt, double t0, double alpha,
                             double nu_correct, double nu_incorrect);

// One dataset: trials_per_condition trials in each of two conditions,
// columns (signed_rt, condition).
Dataset simulate_racing_diffusion(const RaceTheta& theta, Rng& rng,
                                  std::size_t trials_per_condition);

class RacingDiffusionModel : public GenerativeModel {
 public:
  explicit RacingDiffusionModel(const RaceConfig& cfg);

  const std::string& name() const override { return name_; }
  Family family() const override { return Family::kRace; }
  const std::vector<ParamSpec>& param_specs() const override { return specs_; }
  std::size_t obs_cols() const override { return 2; }
  std::size_t default_rows() const override {
    return 2 * cfg_.trials_per_condition;
  }
  const RaceConfig& config() const { return cfg_; }

  RaceTheta natural(const std::vector<double>& theta) const;

  Dataset simulate(const std::vector<double>& theta,
                   const std::vector<double>& context, Rng& rng,
                   std::size_t rows = 0) const override;
  double likelihood_log_density(const Dataset& data,
                                const std::vector<double>& theta) const
      override;
  Tensor likelihood_log_density_graph(const Dataset& data,
                                      const Tensor& theta) const override;

 private:
  RaceConfig cfg_;
  std::string name_;
  std::vector<ParamSpec> specs_;
};

// --------------------------------------------------------------------------
// First-order autoregression with two exogenous covariates; reduced variants
// drop one term each. Parameters are (alpha[, beta][, gamma][, delta],
// log_sigma); the dropped coefficient contributes exactly zero.

struct ArConfig {
  int variant = 0;  // 0 full, 1 no-u, 2 no-w, 3 no-lag
  std::size_t transitions = 15;
};

struct ArTheta {
  double alpha = 0.0, beta = 0.0, gamma = 0.0, delta = 0.0, sigma = 1.0;
};

// y_{t+1} ~ N(alpha + beta y_t + gamma u_t + delta w_t, sigma) from y_0 = 0,
// with the variant's dropped coefficients forced to zero. Returns y_0..y_T.
std::vector<double> simulate_ar(int variant, const ArTheta& theta,
                                const std::vector<double>& u,
                                const std::vector<double>& w, Rng& rng,
                                std::size_t transitions);

class ArModel : public GenerativeModel {
 public:
  explicit ArModel(const ArConfig& cfg);

  const std::string& name() const override { return name_; }
  Family family() const override { return Family::kAr; }
  const std::vector<ParamSpec>& param_specs() const override { return specs_; }
  std::size_t obs_cols() const override { return 4; }  // t, y, u, w
  std::size_t default_rows() const override { return cfg_.transitions + 1; }
  bool exchangeable_rows() const override { return false; }
  const ArConfig& config() const { return cfg_; }

  ArTheta natural(const std::vector<double>& theta) const;

  Dataset simulate(const std::vector<double>& theta,
                   const std::vector<double>& context, Rng& rng,
                   std::size_t rows = 0) const override;
  double likelihood_log_density(const Dataset& data,
                                const std::vector<double>& theta) const
      override;
  Tensor likelihood_log_density_graph(const Dataset& data,
                                      const Tensor& theta) const override;

 private:
  ArConfig cfg_;
  std::string name_;
  std::vector<ParamSpec> specs_;
};

// --------------------------------------------------------------------------
// Unlabeled datasets from shifted/contaminated processes, standing in for
// real observations. `shift` is the mean shift for the Gaussian family and
// the forced autoregressive coefficient for the AR family; the diffusion
// contamination recipe is fixed (rt scaled 1.5x, 5% uniform outliers).
std::vector<Dataset> make_ood_datasets(const GenerativeModel& model,
                                       double shift, std::size_t count,
                                       Rng& rng);

// Dataset CSV files: header row, %.17g values, optional leading
// "# context: v1,v2" line when conditioning values are present.
std::vector<std::string> dataset_columns(const GenerativeModel& model);
void write_dataset_csv(const Dataset& data,
                       const std::vector<std::string>& columns,
                       const std::string& path);
Dataset read_dataset_csv(const std::string& path);

}  // namespace abmc
