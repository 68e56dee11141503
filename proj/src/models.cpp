#include "abmc/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "abmc/stats.hpp"

namespace abmc {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

double sigmoid_stable(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log1mexp_scalar(double v) {
  return v < -std::numbers::ln2 ? std::log1p(-std::exp(v))
                                : std::log(-std::expm1(v));
}

// tau is kept strictly below 1 so the decision time |rt| - tau*min|rt|
// stays positive even at the fastest trial.
constexpr double kTauCap = 1.0 - 1e-9;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------- base class

std::vector<double> GenerativeModel::prior_sample(
    Rng& rng, const std::vector<double>& context) const {
  std::vector<double> theta;
  for (const ParamSpec& s : effective_specs(context))
    theta.push_back(rng.normal(s.prior_mean, s.prior_sd));
  return theta;
}

double GenerativeModel::prior_log_density(
    const std::vector<double>& theta,
    const std::vector<double>& context) const {
  const auto specs = effective_specs(context);
  if (theta.size() != specs.size())
    throw std::invalid_argument(name() + ": theta has " +
                                std::to_string(theta.size()) +
                                " coordinates, expected " +
                                std::to_string(specs.size()));
  double ll = 0.0;
  for (std::size_t i = 0; i < specs.size(); ++i)
    ll += normal_log_pdf(theta[i], specs[i].prior_mean, specs[i].prior_sd);
  return ll;
}

Tensor GenerativeModel::prior_log_density_graph(
    const Tensor& theta, const std::vector<double>& context) const {
  const auto specs = effective_specs(context);
  if (theta.cols() != specs.size())
    throw std::invalid_argument(name() + ": theta width mismatch");
  std::vector<double> mean, inv_sd;
  double c0 = -0.5 * static_cast<double>(specs.size()) * kLogTwoPi;
  for (const ParamSpec& s : specs) {
    mean.push_back(s.prior_mean);
    inv_sd.push_back(1.0 / s.prior_sd);
    c0 -= std::log(s.prior_sd);
  }
  Tensor z = ops::mul(ops::sub(theta, Tensor::row(mean)), Tensor::row(inv_sd));
  return ops::add_const(ops::scale(ops::rowsum(ops::square(z)), -0.5), c0);
}

Draw GenerativeModel::sample_joint(Rng& rng, std::size_t rows) const {
  Draw d;
  d.data.context = sample_context(rng);
  d.theta = prior_sample(rng, d.data.context);
  Dataset sim = simulate(d.theta, d.data.context, rng, rows);
  d.data.obs = sim.obs;
  return d;
}

double GenerativeModel::analytic_log_evidence(const Dataset&) const {
  throw std::logic_error(name() + ": analytic evidence unavailable");
}

// ---------------------------------------------------------- Gaussian location

GaussianLocationModel::GaussianLocationModel(const GaussianConfig& cfg)
    : cfg_(cfg), name_("gaussian") {
  if (cfg_.dim == 0 || cfg_.rows == 0)
    throw std::invalid_argument("gaussian: dim and rows must be positive");
  if (!(cfg_.sigma_mu > 0.0))
    throw std::invalid_argument("gaussian: prior scale must be positive");
  for (std::size_t j = 0; j < cfg_.dim; ++j)
    specs_.push_back({"mu" + std::to_string(j), 0.0, cfg_.sigma_mu});
}

std::vector<double> GaussianLocationModel::sample_context(Rng& rng) const {
  if (!cfg_.randomized_scale) return {};
  return {rng.uniform(cfg_.log_var_lo, cfg_.log_var_hi)};
}

double GaussianLocationModel::sigma_mu_for(
    const std::vector<double>& context) const {
  if (!cfg_.randomized_scale) return cfg_.sigma_mu;
  if (context.size() != 1)
    throw std::invalid_argument(
        "gaussian: randomized prior scale needs one conditioning value");
  return std::exp(0.5 * context[0]);
}

std::vector<ParamSpec> GaussianLocationModel::effective_specs(
    const std::vector<double>& context) const {
  std::vector<ParamSpec> specs = specs_;
  const double sd = sigma_mu_for(context);
  for (ParamSpec& s : specs) s.prior_sd = sd;
  return specs;
}

Dataset GaussianLocationModel::simulate(const std::vector<double>& theta,
                                        const std::vector<double>& context,
                                        Rng& rng, std::size_t rows) const {
  if (theta.size() != cfg_.dim)
    throw std::invalid_argument("gaussian: theta dimension mismatch");
  if (rows == 0) rows = cfg_.rows;
  Dataset d;
  d.context = context;
  d.obs = Tensor(rows, cfg_.dim);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cfg_.dim; ++j)
      d.obs.at(i, j) = rng.normal(theta[j], 1.0);
  return d;
}

double GaussianLocationModel::likelihood_log_density(
    const Dataset& data, const std::vector<double>& theta) const {
  const Tensor& y = data.obs;
  if (!y.defined() || y.cols() != cfg_.dim || y.rows() == 0)
    throw std::invalid_argument("gaussian: bad dataset shape");
  double ll = 0.0;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < cfg_.dim; ++j) {
      const double r = y.at(i, j) - theta[j];
      ll -= 0.5 * r * r;
    }
  return ll - 0.5 * static_cast<double>(y.rows() * cfg_.dim) * kLogTwoPi;
}

Tensor GaussianLocationModel::likelihood_log_density_graph(
    const Dataset& data, const Tensor& theta) const {
  const Tensor& y = data.obs;
  if (!y.defined() || y.cols() != cfg_.dim || y.rows() == 0)
    throw std::invalid_argument("gaussian: bad dataset shape");
  if (theta.cols() != cfg_.dim)
    throw std::invalid_argument("gaussian: theta width mismatch");
  const double n = static_cast<double>(y.rows());
  std::vector<double> colsum(cfg_.dim, 0.0);
  double sq = 0.0;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < cfg_.dim; ++j) {
      colsum[j] += y.at(i, j);
      sq += y.at(i, j) * y.at(i, j);
    }
  // sum_ij (y_ij - mu_j)^2 = sq - 2 sum_j mu_j T_j + n sum_j mu_j^2
  Tensor cross = ops::rowsum(ops::mul(theta, Tensor::row(colsum)));
  Tensor quad = ops::sub(ops::scale(ops::rowsum(ops::square(theta)), n),
                         ops::scale(cross, 2.0));
  return ops::add_const(ops::scale(quad, -0.5),
                        -0.5 * (sq + n * cfg_.dim * kLogTwoPi));
}

double GaussianLocationModel::analytic_log_evidence(const Dataset& data) const {
  const Tensor& y = data.obs;
  if (!y.defined() || y.cols() != cfg_.dim || y.rows() == 0)
    throw std::invalid_argument("gaussian: bad dataset shape");
  const double n = static_cast<double>(y.rows());
  const double s2 = std::pow(sigma_mu_for(data.context), 2);
  const double denom = 1.0 + n * s2;
  double total = 0.0;
  for (std::size_t j = 0; j < cfg_.dim; ++j) {
    double t = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      t += y.at(i, j);
      sq += y.at(i, j) * y.at(i, j);
    }
    total += -0.5 * (n * kLogTwoPi + std::log(denom) + sq - s2 * t * t / denom);
  }
  return total;
}

std::pair<std::vector<double>, double>
GaussianLocationModel::conjugate_posterior(const Dataset& data) const {
  const Tensor& y = data.obs;
  if (!y.defined() || y.cols() != cfg_.dim || y.rows() == 0)
    throw std::invalid_argument("gaussian: bad dataset shape");
  const double s2 = std::pow(sigma_mu_for(data.context), 2);
  const double lambda = 1.0 / s2 + static_cast<double>(y.rows());
  std::vector<double> mean(cfg_.dim, 0.0);
  for (std::size_t j = 0; j < cfg_.dim; ++j) {
    double t = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i) t += y.at(i, j);
    mean[j] = t / lambda;
  }
  return {mean, 1.0 / std::sqrt(lambda)};
}

double gaussian_analytic_log_evidence(const GaussianLocationModel& model,
                                      const Dataset& data) {
  return model.analytic_log_evidence(data);
}

// ----------------------------------------------------------- racing diffusion

double wald_log_pdf(double t, double alpha, double nu) {
  if (!(alpha > 0.0) || !(nu > 0.0))
    throw std::domain_error("wald_log_pdf: alpha and nu must be positive");
  if (!(t > 0.0)) return -std::numeric_limits<double>::infinity();
  const double r = alpha - nu * t;
  return std::log(alpha) - 0.5 * kLogTwoPi - 1.5 * std::log(t) -
         r * r / (2.0 * t);
}

double wald_log_survival(double t, double alpha, double nu) {
  if (!(alpha > 0.0) || !(nu > 0.0))
    throw std::domain_error("wald_log_survival: alpha and nu must be positive");
  if (!(t > 0.0)) return 0.0;
  const double st = std::sqrt(t);
  const double a = (nu * t - alpha) / st;
  const double b = (nu * t + alpha) / st;
  const double la = log_normal_cdf(-a);
  const double lb = log_normal_cdf(-b);
  const double q = std::min(2.0 * alpha * nu + lb - la, -1e-12);
  return la + log1mexp_scalar(q);
}

double wald_race_log_density(double signed_rt, double t0, double alpha,
                             double nu_correct, double nu_incorrect) {
  const double t = std::abs(signed_rt) - t0;
  if (!(t > 0.0)) return -std::numeric_limits<double>::infinity();
  const double winner = signed_rt > 0.0 ? nu_correct : nu_incorrect;
  const double loser = signed_rt > 0.0 ? nu_incorrect : nu_correct;
  return wald_log_pdf(t, alpha, winner) + wald_log_survival(t, alpha, loser);
}

Dataset simulate_racing_diffusion(const RaceTheta& theta, Rng& rng,
                                  std::size_t trials_per_condition) {
  if (trials_per_condition == 0)
    throw std::invalid_argument("simulate_racing_diffusion: need trials >= 1");
  for (double a : theta.alpha)
    if (!(a > 0.0))
      throw std::domain_error("simulate_racing_diffusion: alpha <= 0");
  if (!(theta.nu_correct > 0.0) || !(theta.nu_incorrect > 0.0))
    throw std::domain_error("simulate_racing_diffusion: nu <= 0");
  if (!(theta.tau > 0.0) || !(theta.tau < 1.0))
    throw std::domain_error("simulate_racing_diffusion: tau outside (0,1)");

  struct Trial {
    double decision;
    bool correct;
  };
  std::vector<Trial> trials;
  trials.reserve(2 * trials_per_condition);
  double min_decision = std::numeric_limits<double>::infinity();
  for (int cond = 0; cond < 2; ++cond) {
    const double a = theta.alpha[cond];
    for (std::size_t i = 0; i < trials_per_condition; ++i) {
      const double tc = rng.inverse_gaussian(a / theta.nu_correct, a * a);
      const double ti = rng.inverse_gaussian(a / theta.nu_incorrect, a * a);
      Trial tr{std::min(tc, ti), tc <= ti};
      min_decision = std::min(min_decision, tr.decision);
      trials.push_back(tr);
    }
  }
  const double t0 = min_decision * theta.tau / (1.0 - theta.tau);

  Dataset d;
  d.obs = Tensor(trials.size(), 2);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const double rt = trials[i].decision + t0;
    d.obs.at(i, 0) = trials[i].correct ? rt : -rt;
    d.obs.at(i, 1) = i < trials_per_condition ? 0.0 : 1.0;
  }
  return d;
}

RacingDiffusionModel::RacingDiffusionModel(const RaceConfig& cfg)
    : cfg_(cfg), name_(cfg.split_alpha ? "race_split" : "race_shared") {
  if (cfg_.trials_per_condition == 0)
    throw std::invalid_argument("race: trials_per_condition must be positive");
  if (cfg_.split_alpha) {
    specs_.push_back({"log_alpha_speed", 0.0, 0.5});
    specs_.push_back({"log_alpha_accuracy", 0.0, 0.5});
  } else {
    specs_.push_back({"log_alpha", 0.0, 0.5});
  }
  specs_.push_back({"log_nu_correct", 0.0, 0.5});
  specs_.push_back({"log_nu_incorrect", 0.0, 0.5});
  specs_.push_back({"logit_tau", 0.0, 1.0});
}

RaceTheta RacingDiffusionModel::natural(
    const std::vector<double>& theta) const {
  if (theta.size() != specs_.size())
    throw std::invalid_argument(name_ + ": theta dimension mismatch");
  RaceTheta n;
  std::size_t k = 0;
  if (cfg_.split_alpha) {
    n.alpha[0] = std::exp(theta[k++]);
    n.alpha[1] = std::exp(theta[k++]);
  } else {
    n.alpha[0] = n.alpha[1] = std::exp(theta[k++]);
  }
  n.nu_correct = std::exp(theta[k++]);
  n.nu_incorrect = std::exp(theta[k++]);
  n.tau = std::min(sigmoid_stable(theta[k++]), kTauCap);
  return n;
}

Dataset RacingDiffusionModel::simulate(const std::vector<double>& theta,
                                       const std::vector<double>& context,
                                       Rng& rng, std::size_t rows) const {
  std::size_t per_cond = cfg_.trials_per_condition;
  if (rows != 0) {
    if (rows % 2 != 0)
      throw std::invalid_argument(name_ + ": row count must be even");
    per_cond = rows / 2;
  }
  Dataset d = simulate_racing_diffusion(natural(theta), rng, per_cond);
  d.context = context;
  return d;
}

namespace {

void check_race_data(const Tensor& y, const std::string& name) {
  if (!y.defined() || y.cols() != 2 || y.rows() == 0)
    throw std::invalid_argument(name + ": bad dataset shape");
  for (std::size_t i = 0; i < y.rows(); ++i) {
    if (y.at(i, 0) == 0.0)
      throw std::invalid_argument(name + ": zero response time");
    const double c = y.at(i, 1);
    if (c != 0.0 && c != 1.0)
      throw std::invalid_argument(name + ": condition must be 0 or 1");
  }
}

double min_abs_rt(const Tensor& y) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < y.rows(); ++i)
    m = std::min(m, std::abs(y.at(i, 0)));
  return m;
}

}  // namespace

double RacingDiffusionModel::likelihood_log_density(
    const Dataset& data, const std::vector<double>& theta) const {
  check_race_data(data.obs, name_);
  const RaceTheta n = natural(theta);
  const double t0 = n.tau * min_abs_rt(data.obs);
  double ll = 0.0;
  for (std::size_t i = 0; i < data.obs.rows(); ++i) {
    const int cond = static_cast<int>(data.obs.at(i, 1));
    ll += wald_race_log_density(data.obs.at(i, 0), t0, n.alpha[cond],
                                n.nu_correct, n.nu_incorrect);
  }
  return ll;
}

Tensor RacingDiffusionModel::likelihood_log_density_graph(
    const Dataset& data, const Tensor& theta) const {
  check_race_data(data.obs, name_);
  if (theta.cols() != specs_.size())
    throw std::invalid_argument(name_ + ": theta width mismatch");
  const Tensor& y = data.obs;
  const double min_rt = min_abs_rt(y);

  // Rows per (condition, correctness) share one column block.
  std::vector<double> groups[2][2];
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const int cond = static_cast<int>(y.at(i, 1));
    const int correct = y.at(i, 0) > 0.0 ? 1 : 0;
    groups[cond][correct].push_back(std::abs(y.at(i, 0)));
  }

  std::size_t k = 0;
  Tensor log_alpha[2];
  if (cfg_.split_alpha) {
    log_alpha[0] = ops::gather_cols(theta, {k++});
    log_alpha[1] = ops::gather_cols(theta, {k++});
  } else {
    log_alpha[0] = log_alpha[1] = ops::gather_cols(theta, {k++});
  }
  Tensor nu_c = ops::exp(ops::gather_cols(theta, {k++}));
  Tensor nu_i = ops::exp(ops::gather_cols(theta, {k++}));
  Tensor tau =
      ops::clamp_max(ops::sigmoid(ops::gather_cols(theta, {k++})), kTauCap);
  Tensor t0 = ops::scale(tau, min_rt);

  Tensor total;
  for (int cond = 0; cond < 2; ++cond) {
    Tensor la = log_alpha[cond];
    Tensor alpha = ops::exp(la);
    for (int correct = 0; correct < 2; ++correct) {
      const std::vector<double>& rts = groups[cond][correct];
      if (rts.empty()) continue;
      Tensor rt_row = Tensor::row(rts);
      Tensor t = ops::sub(rt_row, t0);
      Tensor st = ops::sqrt(t);
      const Tensor& nu_w = correct ? nu_c : nu_i;
      const Tensor& nu_l = correct ? nu_i : nu_c;

      Tensor resid = ops::sub(alpha, ops::mul(nu_w, t));
      Tensor log_f =
          ops::sub(ops::add_const(la, -0.5 * kLogTwoPi),
                   ops::add(ops::scale(ops::log(t), 1.5),
                            ops::div(ops::square(resid), ops::scale(t, 2.0))));

      Tensor drift = ops::mul(nu_l, st);
      Tensor spread = ops::div(alpha, st);
      Tensor lna = ops::log_normal_cdf(ops::neg(ops::sub(drift, spread)));
      Tensor lnb = ops::log_normal_cdf(ops::neg(ops::add(drift, spread)));
      Tensor q = ops::clamp_max(
          ops::add(ops::scale(ops::mul(alpha, nu_l), 2.0), ops::sub(lnb, lna)),
          -1e-12);
      Tensor log_s = ops::add(lna, ops::log1mexp(q));

      Tensor part = ops::rowsum(ops::add(log_f, log_s));
      total = total.defined() ? ops::add(total, part) : part;
    }
  }
  return total;
}

// -------------------------------------------------------------- AR(1) family

std::vector<double> simulate_ar(int variant, const ArTheta& theta,
                                const std::vector<double>& u,
                                const std::vector<double>& w, Rng& rng,
                                std::size_t transitions) {
  if (variant < 0 || variant > 3)
    throw std::invalid_argument("simulate_ar: unknown variant");
  if (!(theta.sigma > 0.0))
    throw std::domain_error("simulate_ar: sigma must be positive");
  if (u.size() < transitions || w.size() < transitions)
    throw std::invalid_argument("simulate_ar: covariate series too short");
  const double beta = variant == 3 ? 0.0 : theta.beta;
  const double gamma = variant == 1 ? 0.0 : theta.gamma;
  const double delta = variant == 2 ? 0.0 : theta.delta;
  std::vector<double> y(transitions + 1, 0.0);
  for (std::size_t t = 0; t < transitions; ++t) {
    const double mean =
        theta.alpha + beta * y[t] + gamma * u[t] + delta * w[t];
    y[t + 1] = rng.normal(mean, theta.sigma);
  }
  return y;
}

namespace {

const char* ar_variant_name(int variant) {
  switch (variant) {
    case 0: return "ar_full";
    case 1: return "ar_no_u";
    case 2: return "ar_no_w";
    case 3: return "ar_no_lag";
  }
  throw std::invalid_argument("ar: unknown variant");
}

// Stationary AR(1) draws (coefficient 0.8, innovation sd 0.3), standardized
// to zero mean and unit sample sd.
std::vector<double> make_covariate(Rng& rng, std::size_t len) {
  std::vector<double> x(len);
  x[0] = rng.normal(0.0, 0.5);
  for (std::size_t t = 1; t < len; ++t)
    x[t] = 0.8 * x[t - 1] + rng.normal(0.0, 0.3);
  const double m = mean_of(x);
  double sd = std::sqrt(variance_of(x));
  if (!(sd > 0.0)) sd = 1.0;
  for (double& v : x) v = (v - m) / sd;
  return x;
}

}  // namespace

ArModel::ArModel(const ArConfig& cfg)
    : cfg_(cfg), name_(ar_variant_name(cfg.variant)) {
  if (cfg_.transitions == 0)
    throw std::invalid_argument("ar: transitions must be positive");
  specs_.push_back({"alpha", 0.0, 0.5});
  if (cfg_.variant != 3) specs_.push_back({"beta", 0.0, 0.2});
  if (cfg_.variant != 1) specs_.push_back({"gamma", 0.0, 0.5});
  if (cfg_.variant != 2) specs_.push_back({"delta", 0.0, 0.5});
  specs_.push_back({"log_sigma", -1.0, 0.5});
}

ArTheta ArModel::natural(const std::vector<double>& theta) const {
  if (theta.size() != specs_.size())
    throw std::invalid_argument(name_ + ": theta dimension mismatch");
  ArTheta n;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const std::string& nm = specs_[i].name;
    if (nm == "alpha") n.alpha = theta[i];
    else if (nm == "beta") n.beta = theta[i];
    else if (nm == "gamma") n.gamma = theta[i];
    else if (nm == "delta") n.delta = theta[i];
    else n.sigma = std::exp(theta[i]);
  }
  return n;
}

Dataset ArModel::simulate(const std::vector<double>& theta,
                          const std::vector<double>& context, Rng& rng,
                          std::size_t rows) const {
  const std::size_t len = cfg_.transitions + 1;
  if (rows != 0 && rows != len)
    throw std::invalid_argument(name_ + ": series length is fixed");
  const ArTheta n = natural(theta);
  const std::vector<double> u = make_covariate(rng, len);
  const std::vector<double> w = make_covariate(rng, len);
  const std::vector<double> y =
      simulate_ar(cfg_.variant, n, u, w, rng, cfg_.transitions);
  Dataset d;
  d.context = context;
  d.obs = Tensor(len, 4);
  const double t_scale = 1.0 / static_cast<double>(cfg_.transitions);
  for (std::size_t t = 0; t < len; ++t) {
    d.obs.at(t, 0) = static_cast<double>(t) * t_scale;
    d.obs.at(t, 1) = y[t];
    d.obs.at(t, 2) = u[t];
    d.obs.at(t, 3) = w[t];
  }
  return d;
}

double ArModel::likelihood_log_density(const Dataset& data,
                                       const std::vector<double>& theta) const {
  const Tensor& y = data.obs;
  if (!y.defined() || y.cols() != 4 || y.rows() < 2)
    throw std::invalid_argument(name_ + ": bad dataset shape");
  const ArTheta n = natural(theta);
  const double beta = cfg_.variant == 3 ? 0.0 : n.beta;
  const double gamma = cfg_.variant == 1 ? 0.0 : n.gamma;
  const double delta = cfg_.variant == 2 ? 0.0 : n.delta;
  double ll = 0.0;
  for (std::size_t t = 0; t + 1 < y.rows(); ++t) {
    const double mean = n.alpha + beta * y.at(t, 1) + gamma * y.at(t, 2) +
                        delta * y.at(t, 3);
    ll += normal_log_pdf(y.at(t + 1, 1), mean, n.sigma);
  }
  return ll;
}

Tensor ArModel::likelihood_log_density_graph(const Dataset& data,
                                             const Tensor& theta) const {
  const Tensor& y = data.obs;
  if (!y.defined() || y.cols() != 4 || y.rows() < 2)
    throw std::invalid_argument(name_ + ": bad dataset shape");
  if (theta.cols() != specs_.size())
    throw std::invalid_argument(name_ + ": theta width mismatch");
  const std::size_t steps = y.rows() - 1;
  std::vector<double> y0(steps), y1(steps), u(steps), w(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    y0[t] = y.at(t, 1);
    y1[t] = y.at(t + 1, 1);
    u[t] = y.at(t, 2);
    w[t] = y.at(t, 3);
  }
  std::size_t k = 0;
  Tensor mean = ops::gather_cols(theta, {k++});  // alpha, broadcast later
  if (cfg_.variant != 3)
    mean = ops::add(mean, ops::mul(ops::gather_cols(theta, {k++}),
                                   Tensor::row(y0)));
  if (cfg_.variant != 1)
    mean = ops::add(mean, ops::mul(ops::gather_cols(theta, {k++}),
                                   Tensor::row(u)));
  if (cfg_.variant != 2)
    mean = ops::add(mean, ops::mul(ops::gather_cols(theta, {k++}),
                                   Tensor::row(w)));
  Tensor log_sigma = ops::gather_cols(theta, {k});
  Tensor z = ops::div(ops::sub(Tensor::row(y1), mean), ops::exp(log_sigma));
  Tensor ll = ops::sub(ops::scale(ops::rowsum(ops::square(z)), -0.5),
                       ops::scale(log_sigma, static_cast<double>(steps)));
  return ops::add_const(ll, -0.5 * static_cast<double>(steps) * kLogTwoPi);
}

// ------------------------------------------------------------- OOD datasets

std::vector<Dataset> make_ood_datasets(const GenerativeModel& model,
                                       double shift, std::size_t count,
                                       Rng& rng) {
  std::vector<Dataset> out;
  out.reserve(count);
  switch (model.family()) {
    case Family::kGaussian: {
      const auto& gm = dynamic_cast<const GaussianLocationModel&>(model);
      for (std::size_t k = 0; k < count; ++k) {
        Dataset d;
        d.context = gm.sample_context(rng);
        d.obs = Tensor(gm.default_rows(), gm.obs_cols());
        for (double& v : d.obs.data()) v = rng.normal(shift, 1.0);
        d.id = "ood" + std::to_string(k);
        out.push_back(std::move(d));
      }
      break;
    }
    case Family::kRace: {
      const auto& rm = dynamic_cast<const RacingDiffusionModel&>(model);
      for (std::size_t k = 0; k < count; ++k) {
        const std::vector<double> theta = rm.prior_sample(rng, {});
        Dataset d = rm.simulate(theta, {}, rng);
        // Contaminate: slow every response down 1.5x, then replace 5% with
        // uniform outliers above the implied non-decision time.
        for (std::size_t i = 0; i < d.obs.rows(); ++i)
          d.obs.at(i, 0) *= 1.5;
        const double t0 = rm.natural(theta).tau * min_abs_rt(d.obs);
        for (std::size_t i = 0; i < d.obs.rows(); ++i) {
          if (rng.uniform() >= 0.05) continue;
          const double sign = d.obs.at(i, 0) > 0.0 ? 1.0 : -1.0;
          d.obs.at(i, 0) = sign * rng.uniform(t0, 3.0);
        }
        d.id = "ood" + std::to_string(k);
        out.push_back(std::move(d));
      }
      break;
    }
    case Family::kAr: {
      const auto& am = dynamic_cast<const ArModel&>(model);
      ArModel full(ArConfig{0, am.config().transitions});
      for (std::size_t k = 0; k < count; ++k) {
        std::vector<double> theta = full.prior_sample(rng, {});
        theta[1] = shift;  // autoregressive coefficient forced off-prior
        Dataset d = full.simulate(theta, {}, rng);
        d.id = "ood" + std::to_string(k);
        out.push_back(std::move(d));
      }
      break;
    }
  }
  return out;
}

// ------------------------------------------------------------------ CSV I/O

std::vector<std::string> dataset_columns(const GenerativeModel& model) {
  switch (model.family()) {
    case Family::kGaussian: {
      std::vector<std::string> cols;
      for (std::size_t j = 0; j < model.obs_cols(); ++j)
        cols.push_back("y" + std::to_string(j));
      return cols;
    }
    case Family::kRace:
      return {"signed_rt", "condition"};
    case Family::kAr:
      return {"t", "y", "u", "w"};
  }
  throw std::logic_error("dataset_columns: unknown family");
}

void write_dataset_csv(const Dataset& data,
                       const std::vector<std::string>& columns,
                       const std::string& path) {
  if (!data.obs.defined() || data.obs.cols() != columns.size())
    throw std::invalid_argument("write_dataset_csv: column count mismatch");
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("write_dataset_csv: cannot write " + path);
  if (!data.context.empty()) {
    out << "# context:";
    for (std::size_t i = 0; i < data.context.size(); ++i)
      out << (i ? "," : " ") << format_double(data.context[i]);
    out << "\n";
  }
  for (std::size_t j = 0; j < columns.size(); ++j)
    out << (j ? "," : "") << columns[j];
  out << "\n";
  for (std::size_t i = 0; i < data.obs.rows(); ++i) {
    for (std::size_t j = 0; j < data.obs.cols(); ++j)
      out << (j ? "," : "") << format_double(data.obs.at(i, j));
    out << "\n";
  }
}

namespace {

std::vector<double> parse_csv_numbers(const std::string& line,
                                      const std::string& path) {
  std::vector<double> vals;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      vals.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw std::runtime_error("read_dataset_csv: bad number '" + cell +
                               "' in " + path);
    }
  }
  return vals;
}

}  // namespace

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset_csv: cannot open " + path);
  Dataset d;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_dataset_csv: empty file " + path);
  if (line.rfind("# context:", 0) == 0) {
    d.context = parse_csv_numbers(line.substr(10), path);
    if (!std::getline(in, line))
      throw std::runtime_error("read_dataset_csv: missing header in " + path);
  }
  const std::size_t cols = 1 + std::count(line.begin(), line.end(), ',');
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row = parse_csv_numbers(line, path);
    if (row.size() != cols)
      throw std::runtime_error("read_dataset_csv: ragged row in " + path);
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0)
    throw std::runtime_error("read_dataset_csv: no data rows in " + path);
  d.obs = Tensor::from(values, rows, cols);
  const std::size_t slash = path.find_last_of('/');
  const std::size_t start = slash == std::string::npos ? 0 : slash + 1;
  const std::size_t dot = path.find_last_of('.');
  d.id = path.substr(start, dot != std::string::npos && dot > start
                                ? dot - start
                                : std::string::npos);
  return d;
}

}  // namespace abmc
