#include "abmc/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include "abmc/stats.hpp"

namespace abmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Lower-triangular Cholesky of a dense symmetric matrix; false if not PD.
bool cholesky(const std::vector<double>& a, std::size_t d,
              std::vector<double>& l) {
  l.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * d + k] * l[j * d + k];
      if (i == j) {
        if (!(s > 0.0)) return false;
        l[i * d + i] = std::sqrt(s);
      } else {
        l[i * d + j] = s / l[j * d + j];
      }
    }
  }
  return true;
}

// Solves L y = b in place.
void forward_solve(const std::vector<double>& l, std::size_t d,
                   std::vector<double>& b) {
  for (std::size_t i = 0; i < d; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * d + k] * b[k];
    b[i] = s / l[i * d + i];
  }
}

// Solves L^T x = b in place.
void backward_solve(const std::vector<double>& l, std::size_t d,
                    std::vector<double>& b) {
  for (std::size_t ii = d; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < d; ++k) s -= l[k * d + ii] * b[k];
    b[ii] = s / l[ii * d + ii];
  }
}

}  // namespace

LogDensity model_log_joint(const GenerativeModel& model, const Dataset& data) {
  return [&model, &data](const std::vector<double>& theta) {
    return model.prior_log_density(theta, data.context) +
           model.likelihood_log_density(data, theta);
  };
}

// ------------------------------------------------------------- quadrature

double quadrature_log_evidence_1d(const std::function<double(double)>& log_joint,
                                  double lo, double hi, std::size_t nodes) {
  if (!(hi > lo)) throw std::invalid_argument("quadrature: empty interval");
  if (nodes < 2) throw std::invalid_argument("quadrature: too few nodes");
  const Quadrature q = gauss_legendre(nodes);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  std::vector<double> terms(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double x = mid + half * q.nodes[i];
    terms[i] = log_joint(x) + std::log(q.weights[i]) + std::log(half);
  }
  return log_sum_exp(terms);
}

double quadrature_log_evidence(const GenerativeModel& model,
                               const Dataset& data, std::size_t nodes) {
  const std::vector<ParamSpec> specs = model.effective_specs(data.context);
  if (model.dim() == 1) {
    const LogDensity joint = model_log_joint(model, data);
    const auto f = [&joint](double x) { return joint(std::vector<double>{x}); };
    return quadrature_log_evidence_1d(f, specs[0].prior_mean - 10.0 * specs[0].prior_sd,
                                      specs[0].prior_mean + 10.0 * specs[0].prior_sd,
                                      nodes);
  }
  if (model.family() != Family::kGaussian)
    throw std::invalid_argument(
        "quadrature oracle: unsupported for non-factorizing multi-parameter "
        "models");
  // The location model's posterior factorizes over coordinates, so the
  // evidence is a product of per-coordinate one-dimensional integrals.
  double total = 0.0;
  for (std::size_t j = 0; j < model.dim(); ++j) {
    const auto f = [&data, &specs, j](double x) {
      double ll = 0.0;
      for (std::size_t i = 0; i < data.obs.rows(); ++i)
        ll += normal_log_pdf(data.obs.at(i, j), x, 1.0);
      return ll + normal_log_pdf(x, specs[j].prior_mean, specs[j].prior_sd);
    };
    total += quadrature_log_evidence_1d(
        f, specs[j].prior_mean - 10.0 * specs[j].prior_sd,
        specs[j].prior_mean + 10.0 * specs[j].prior_sd, nodes);
  }
  return total;
}

// ------------------------------------------------------------------ MCMC

McmcChain rwm_sample(const LogDensity& log_target,
                     const std::vector<double>& init, std::size_t steps,
                     Rng& rng, std::size_t thin) {
  const std::size_t d = init.size();
  if (d == 0) throw std::invalid_argument("rwm: empty initial point");
  if (steps < 4) throw std::invalid_argument("rwm: too few steps");
  if (thin < 1) throw std::invalid_argument("rwm: thin must be >= 1");
  std::vector<double> x = init;
  double lt = log_target(x);
  if (!std::isfinite(lt))
    throw std::invalid_argument("rwm: target not finite at the initial point");

  const std::size_t burn = steps / 2;
  constexpr std::size_t kWindow = 50;
  std::vector<double> step_size(d, 0.5);
  std::vector<std::size_t> window_acc(d, 0);
  std::size_t window_len = 0;
  std::size_t kept_acc = 0, kept_props = 0;

  McmcChain chain;
  chain.draws.reserve((steps - burn) / thin + 1);
  std::vector<double> prop = x;
  for (std::size_t sweep = 1; sweep <= steps; ++sweep) {
    for (std::size_t j = 0; j < d; ++j) {
      prop = x;
      prop[j] += step_size[j] * rng.normal();
      const double lt_new = log_target(prop);
      const double delta = lt_new - lt;
      bool accept = false;
      if (delta >= 0.0)
        accept = true;
      else if (rng.uniform() < std::exp(delta))
        accept = true;
      if (accept) {
        x[j] = prop[j];
        lt = lt_new;
        if (sweep <= burn)
          ++window_acc[j];
        else
          ++kept_acc;
      }
      if (sweep > burn) ++kept_props;
    }
    if (sweep <= burn) {
      if (++window_len == kWindow) {
        for (std::size_t j = 0; j < d; ++j) {
          const double rate =
              static_cast<double>(window_acc[j]) / static_cast<double>(kWindow);
          step_size[j] =
              std::clamp(step_size[j] * std::exp(rate - 0.3), 1e-4, 1e4);
          window_acc[j] = 0;
        }
        window_len = 0;
      }
    } else if ((sweep - burn) % thin == 0) {
      chain.draws.push_back(x);
    }
  }
  if (kept_acc == 0)
    throw std::runtime_error(
        "rwm: mixing failure, no acceptance after adaptation");
  chain.acceptance_rate =
      static_cast<double>(kept_acc) / static_cast<double>(kept_props);
  chain.flagged =
      !(chain.acceptance_rate > 0.1 && chain.acceptance_rate < 0.6);
  return chain;
}

// ------------------------------------------------------------ Laplace-IS

EvidenceEstimate laplace_is_log_evidence(const LogDensity& log_joint,
                                         const std::vector<double>& init,
                                         Rng& rng, std::size_t n_draws) {
  const std::size_t d = init.size();
  if (d == 0 || d > 10)
    throw std::invalid_argument("laplace oracle: dimension must be 1..10");
  if (n_draws < 2) throw std::invalid_argument("laplace oracle: too few draws");

  const auto fd_grad = [&](const std::vector<double>& x,
                           std::vector<double>& g) {
    std::vector<double> p = x;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = 1e-5 * (1.0 + std::abs(x[j]));
      p[j] = x[j] + h;
      const double fp = log_joint(p);
      p[j] = x[j] - h;
      const double fm = log_joint(p);
      p[j] = x[j];
      g[j] = (fp - fm) / (2.0 * h);
    }
  };

  // Adaptive-moment ascent to the MAP.
  std::vector<double> x = init, g(d), m(d, 0.0), v(d, 0.0);
  std::vector<double> best_x = init;
  double best_f = log_joint(init);
  constexpr double kLr = 0.05, kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
  for (std::size_t t = 1; t <= 400; ++t) {
    fd_grad(x, g);
    bool finite = true;
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(g[j])) {
        finite = false;
        break;
      }
      m[j] = kB1 * m[j] + (1.0 - kB1) * g[j];
      v[j] = kB2 * v[j] + (1.0 - kB2) * g[j] * g[j];
      const double mh = m[j] / (1.0 - std::pow(kB1, static_cast<double>(t)));
      const double vh = v[j] / (1.0 - std::pow(kB2, static_cast<double>(t)));
      x[j] += kLr * mh / (std::sqrt(vh) + kEps);
    }
    if (!finite) break;
    const double f = log_joint(x);
    if (std::isfinite(f) && f > best_f) {
      best_f = f;
      best_x = x;
    }
  }
  if (!std::isfinite(best_f))
    throw std::runtime_error("laplace oracle: MAP search diverged");
  const std::vector<double>& mu = best_x;

  // Central finite-difference Hessian.
  std::vector<double> hess(d * d, 0.0), hstep(d);
  for (std::size_t j = 0; j < d; ++j)
    hstep[j] = 1e-4 * (1.0 + std::abs(mu[j]));
  const double f0 = log_joint(mu);
  std::vector<double> p = mu;
  for (std::size_t i = 0; i < d; ++i) {
    p[i] = mu[i] + hstep[i];
    const double fp = log_joint(p);
    p[i] = mu[i] - hstep[i];
    const double fm = log_joint(p);
    p[i] = mu[i];
    hess[i * d + i] = (fp - 2.0 * f0 + fm) / (hstep[i] * hstep[i]);
    for (std::size_t j = i + 1; j < d; ++j) {
      p[i] = mu[i] + hstep[i];
      p[j] = mu[j] + hstep[j];
      const double fpp = log_joint(p);
      p[j] = mu[j] - hstep[j];
      const double fpm = log_joint(p);
      p[i] = mu[i] - hstep[i];
      const double fmm = log_joint(p);
      p[j] = mu[j] + hstep[j];
      const double fmp = log_joint(p);
      p[i] = mu[i];
      p[j] = mu[j];
      const double hij = (fpp - fpm - fmp + fmm) / (4.0 * hstep[i] * hstep[j]);
      hess[i * d + j] = hij;
      hess[j * d + i] = hij;
    }
  }

  // Proposal covariance 1.5 x inverse negative Hessian, via its Cholesky.
  std::vector<double> neg(d * d);
  for (std::size_t k = 0; k < d * d; ++k) neg[k] = -hess[k];
  std::vector<double> chol_neg;
  const bool pd = cholesky(neg, d, chol_neg);
  std::vector<double> diag_sd;  // fallback proposal scales
  double log_det_cov;           // log |Sigma|
  constexpr double kScale = 1.5;
  if (pd) {
    log_det_cov = static_cast<double>(d) * std::log(kScale);
    for (std::size_t j = 0; j < d; ++j)
      log_det_cov -= 2.0 * std::log(chol_neg[j * d + j]);
  } else {
    std::fprintf(stderr,
                 "laplace oracle: Hessian not negative definite, using "
                 "diagonal fallback\n");
    diag_sd.resize(d);
    log_det_cov = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double var = kScale / std::max(std::abs(hess[j * d + j]), 1e-12);
      diag_sd[j] = std::sqrt(var);
      log_det_cov += std::log(var);
    }
  }

  // Applies Sigma^{1/2} to z (Sigma = kScale * (-H)^-1 when PD).
  const auto half_apply = [&](std::vector<double>& z) {
    if (pd) {
      backward_solve(chol_neg, d, z);  // C^-T z has covariance (-H)^-1
      for (double& t : z) t *= std::sqrt(kScale);
    } else {
      for (std::size_t j = 0; j < d; ++j) z[j] *= diag_sd[j];
    }
  };
  const auto mahalanobis = [&](const std::vector<double>& y) {
    double s = 0.0;
    if (pd) {
      std::vector<double> t(d);
      for (std::size_t i = 0; i < d; ++i) {  // C^T (y - mu)
        double acc = 0.0;
        for (std::size_t k = i; k < d; ++k)
          acc += chol_neg[k * d + i] * (y[k] - mu[k]);
        t[i] = acc;
      }
      for (double c : t) s += c * c;
      s /= kScale;
    } else {
      for (std::size_t j = 0; j < d; ++j) {
        const double c = (y[j] - mu[j]) / diag_sd[j];
        s += c * c;
      }
    }
    return s;
  };

  constexpr double kDf = 5.0;
  const double dd = static_cast<double>(d);
  const double log_norm = std::lgamma(0.5 * (kDf + dd)) -
                          std::lgamma(0.5 * kDf) -
                          0.5 * dd * std::log(kDf * M_PI) - 0.5 * log_det_cov;

  std::vector<double> terms;
  terms.reserve(n_draws);
  std::size_t skipped = 0;
  double hi = -kInf;
  std::vector<double> all(n_draws);
  std::vector<double> z(d), y(d);
  for (std::size_t s = 0; s < n_draws; ++s) {
    for (std::size_t j = 0; j < d; ++j) z[j] = rng.normal();
    double chi2 = 0.0;
    for (int k = 0; k < 5; ++k) {
      const double n = rng.normal();
      chi2 += n * n;
    }
    const double fac = std::sqrt(kDf / chi2);
    half_apply(z);
    for (std::size_t j = 0; j < d; ++j) y[j] = mu[j] + z[j] * fac;
    const double log_q =
        log_norm - 0.5 * (kDf + dd) * std::log1p(mahalanobis(y) / kDf);
    const double t = log_joint(y) - log_q;
    all[s] = t;
    if (std::isfinite(t)) {
      terms.push_back(t);
      hi = std::max(hi, t);
    } else {
      ++skipped;
    }
  }
  if (terms.empty())
    throw std::runtime_error("laplace oracle: no finite importance terms");

  // log-mean-exp over all draws; out-of-support draws carry zero weight.
  double wsum = 0.0;
  std::vector<double> w(n_draws, 0.0);
  for (std::size_t s = 0; s < n_draws; ++s) {
    if (all[s] == -kInf || !std::isfinite(all[s])) continue;
    w[s] = std::exp(all[s] - hi);
    wsum += w[s];
  }
  const double wbar = wsum / static_cast<double>(n_draws);
  EvidenceEstimate est;
  est.method = "laplace_is";
  est.log_ml = hi + std::log(wbar);
  est.per_draw_terms = std::move(terms);
  est.draws = est.per_draw_terms.size();
  est.skipped_draws = skipped;
  est.mc_std_error = std::sqrt(variance_of(w) / static_cast<double>(n_draws)) / wbar;
  return est;
}

EvidenceEstimate laplace_is_log_evidence(const GenerativeModel& model,
                                         const Dataset& data, Rng& rng,
                                         std::size_t n_draws) {
  std::vector<double> init;
  for (const ParamSpec& s : model.effective_specs(data.context))
    init.push_back(s.prior_mean);
  return laplace_is_log_evidence(model_log_joint(model, data), init, rng,
                                 n_draws);
}

// ---------------------------------------------------------------- bridge

EvidenceEstimate bridge_sampling_log_evidence(const LogDensity& log_joint,
                                              const McmcChain& chain, Rng& rng,
                                              std::size_t n_proposal) {
  const std::size_t n = chain.draws.size();
  if (n < 4) throw std::invalid_argument("bridge: chain too short");
  if (n_proposal < 2) throw std::invalid_argument("bridge: too few proposals");
  const std::size_t d = chain.draws.front().size();
  const std::size_t n_fit = n / 2;
  const std::size_t n1 = n - n_fit;

  // Moment-match the Gaussian proposal on the first half.
  std::vector<double> mu(d, 0.0);
  for (std::size_t i = 0; i < n_fit; ++i)
    for (std::size_t j = 0; j < d; ++j) mu[j] += chain.draws[i][j];
  for (double& v : mu) v /= static_cast<double>(n_fit);
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n_fit; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b <= a; ++b)
        cov[a * d + b] += (chain.draws[i][a] - mu[a]) *
                          (chain.draws[i][b] - mu[b]);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      cov[a * d + b] /= static_cast<double>(n_fit - 1);
      cov[b * d + a] = cov[a * d + b];
    }
  std::vector<double> chol;
  if (!cholesky(cov, d, chol)) {
    for (std::size_t j = 0; j < d; ++j) cov[j * d + j] += 1e-9;
    if (!cholesky(cov, d, chol))
      throw std::runtime_error("bridge: degenerate chain covariance");
  }
  double log_det = 0.0;
  for (std::size_t j = 0; j < d; ++j) log_det += 2.0 * std::log(chol[j * d + j]);
  const double log_norm =
      -0.5 * (static_cast<double>(d) * std::log(2.0 * M_PI) + log_det);
  const auto log_q = [&](const std::vector<double>& y) {
    std::vector<double> r(d);
    for (std::size_t j = 0; j < d; ++j) r[j] = y[j] - mu[j];
    forward_solve(chol, d, r);
    double s = 0.0;
    for (double c : r) s += c * c;
    return log_norm - 0.5 * s;
  };

  // Log-ratio samples on both sides.
  std::vector<double> l1(n1);
  for (std::size_t j = 0; j < n1; ++j) {
    const std::vector<double>& y = chain.draws[n_fit + j];
    l1[j] = log_joint(y) - log_q(y);
  }
  std::vector<double> l2(n_proposal);
  std::vector<double> z(d), y(d);
  for (std::size_t i = 0; i < n_proposal; ++i) {
    for (std::size_t j = 0; j < d; ++j) z[j] = rng.normal();
    for (std::size_t a = 0; a < d; ++a) {
      double acc = mu[a];
      for (std::size_t b = 0; b <= a; ++b) acc += chol[a * d + b] * z[b];
      y[a] = acc;
    }
    l2[i] = log_joint(y) - log_q(y);
  }

  const double lstar = median_of(l1);
  std::vector<double> eta(n1), zeta(n_proposal);
  for (std::size_t j = 0; j < n1; ++j) eta[j] = l1[j] - lstar;
  for (std::size_t i = 0; i < n_proposal; ++i) zeta[i] = l2[i] - lstar;

  const double total = static_cast<double>(n1 + n_proposal);
  const double log_s1 = std::log(static_cast<double>(n1) / total);
  const double log_s2 = std::log(static_cast<double>(n_proposal) / total);

  double log_r = 0.0;
  std::size_t iters = 0;
  bool converged = false;
  std::vector<double> num(n_proposal), den(n1);
  while (iters < 1000) {
    ++iters;
    for (std::size_t i = 0; i < n_proposal; ++i)
      num[i] = zeta[i] - log_add_exp(log_s1 + zeta[i], log_s2 + log_r);
    for (std::size_t j = 0; j < n1; ++j)
      den[j] = -log_add_exp(log_s1 + eta[j], log_s2 + log_r);
    const double log_r_new =
        (log_sum_exp(num) - std::log(static_cast<double>(n_proposal))) -
        (log_sum_exp(den) - std::log(static_cast<double>(n1)));
    const double change = std::abs(log_r_new - log_r);
    log_r = log_r_new;
    if (change < 1e-10 * std::max(1.0, std::abs(log_r_new))) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw std::runtime_error(
        "bridge: fixed point did not converge; last log evidence " +
        std::to_string(lstar + log_r));

  EvidenceEstimate est;
  est.method = "bridge";
  est.log_ml = lstar + log_r;
  est.iterations = iters;
  est.draws = n1 + n_proposal;

  // First-order relative-error estimate, treating draws as independent.
  std::vector<double> f1(n1), f2(n_proposal);
  for (std::size_t j = 0; j < n1; ++j) f1[j] = std::exp(den[j]);
  for (std::size_t i = 0; i < n_proposal; ++i) f2[i] = std::exp(num[i]);
  const double m1 = mean_of(f1), m2 = mean_of(f2);
  const double re2 =
      variance_of(f2) / (static_cast<double>(n_proposal) * m2 * m2) +
      variance_of(f1) / (static_cast<double>(n1) * m1 * m1);
  est.mc_std_error = std::sqrt(re2);
  return est;
}

EvidenceEstimate bridge_log_evidence(const GenerativeModel& model,
                                     const Dataset& data, Rng& rng,
                                     std::size_t chain_steps,
                                     std::size_t n_proposal) {
  std::vector<double> init;
  for (const ParamSpec& s : model.effective_specs(data.context))
    init.push_back(s.prior_mean);
  const LogDensity joint = model_log_joint(model, data);
  const McmcChain chain = rwm_sample(joint, init, chain_steps, rng);
  return bridge_sampling_log_evidence(joint, chain, rng, n_proposal);
}

}  // namespace abmc
