#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace abmc {

// Scalar densities and special functions, all in log space where it matters.

double log_sum_exp(std::span<const double> xs);
double log_mean_exp(std::span<const double> xs);

double normal_log_pdf(double x, double mean, double sd);
// Standard normal CDF and its log, stable far into the left tail.
double normal_cdf(double x);
double log_normal_cdf(double x);
// phi(x) / Phi(x), the derivative of log_normal_cdf.
double normal_cdf_log_derivative(double x);

// Gauss-Legendre nodes/weights on [-1, 1].
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature gauss_legendre(std::size_t n);

// Adaptive Simpson on [a, b] with absolute tolerance.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol, int max_depth = 40);

// Regularized incomplete gamma P(a, x) and the chi-square survival function.
double gamma_p(double a, double x);
double chi_square_sf(double x, double dof);

double mean_of(std::span<const double> xs);
double variance_of(std::span<const double> xs, int ddof = 1);
double median_of(std::vector<double> xs);  // by value: partial sorts a copy

double pearson_r(std::span<const double> xs, std::span<const double> ys);
// Least-squares fit y ~ slope * x + intercept.
std::pair<double, double> linear_fit(std::span<const double> xs,
                                     std::span<const double> ys);

// Gelman-Rubin potential scale reduction over chains of a scalar quantity.
double potential_scale_reduction(const std::vector<std::vector<double>>& chains);

}  // namespace abmc
