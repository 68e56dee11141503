#include "abmc/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "abmc/kernels.hpp"
#include "abmc/stats.hpp"

namespace abmc {

namespace {

struct MmdState {
  std::size_t batch = 0, width = 0;
  double h2 = 1.0;
  std::vector<double> kxx, kxy;  // [B,B]; kxy row = summary index
  std::vector<double> x, y;      // forward values
};

void gaussian_kernel(std::vector<double>& d, double h2) {
  for (double& v : d) v = std::exp(-v / (2.0 * h2));
}

}  // namespace

Tensor mmd_penalty(const Tensor& summaries, const Tensor& reference) {
  if (!summaries.defined() || summaries.rows() < 2)
    throw std::invalid_argument("mmd_penalty: batch must hold at least 2 rows");
  if (!reference.defined() || reference.rows() != summaries.rows() ||
      reference.cols() != summaries.cols())
    throw std::invalid_argument("mmd_penalty: reference shape mismatch");

  const std::size_t b = summaries.rows();
  const std::size_t w = summaries.cols();
  auto st = std::make_shared<MmdState>();
  st->batch = b;
  st->width = w;

  auto forward = [st, b, w](Tensor& out) {
    st->kxx.assign(b * b, 0.0);
    st->kxy.assign(b * b, 0.0);
    std::vector<double> dyy(b * b, 0.0);
    kernels::pairwise_sqdist(st->x.data(), st->x.data(), st->kxx.data(), b, b,
                             w);
    kernels::pairwise_sqdist(st->y.data(), st->y.data(), dyy.data(), b, b, w);
    kernels::pairwise_sqdist(st->x.data(), st->y.data(), st->kxy.data(), b, b,
                             w);

    // Median off-diagonal squared distance of the joint batch: cross terms
    // appear twice in the full 2B x 2B matrix.
    std::vector<double> pool;
    pool.reserve(4 * b * b);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) {
        if (i != j) {
          pool.push_back(st->kxx[i * b + j]);
          pool.push_back(dyy[i * b + j]);
        }
        pool.push_back(st->kxy[i * b + j]);
        pool.push_back(st->kxy[i * b + j]);
      }
    st->h2 = median_of(pool);
    if (!(st->h2 > 0.0)) st->h2 = 1.0;

    gaussian_kernel(st->kxx, st->h2);
    gaussian_kernel(dyy, st->h2);
    gaussian_kernel(st->kxy, st->h2);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < b * b; ++i) {
      sxx += st->kxx[i];
      syy += dyy[i];
      sxy += st->kxy[i];
    }
    const double n2 = static_cast<double>(b * b);
    out.at(0, 0) = sxx / n2 + syy / n2 - 2.0 * sxy / n2;
  };

  auto backward = [st, summaries, b, w](const Tensor& out) {
    const double g = out.grad()[0];
    std::vector<double>& xg = summaries.impl()->grad;
    const double scale = 2.0 / (static_cast<double>(b * b) * st->h2);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        double acc = 0.0;
        for (std::size_t m = 0; m < b; ++m) {
          acc += st->kxx[i * b + m] * (st->x[m * w + j] - st->x[i * w + j]);
          acc -= st->kxy[i * b + m] * (st->y[m * w + j] - st->x[i * w + j]);
        }
        xg[i * w + j] += g * scale * acc;
      }
  };

  st->x = summaries.impl()->value;
  st->y = reference.impl()->value;
  return ops::custom("mmd_penalty", {summaries}, 1, 1, forward, backward);
}

Tensor mmd_penalty(const Tensor& summaries, Rng& rng) {
  if (!summaries.defined() || summaries.rows() < 2)
    throw std::invalid_argument("mmd_penalty: batch must hold at least 2 rows");
  Tensor ref(summaries.rows(), summaries.cols());
  for (double& v : ref.data()) v = rng.normal();
  return mmd_penalty(summaries, ref);
}

}  // namespace abmc
