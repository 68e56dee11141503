#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "abmc/mmd.hpp"
#include "abmc/nn.hpp"
#include "abmc/rng.hpp"
#include "abmc/summary.hpp"
#include "abmc/tensor.hpp"
#include "doctest.h"

using namespace abmc;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

Tensor permute_rows(const Tensor& x, Rng& rng) {
  std::vector<std::size_t> idx(x.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      out.at(i, j) = x.at(idx[i], j);
  return out;
}

}  // namespace

TEST_CASE("deep-set summaries are permutation invariant") {
  Rng rng(1);
  ParamStore ps;
  DeepSetSummary ds(ps, "s", 3, DeepSetConfig{}, rng);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor obs = random_tensor(17, 3, rng);
    Tensor a = ds.summarize(obs);
    Tensor b = ds.summarize(permute_rows(obs, rng));
    for (std::size_t j = 0; j < a.cols(); ++j)
      CHECK(std::abs(a.at(0, j) - b.at(0, j)) < 1e-9);
  }
}

TEST_CASE("mean pooling ignores row duplication") {
  Rng rng(2);
  ParamStore ps;
  DeepSetSummary ds(ps, "s", 2, DeepSetConfig{}, rng);
  Tensor obs = random_tensor(9, 2, rng);
  Tensor doubled(18, 2);
  for (std::size_t i = 0; i < 18; ++i)
    for (std::size_t j = 0; j < 2; ++j) doubled.at(i, j) = obs.at(i % 9, j);
  Tensor a = ds.summarize(obs);
  Tensor b = ds.summarize(doubled);
  for (std::size_t j = 0; j < a.cols(); ++j)
    CHECK(a.at(0, j) == doctest::Approx(b.at(0, j)).epsilon(1e-10));
}

TEST_CASE("recurrent summary is order sensitive and batches exactly") {
  Rng rng(3);
  ParamStore ps;
  GruSummary gs(ps, "g", 2, GruConfig{}, rng);
  Tensor obs = random_tensor(12, 2, rng);
  Tensor rev(12, 2);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 2; ++j) rev.at(i, j) = obs.at(11 - i, j);
  Tensor a = gs.summarize(obs);
  Tensor b = gs.summarize(rev);
  double diff = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j)
    diff += std::abs(a.at(0, j) - b.at(0, j));
  CHECK(diff > 1e-6);

  // batched path must agree with the per-dataset path bit-for-bit intent
  std::vector<Tensor> batch;
  for (int k = 0; k < 4; ++k) batch.push_back(random_tensor(12, 2, rng));
  Tensor stacked = gs.summarize_batch(batch);
  for (std::size_t k = 0; k < 4; ++k) {
    Tensor one = gs.summarize(batch[k]);
    for (std::size_t j = 0; j < one.cols(); ++j)
      CHECK(stacked.at(k, j) == doctest::Approx(one.at(0, j)).epsilon(1e-12));
  }

  // ragged batch falls back to the per-dataset loop
  batch.push_back(random_tensor(7, 2, rng));
  Tensor ragged = gs.summarize_batch(batch);
  Tensor last = gs.summarize(batch.back());
  for (std::size_t j = 0; j < last.cols(); ++j)
    CHECK(ragged.at(4, j) == doctest::Approx(last.at(0, j)).epsilon(1e-12));
}

TEST_CASE("kernel statistic of a batch against itself vanishes") {
  Rng rng(4);
  Tensor x = random_tensor(32, 5, rng);
  CHECK(std::abs(mmd_penalty(x, x).item()) < 1e-12);
}

TEST_CASE("far-away constant summaries are heavily penalized") {
  Rng rng(5);
  Tensor x(64, 4, 5.0);  // ||c|| = 10
  Tensor ref = random_tensor(64, 4, rng);
  CHECK(mmd_penalty(x, ref).item() > 0.5);
}

TEST_CASE("matched distributions are barely penalized") {
  std::vector<double> vals;
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    Rng rng(100 + rep);
    Tensor x = random_tensor(256, 4, rng);
    vals.push_back(mmd_penalty(x, rng).item());
  }
  std::sort(vals.begin(), vals.end());
  CHECK(vals[9] < 0.05);  // 95th percentile of 10 repetitions
  CHECK(vals[0] >= 0.0);
}

TEST_CASE("degenerate batches are rejected") {
  Rng rng(6);
  Tensor one = random_tensor(1, 4, rng);
  CHECK_THROWS_AS(mmd_penalty(one, rng), std::invalid_argument);
}

TEST_CASE("kernel statistic is differentiable toward the reference") {
  Rng rng(7);
  ParamStore ps;
  Tensor p = ps.create("p", 16, 3);
  for (double& v : p.data()) v = 4.0 + rng.normal();
  Tensor ref = random_tensor(16, 3, rng);
  double before = 0.0;
  {
    Tape tape;
    Tensor pen = mmd_penalty(p, ref);
    before = pen.item();
    tape.backward(pen);
  }
  double gnorm = 0.0;
  for (double g : ps.get("p").grad()) gnorm += g * g;
  CHECK(gnorm > 0.0);
  // one crude descent step reduces the penalty
  for (std::size_t i = 0; i < p.size(); ++i)
    p.data()[i] -= 0.5 * ps.get("p").grad()[i];
  CHECK(mmd_penalty(p, ref).item() < before);
}
