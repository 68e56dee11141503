#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "abmc/flow.hpp"
#include "abmc/nn.hpp"
#include "abmc/rng.hpp"
#include "abmc/summary.hpp"
#include "abmc/tensor.hpp"
#include "doctest.h"

using namespace abmc;

namespace {

// Central finite differences on every parameter coordinate against the
// tape's gradients. `build` must reconstruct the loss from current values.
void check_gradients(ParamStore& ps, const std::function<Tensor()>& build,
                     double tol = 1e-4) {
  std::vector<std::vector<double>> grads;
  {
    Tape tape;
    Tensor loss = build();
    REQUIRE(loss.size() == 1);
    tape.backward(loss);
    for (const auto& [name, p] : ps.items()) grads.push_back(p.grad());
  }
  std::size_t checked = 0;
  for (std::size_t pi = 0; pi < ps.items().size(); ++pi) {
    Tensor p = ps.items()[pi].second;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double x = p.data()[j];
      const double h = 1e-5 * (1.0 + std::abs(x));
      p.data()[j] = x + h;
      const double fp = build().item();
      p.data()[j] = x - h;
      const double fm = build().item();
      p.data()[j] = x;
      const double fd = (fp - fm) / (2.0 * h);
      const double g = grads[pi][j];
      const double rel =
          std::abs(g - fd) / std::max({1e-4, std::abs(g), std::abs(fd)});
      INFO("param ", ps.items()[pi].first, " [", j, "] grad ", g, " fd ", fd);
      CHECK(rel < tol);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("basic op values") {
  Tensor a = Tensor::from({1, 2, 3, 4}, 2, 2);
  Tensor b = Tensor::from({5, 6, 7, 8}, 2, 2);
  Tensor c = ops::matmul(a, b);
  CHECK(c.at(0, 0) == doctest::Approx(19));
  CHECK(c.at(0, 1) == doctest::Approx(22));
  CHECK(c.at(1, 0) == doctest::Approx(43));
  CHECK(c.at(1, 1) == doctest::Approx(50));

  Tensor v = Tensor::row({1, 2, 3, 4});
  CHECK(ops::variance(v, 1).item() == doctest::Approx(5.0 / 3.0));
  CHECK(ops::variance(v, 0).item() == doctest::Approx(1.25));
  CHECK(ops::rowsum(v).item() == doctest::Approx(10));
  CHECK(ops::mean(v).item() == doctest::Approx(2.5));

  CHECK(ops::log1mexp(Tensor::scalar(-0.5)).item() ==
        doctest::Approx(std::log(1.0 - std::exp(-0.5))));
  CHECK(ops::clamp_max(Tensor::scalar(3.0), 1.0).item() == 1.0);
  CHECK(ops::clamp_max(Tensor::scalar(-3.0), 1.0).item() == -3.0);

  Tensor ls = ops::log_softmax_rows(Tensor::from({1, 2, 3, 0, 0, 0}, 2, 3));
  double s0 = 0, s1 = 0;
  for (std::size_t j = 0; j < 3; ++j) {
    s0 += std::exp(ls.at(0, j));
    s1 += std::exp(ls.at(1, j));
  }
  CHECK(s0 == doctest::Approx(1.0));
  CHECK(s1 == doctest::Approx(1.0));
  CHECK(ls.at(1, 0) == doctest::Approx(std::log(1.0 / 3.0)));
}

TEST_CASE("non-finite forward values throw") {
  CHECK_THROWS_AS(ops::log(Tensor::scalar(-1.0)), NumericalFailure);
  CHECK_THROWS_AS(ops::sqrt(Tensor::scalar(-1.0)), NumericalFailure);
  CHECK_THROWS_AS(ops::div(Tensor::scalar(1.0), Tensor::scalar(0.0)),
                  NumericalFailure);
}

TEST_CASE("gradients match central differences across random instances") {
  std::size_t instances = 0;

  // Dense stacks through every activation.
  for (Act act : {Act::kIdentity, Act::kTanh, Act::kSigmoid, Act::kSilu,
                  Act::kMish, Act::kElu}) {
    for (std::uint64_t seed : {1ULL, 2ULL}) {
      Rng rng(seed);
      ParamStore ps;
      Dense d0 = make_dense(ps, "d0", 3, 5, rng);
      Dense d1 = make_dense(ps, "d1", 5, 2, rng);
      Tensor x = random_tensor(4, 3, rng);
      check_gradients(ps, [&] {
        return ops::mean(ops::square(d1(activate(d0(x), act))));
      });
      ++instances;
    }
  }

  // Elementwise/reduction op soup.
  for (std::uint64_t seed : {3ULL, 4ULL, 5ULL, 6ULL}) {
    Rng rng(seed);
    ParamStore ps;
    Tensor p = ps.create("p", 3, 4);
    for (double& v : p.data()) v = 0.5 * rng.normal();
    Tensor q = ps.create("q", 1, 4);
    for (double& v : q.data()) v = 0.3 * rng.normal();
    check_gradients(ps, [&] {
      Tensor a = ops::add(ops::mul(p, p), ops::repeat_rows(q, 3));
      Tensor b = ops::log_softmax_rows(a);
      Tensor c = ops::gather_cols(b, {0, 2});
      Tensor d = ops::concat_cols({c, ops::rowmean(a)});
      Tensor e = ops::log_normal_cdf(ops::scale(d, 0.7));
      Tensor f = ops::log1mexp(ops::clamp_max(e, -1e-3));
      return ops::add(ops::variance(f, 1), ops::mean(ops::sigmoid(d)));
    });
    ++instances;
  }

  // Flow density and reparametrized sampling paths, dims 1 and 3.
  for (std::size_t dim : {std::size_t{1}, std::size_t{3}}) {
    Rng rng(7 + dim);
    ParamStore ps;
    FlowConfig fc;
    fc.layers = 3;
    fc.hidden = 8;
    ConditionalFlow flow(ps, "f", dim, 2, fc, rng);
    // perturb away from the zero-init identity so gradients are nontrivial
    for (const auto& [name, p] : ps.items()) {
      Tensor shared = p;
      for (double& v : shared.data()) v += 0.05 * rng.normal();
    }
    Tensor x = random_tensor(5, dim, rng);
    Tensor cond = random_tensor(5, 2, rng);
    check_gradients(ps, [&] { return ops::mean(flow.log_prob(x, cond)); });
    ++instances;
    Tensor z = random_tensor(5, dim, rng);
    check_gradients(ps, [&] {
      auto [theta, lq] = flow.forward_with_log_prob(z, cond);
      return ops::add(ops::mean(ops::square(theta)), ops::mean(lq));
    });
    ++instances;
  }

  // Permutation-invariant and recurrent summaries.
  for (std::uint64_t seed : {11ULL, 12ULL}) {
    Rng rng(seed);
    ParamStore ps;
    DeepSetConfig dc;
    dc.eq_hidden = 6;
    dc.inv_hidden = 6;
    dc.out = 4;
    DeepSetSummary ds(ps, "s", 2, dc, rng);
    Tensor obs = random_tensor(7, 2, rng);
    check_gradients(ps, [&] { return ops::mean(ops::square(ds.summarize(obs))); });
    ++instances;
  }
  for (std::uint64_t seed : {13ULL, 14ULL}) {
    Rng rng(seed);
    ParamStore ps;
    GruConfig gc;
    gc.hidden = 5;
    gc.dense = 6;
    gc.out = 4;
    GruSummary gs(ps, "g", 3, gc, rng);
    Tensor obs = random_tensor(6, 3, rng);
    check_gradients(ps, [&] { return ops::mean(ops::square(gs.summarize(obs))); });
    ++instances;
  }

  CHECK(instances >= 20);
}

TEST_CASE("fresh tapes give fresh gradients") {
  Rng rng(1);
  ParamStore ps;
  Dense d = make_dense(ps, "d", 2, 1, rng);
  Tensor x = random_tensor(3, 2, rng);
  std::vector<double> first;
  {
    Tape tape;
    tape.backward(ops::mean(d(x)));
    first = ps.get("d.w").grad();
  }
  {
    Tape tape;
    tape.backward(ops::mean(d(x)));
    CHECK(ps.get("d.w").grad() == first);
  }
}
