#include "abmc/summary.hpp"

#include <stdexcept>

namespace abmc {

namespace {

void check_obs(const Tensor& obs, std::size_t in_dim) {
  if (!obs.defined() || obs.rows() == 0)
    throw std::invalid_argument("summarize: empty dataset");
  if (obs.cols() != in_dim)
    throw std::invalid_argument("summarize: observation width " +
                                std::to_string(obs.cols()) + " != " +
                                std::to_string(in_dim));
}

}  // namespace

Tensor SummaryNet::summarize_batch(const std::vector<Tensor>& obs) const {
  if (obs.empty()) throw std::invalid_argument("summarize_batch: empty batch");
  std::vector<Tensor> parts;
  parts.reserve(obs.size());
  for (const Tensor& o : obs) parts.push_back(summarize(o));
  return obs.size() == 1 ? parts[0] : ops::concat_rows(parts);
}

Tensor InvariantModule::operator()(const Tensor& x) const {
  Tensor h = activate(in1(activate(in0(x), act)), act);
  Tensor pooled = ops::colmean(h);
  return activate(out1(activate(out0(pooled), act)), act);
}

Tensor EquivariantModule::operator()(const Tensor& x) const {
  Tensor code = inv(x);
  Tensor cat = ops::concat_cols({x, ops::repeat_rows(code, x.rows())});
  return activate(d1(activate(d0(cat), act)), act);
}

namespace {

InvariantModule make_invariant(ParamStore& ps, const std::string& prefix,
                               std::size_t in, std::size_t hidden, Act act,
                               Rng& rng) {
  return {make_dense(ps, prefix + ".in0", in, hidden, rng),
          make_dense(ps, prefix + ".in1", hidden, hidden, rng),
          make_dense(ps, prefix + ".out0", hidden, hidden, rng),
          make_dense(ps, prefix + ".out1", hidden, hidden, rng), act};
}

EquivariantModule make_equivariant(ParamStore& ps, const std::string& prefix,
                                   std::size_t in, const DeepSetConfig& cfg,
                                   Rng& rng) {
  return {make_invariant(ps, prefix + ".inv", in, cfg.inv_hidden,
                         cfg.activation, rng),
          make_dense(ps, prefix + ".d0", in + cfg.inv_hidden, cfg.eq_hidden,
                     rng),
          make_dense(ps, prefix + ".d1", cfg.eq_hidden, cfg.eq_hidden, rng),
          cfg.activation};
}

}  // namespace

DeepSetSummary::DeepSetSummary(ParamStore& ps, const std::string& prefix,
                               std::size_t in_dim, const DeepSetConfig& cfg,
                               Rng& rng)
    : in_dim_(in_dim),
      cfg_(cfg),
      eq0_(make_equivariant(ps, prefix + ".eq0", in_dim, cfg, rng)),
      eq1_(make_equivariant(ps, prefix + ".eq1", cfg.eq_hidden, cfg, rng)),
      fin_(make_invariant(ps, prefix + ".fin", cfg.eq_hidden, cfg.inv_hidden,
                          cfg.activation, rng)),
      out_(make_dense(ps, prefix + ".out", cfg.inv_hidden, cfg.out, rng)) {}

Tensor DeepSetSummary::summarize(const Tensor& obs) const {
  check_obs(obs, in_dim_);
  return out_(fin_(eq1_(eq0_(obs))));
}

GruSummary::GruSummary(ParamStore& ps, const std::string& prefix,
                       std::size_t in_dim, const GruConfig& cfg, Rng& rng)
    : in_dim_(in_dim),
      cfg_(cfg),
      wz_(make_dense(ps, prefix + ".wz", in_dim, cfg.hidden, rng)),
      wr_(make_dense(ps, prefix + ".wr", in_dim, cfg.hidden, rng)),
      wh_(make_dense(ps, prefix + ".wh", in_dim, cfg.hidden, rng)),
      uz_(make_weight(ps, prefix + ".uz", cfg.hidden, cfg.hidden, rng)),
      ur_(make_weight(ps, prefix + ".ur", cfg.hidden, cfg.hidden, rng)),
      uh_(make_weight(ps, prefix + ".uh", cfg.hidden, cfg.hidden, rng)),
      d0_(make_dense(ps, prefix + ".d0", cfg.hidden, cfg.dense, rng)),
      out_(make_dense(ps, prefix + ".out", cfg.dense, cfg.out, rng)) {}

// All datasets must share a row count; rows are walked in order with the
// batch stacked along the first axis.
Tensor GruSummary::run(const std::vector<Tensor>& obs) const {
  const std::size_t batch = obs.size();
  const std::size_t steps = obs[0].rows();
  Tensor h(batch, cfg_.hidden);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor xt(batch, in_dim_);  // constant: raw observation rows
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < in_dim_; ++j)
        xt.at(b, j) = obs[b].at(t, j);
    Tensor z = ops::sigmoid(ops::add(wz_(xt), ops::matmul(h, uz_)));
    Tensor r = ops::sigmoid(ops::add(wr_(xt), ops::matmul(h, ur_)));
    Tensor cand =
        ops::tanh(ops::add(wh_(xt), ops::matmul(ops::mul(r, h), uh_)));
    h = ops::add(h, ops::mul(z, ops::sub(cand, h)));
  }
  return out_(activate(d0_(h), cfg_.activation));
}

Tensor GruSummary::summarize(const Tensor& obs) const {
  check_obs(obs, in_dim_);
  return run({obs});
}

Tensor GruSummary::summarize_batch(const std::vector<Tensor>& obs) const {
  if (obs.empty()) throw std::invalid_argument("summarize_batch: empty batch");
  for (const Tensor& o : obs) check_obs(o, in_dim_);
  for (const Tensor& o : obs)
    if (o.rows() != obs[0].rows()) return SummaryNet::summarize_batch(obs);
  return run(obs);
}

}  // namespace abmc
