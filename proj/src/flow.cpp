#include "abmc/flow.hpp"

#include <stdexcept>

namespace abmc {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
}

ConditionalFlow::ConditionalFlow(ParamStore& ps, const std::string& prefix,
                                 std::size_t dim, std::size_t cond_dim,
                                 const FlowConfig& cfg, Rng& init_rng)
    : dim_(dim), cond_dim_(cond_dim), cfg_(cfg) {
  if (dim == 0 || cond_dim == 0)
    throw std::invalid_argument("ConditionalFlow: zero dimension");
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Layer layer;
    if (dim == 1) {
      layer.trans = {0};
    } else {
      for (std::size_t i = 0; i < dim; ++i) {
        if (i % 2 == l % 2)
          layer.trans.push_back(i);
        else
          layer.keep.push_back(i);
      }
    }
    layer.perm.resize(dim);
    std::size_t pos = 0;
    for (std::size_t i : layer.keep) layer.perm[i] = pos++;
    for (std::size_t i : layer.trans) layer.perm[i] = pos++;
    const std::size_t in = layer.keep.size() + cond_dim;
    const std::size_t t = layer.trans.size();
    const std::string base = prefix + ".l" + std::to_string(l);
    layer.h1 = make_dense(ps, base + ".h1", in, cfg.hidden, init_rng);
    layer.h2 = make_dense(ps, base + ".h2", cfg.hidden, cfg.hidden, init_rng);
    layer.head_s = make_dense_zero(ps, base + ".s", cfg.hidden, t);
    layer.head_t = make_dense_zero(ps, base + ".t", cfg.hidden, t);
    layers_.push_back(std::move(layer));
  }
}

std::pair<Tensor, Tensor> ConditionalFlow::scale_shift(
    const Layer& l, const Tensor* keep_x, const Tensor& cond) const {
  Tensor in = keep_x ? ops::concat_cols({*keep_x, cond}) : cond;
  Tensor h = activate(l.h2(activate(l.h1(in), cfg_.activation)),
                      cfg_.activation);
  // tanh clamp keeps log-scales in [-5, 5]; raw zero-init heads start at 0.
  Tensor s = ops::scale(ops::tanh(ops::scale(l.head_s(h), 0.2)), 5.0);
  return {s, l.head_t(h)};
}

Tensor ConditionalFlow::reassemble(const Layer& l, const Tensor& keep_x,
                                   const Tensor& trans_x) const {
  if (l.keep.empty()) return trans_x;
  return ops::gather_cols(ops::concat_cols({keep_x, trans_x}), l.perm);
}

Tensor ConditionalFlow::base_log_prob(const Tensor& z) const {
  return ops::add_const(ops::scale(ops::rowsum(ops::square(z)), -0.5),
                        -0.5 * kLogTwoPi * static_cast<double>(dim_));
}

std::pair<Tensor, Tensor> ConditionalFlow::forward_with_log_prob(
    const Tensor& z, const Tensor& cond) const {
  if (z.cols() != dim_ || cond.cols() != cond_dim_ || z.rows() != cond.rows())
    throw std::invalid_argument("flow forward: shape mismatch");
  Tensor x = z;
  Tensor log_scale_sum(z.rows(), 1);
  for (const Layer& l : layers_) {
    Tensor keep_x, trans_x;
    if (!l.keep.empty()) keep_x = ops::gather_cols(x, l.keep);
    trans_x = ops::gather_cols(x, l.trans);
    auto [s, t] = scale_shift(l, l.keep.empty() ? nullptr : &keep_x, cond);
    Tensor moved = ops::add(ops::mul(trans_x, ops::exp(s)), t);
    x = reassemble(l, keep_x, moved);
    log_scale_sum = ops::add(log_scale_sum, ops::rowsum(s));
  }
  Tensor log_q = ops::sub(base_log_prob(z), log_scale_sum);
  return {x, log_q};
}

Tensor ConditionalFlow::forward(const Tensor& z, const Tensor& cond) const {
  return forward_with_log_prob(z, cond).first;
}

std::pair<Tensor, Tensor> ConditionalFlow::inverse_with_log_scale(
    const Tensor& x, const Tensor& cond) const {
  if (x.cols() != dim_ || cond.cols() != cond_dim_ || x.rows() != cond.rows())
    throw std::invalid_argument("flow inverse: shape mismatch");
  Tensor z = x;
  Tensor log_scale_sum(x.rows(), 1);
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    const Layer& l = *it;
    Tensor keep_x, trans_x;
    if (!l.keep.empty()) keep_x = ops::gather_cols(z, l.keep);
    trans_x = ops::gather_cols(z, l.trans);
    auto [s, t] = scale_shift(l, l.keep.empty() ? nullptr : &keep_x, cond);
    Tensor moved = ops::mul(ops::sub(trans_x, t), ops::exp(ops::neg(s)));
    z = reassemble(l, keep_x, moved);
    log_scale_sum = ops::add(log_scale_sum, ops::rowsum(s));
  }
  return {z, log_scale_sum};
}

Tensor ConditionalFlow::inverse(const Tensor& x, const Tensor& cond) const {
  return inverse_with_log_scale(x, cond).first;
}

Tensor ConditionalFlow::log_prob(const Tensor& x, const Tensor& cond) const {
  auto [z, log_scale_sum] = inverse_with_log_scale(x, cond);
  return ops::sub(base_log_prob(z), log_scale_sum);
}

}  // namespace abmc
