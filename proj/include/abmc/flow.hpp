#pragma once

#include <string>
#include <utility>
#include <vector>

#include "abmc/nn.hpp"
#include "abmc/optimizer.hpp"
#include "abmc/rng.hpp"
#include "abmc/tensor.hpp"

namespace abmc {

struct FlowConfig {
  std::size_t layers = 6;
  std::size_t hidden = 64;
  Act activation = Act::kMish;
};

// Conditional affine coupling flow between a standard-normal base and the
// target, conditioned on a per-row vector. Coordinates alternate between the
// transformed and untouched halves across layers; at dim 1 every layer is a
// conditional affine map of the single coordinate (there is nothing to mask).
// Subnet output heads start at zero, so the whole flow starts as the identity.
class ConditionalFlow {
 public:
  ConditionalFlow(ParamStore& ps, const std::string& prefix, std::size_t dim,
                  std::size_t cond_dim, const FlowConfig& cfg, Rng& init_rng);

  std::size_t dim() const { return dim_; }
  std::size_t cond_dim() const { return cond_dim_; }
  const FlowConfig& config() const { return cfg_; }

  // log q(x | cond) for row-paired x [S,d] and cond [S,m]; returns [S,1].
  Tensor log_prob(const Tensor& x, const Tensor& cond) const;

  // Push base noise z through the flow. The returned log-density is computed
  // along the same path (no re-inversion), which matches log_prob up to
  // round-trip rounding. Gradients pass through the transform, so sampling is
  // reparametrized.
  std::pair<Tensor, Tensor> forward_with_log_prob(const Tensor& z,
                                                  const Tensor& cond) const;

  Tensor forward(const Tensor& z, const Tensor& cond) const;
  Tensor inverse(const Tensor& x, const Tensor& cond) const;

 private:
  struct Layer {
    std::vector<std::size_t> keep, trans, perm;
    Dense h1, h2, head_s, head_t;
  };

  std::pair<Tensor, Tensor> scale_shift(const Layer& l, const Tensor* keep_x,
                                        const Tensor& cond) const;
  Tensor reassemble(const Layer& l, const Tensor& keep_x,
                    const Tensor& trans_x) const;
  // (z, sum of log-scales per row) from the density-direction pass.
  std::pair<Tensor, Tensor> inverse_with_log_scale(const Tensor& x,
                                                   const Tensor& cond) const;
  Tensor base_log_prob(const Tensor& z) const;

  std::size_t dim_, cond_dim_;
  FlowConfig cfg_;
  std::vector<Layer> layers_;
};

}  // namespace abmc
