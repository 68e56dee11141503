#pragma once

#include "abmc/rng.hpp"
#include "abmc/tensor.hpp"

namespace abmc {

// Biased (V-statistic) squared maximum mean discrepancy between a summary
// batch [B,w] and an equal-size reference batch, Gaussian kernel with the
// median-heuristic bandwidth of the joint batch. The bandwidth is treated as
// a constant in the gradient. Returns a scalar tensor.
Tensor mmd_penalty(const Tensor& summaries, const Tensor& reference);

// Draws the standard-normal reference batch of matching shape from `rng`.
Tensor mmd_penalty(const Tensor& summaries, Rng& rng);

}  // namespace abmc
