#pragma once

#include <string>

#include "abmc/optimizer.hpp"
#include "abmc/rng.hpp"
#include "abmc/tensor.hpp"

namespace abmc {

enum class Act { kIdentity, kTanh, kSigmoid, kSilu, kMish, kElu };

Tensor activate(const Tensor& x, Act a);
const char* act_name(Act a);
Act act_from_name(const std::string& name);

// y = x W + b for row-batched inputs x [B,in].
struct Dense {
  Tensor w, b;
  Tensor operator()(const Tensor& x) const {
    return ops::add(ops::matmul(x, w), b);
  }
  std::size_t in_dim() const { return w.rows(); }
  std::size_t out_dim() const { return w.cols(); }
};

// Glorot-uniform weights, zero bias.
Dense make_dense(ParamStore& ps, const std::string& name, std::size_t in,
                 std::size_t out, Rng& rng);

// All-zero init; used for output heads so networks start at the identity map.
Dense make_dense_zero(ParamStore& ps, const std::string& name, std::size_t in,
                      std::size_t out);

// Bias-free Glorot weight matrix (recurrent connections).
Tensor make_weight(ParamStore& ps, const std::string& name, std::size_t in,
                   std::size_t out, Rng& rng);

}  // namespace abmc
