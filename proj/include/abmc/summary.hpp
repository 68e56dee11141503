#pragma once

#include <string>
#include <vector>

#include "abmc/nn.hpp"
#include "abmc/optimizer.hpp"
#include "abmc/rng.hpp"
#include "abmc/tensor.hpp"

namespace abmc {

// Compresses a raw dataset [n, in_dim] into a fixed-width row [1, out_dim].
class SummaryNet {
 public:
  virtual ~SummaryNet() = default;
  virtual std::size_t in_dim() const = 0;
  virtual std::size_t out_dim() const = 0;
  virtual Tensor summarize(const Tensor& obs) const = 0;
  // Stacks per-dataset summaries into [B, out_dim]. Subclasses may override
  // with a faster batched path; results must match the per-dataset ones.
  virtual Tensor summarize_batch(const std::vector<Tensor>& obs) const;
};

// Dense stack pooled over rows: inner layers, column mean, outer layers.
struct InvariantModule {
  Dense in0, in1, out0, out1;
  Act act;
  Tensor operator()(const Tensor& x) const;
};

// Rows augmented with the pooled invariant code, then two dense layers.
struct EquivariantModule {
  InvariantModule inv;
  Dense d0, d1;
  Act act;
  Tensor operator()(const Tensor& x) const;
};

struct DeepSetConfig {
  std::size_t eq_hidden = 32;   // equivariant dense width
  std::size_t inv_hidden = 32;  // invariant-module dense width
  std::size_t out = 30;         // summary width
  Act activation = Act::kSilu;
};

// Permutation-invariant summary: two equivariant modules, a final invariant
// module, and a linear output layer.
class DeepSetSummary : public SummaryNet {
 public:
  DeepSetSummary(ParamStore& ps, const std::string& prefix, std::size_t in_dim,
                 const DeepSetConfig& cfg, Rng& rng);
  std::size_t in_dim() const override { return in_dim_; }
  std::size_t out_dim() const override { return cfg_.out; }
  const DeepSetConfig& config() const { return cfg_; }
  Tensor summarize(const Tensor& obs) const override;

 private:
  std::size_t in_dim_;
  DeepSetConfig cfg_;
  EquivariantModule eq0_, eq1_;
  InvariantModule fin_;
  Dense out_;
};

struct GruConfig {
  std::size_t hidden = 32;  // recurrent state width
  std::size_t dense = 64;   // post-recurrence dense width
  std::size_t out = 32;     // summary width
  Act activation = Act::kSilu;
};

// Sequential summary: gated recurrent encoder over the rows in order, final
// state passed through a dense layer and a linear output layer.
class GruSummary : public SummaryNet {
 public:
  GruSummary(ParamStore& ps, const std::string& prefix, std::size_t in_dim,
             const GruConfig& cfg, Rng& rng);
  std::size_t in_dim() const override { return in_dim_; }
  std::size_t out_dim() const override { return cfg_.out; }
  const GruConfig& config() const { return cfg_; }
  Tensor summarize(const Tensor& obs) const override;
  // Single recurrence over stacked rows when all datasets share a length.
  Tensor summarize_batch(const std::vector<Tensor>& obs) const override;

 private:
  Tensor run(const std::vector<Tensor>& obs) const;

  std::size_t in_dim_;
  GruConfig cfg_;
  Dense wz_, wr_, wh_;    // input projections (carry the gate biases)
  Tensor uz_, ur_, uh_;   // recurrent weights
  Dense d0_, out_;
};

}  // namespace abmc
