#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "abmc/tensor.hpp"

namespace abmc {

// Named trainable tensors plus the adaptive-moment optimizer state that goes
// with them. Creation order is the canonical parameter order (checkpoints and
// the optimizer both rely on it).
class ParamStore {
 public:
  Tensor create(const std::string& name, std::size_t rows, std::size_t cols);
  Tensor create(const std::string& name, Tensor init);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const {
    return index_.count(name) != 0;
  }
  std::size_t count() const { return items_.size(); }
  std::size_t total_values() const;

  const std::vector<std::pair<std::string, Tensor>>& items() const {
    return items_;
  }

  // L2 penalty coefficient, applied as an added gradient (coeff * parameter)
  // at each optimizer step; 0 disables it.
  double l2_coefficient = 0.0;

  struct Moments {
    std::vector<double> m, v;
  };
  std::vector<Moments>& moments() { return moments_; }
  std::uint64_t& step_count() { return step_count_; }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Moments> moments_;
  std::uint64_t step_count_ = 0;
};

// One Adam update (beta1=0.9, beta2=0.999, eps=1e-8, bias-corrected) over all
// parameters in the store. Every parameter must carry a gradient from a
// backward pass; a missing gradient is a wiring bug and throws.
void optimizer_step(ParamStore& store, double learning_rate);

}  // namespace abmc
