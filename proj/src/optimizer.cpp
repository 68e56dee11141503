#include "abmc/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace abmc {

Tensor ParamStore::create(const std::string& name, std::size_t rows,
                          std::size_t cols) {
  return create(name, Tensor(rows, cols));
}

Tensor ParamStore::create(const std::string& name, Tensor init) {
  if (index_.count(name))
    throw std::logic_error("ParamStore: duplicate parameter '" + name + "'");
  init.set_requires_grad(true);
  init.set_name(name);
  index_[name] = items_.size();
  items_.emplace_back(name, init);
  moments_.push_back({std::vector<double>(init.size(), 0.0),
                      std::vector<double>(init.size(), 0.0)});
  return init;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return items_[it->second].second;
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& [_, t] : items_) n += t.size();
  return n;
}

void optimizer_step(ParamStore& store, double learning_rate) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const auto t = static_cast<double>(++store.step_count());
  const double bc1 = 1.0 - std::pow(kBeta1, t);
  const double bc2 = 1.0 - std::pow(kBeta2, t);
  auto& moments = store.moments();
  for (std::size_t p = 0; p < store.items().size(); ++p) {
    const auto& [name, param] = store.items()[p];
    auto& value = param.impl()->value;
    const auto& grad = param.impl()->grad;
    if (grad.size() != value.size())
      throw std::logic_error("optimizer_step: parameter '" + name +
                             "' has no gradient");
    auto& m = moments[p].m;
    auto& v = moments[p].v;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] + store.l2_coefficient * value[i];
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= learning_rate * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

}  // namespace abmc
