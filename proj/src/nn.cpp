#include "abmc/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace abmc {

Tensor activate(const Tensor& x, Act a) {
  switch (a) {
    case Act::kIdentity: return x;
    case Act::kTanh: return ops::tanh(x);
    case Act::kSigmoid: return ops::sigmoid(x);
    case Act::kSilu: return ops::silu(x);
    case Act::kMish: return ops::mish(x);
    case Act::kElu: return ops::elu(x);
  }
  throw std::logic_error("activate: unknown activation");
}

const char* act_name(Act a) {
  switch (a) {
    case Act::kIdentity: return "identity";
    case Act::kTanh: return "tanh";
    case Act::kSigmoid: return "sigmoid";
    case Act::kSilu: return "silu";
    case Act::kMish: return "mish";
    case Act::kElu: return "elu";
  }
  throw std::logic_error("act_name: unknown activation");
}

Act act_from_name(const std::string& name) {
  if (name == "identity") return Act::kIdentity;
  if (name == "tanh") return Act::kTanh;
  if (name == "sigmoid") return Act::kSigmoid;
  if (name == "silu") return Act::kSilu;
  if (name == "mish") return Act::kMish;
  if (name == "elu") return Act::kElu;
  throw std::invalid_argument("act_from_name: unknown activation '" + name +
                              "'");
}

Dense make_dense(ParamStore& ps, const std::string& name, std::size_t in,
                 std::size_t out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor w(in, out);
  for (double& v : w.data()) v = (2.0 * rng.uniform() - 1.0) * limit;
  return {ps.create(name + ".w", w), ps.create(name + ".b", 1, out)};
}

Dense make_dense_zero(ParamStore& ps, const std::string& name, std::size_t in,
                      std::size_t out) {
  return {ps.create(name + ".w", in, out), ps.create(name + ".b", 1, out)};
}

Tensor make_weight(ParamStore& ps, const std::string& name, std::size_t in,
                   std::size_t out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor w(in, out);
  for (double& v : w.data()) v = (2.0 * rng.uniform() - 1.0) * limit;
  return ps.create(name, w);
}

}  // namespace abmc
