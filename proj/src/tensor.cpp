#include "abmc/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

#include "abmc/kernels.hpp"
#include "abmc/stats.hpp"

namespace abmc {

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_tape_counter{0};

void check_finite(const char* op, const Tensor& t) {
  for (double v : t.data()) {
    if (!std::isfinite(v))
      throw NumericalFailure(std::string(op) + ": produced a non-finite value");
  }
}

struct BinShape {
  std::size_t r, c;      // output
  std::size_t ar, ac, br, bc;
  std::size_t a_index(std::size_t i, std::size_t j) const {
    return (ar == 1 ? 0 : i) * ac + (ac == 1 ? 0 : j);
  }
  std::size_t b_index(std::size_t i, std::size_t j) const {
    return (br == 1 ? 0 : i) * bc + (bc == 1 ? 0 : j);
  }
};

BinShape bin_shape(const char* op, const Tensor& a, const Tensor& b) {
  auto compat = [](std::size_t x, std::size_t y) {
    return x == y || x == 1 || y == 1;
  };
  if (!compat(a.rows(), b.rows()) || !compat(a.cols(), b.cols()))
    throw std::invalid_argument(std::string(op) + ": incompatible shapes");
  return {std::max(a.rows(), b.rows()), std::max(a.cols(), b.cols()),
          a.rows(), a.cols(),           b.rows(), b.cols()};
}

// fwd: y from x;  dfdx: (x, y) -> dy/dx
template <typename Fwd, typename Dfdx>
Tensor unary_op(const char* op, const Tensor& x, Fwd fwd, Dfdx dfdx) {
  Tensor out(x.rows(), x.cols());
  const auto& xv = x.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = fwd(xv[i]);
  check_finite(op, out);
  if (Tape* tp = Tape::active(); tp && tp->tracked(x)) {
    tp->join(x.impl());
    tp->join(out.impl());
    auto xi = x.impl();
    auto oi = out.impl();
    tp->record([xi, oi, dfdx] {
      for (std::size_t i = 0; i < xi->value.size(); ++i)
        xi->grad[i] += oi->grad[i] * dfdx(xi->value[i], oi->value[i]);
    });
  }
  return out;
}

// op(a,b) elementwise with broadcasting; dfda/dfdb: (a, b) -> partials.
template <typename Fwd, typename Dfda, typename Dfdb>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, Fwd fwd,
                 Dfda dfda, Dfdb dfdb) {
  const BinShape s = bin_shape(op, a, b);
  Tensor out(s.r, s.c);
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < s.r; ++i)
    for (std::size_t j = 0; j < s.c; ++j)
      ov[i * s.c + j] = fwd(av[s.a_index(i, j)], bv[s.b_index(i, j)]);
  check_finite(op, out);
  Tape* tp = Tape::active();
  if (!tp) return out;
  const bool ta = tp->tracked(a), tb = tp->tracked(b);
  if (!ta && !tb) return out;
  if (ta) tp->join(a.impl());
  if (tb) tp->join(b.impl());
  tp->join(out.impl());
  auto ai = a.impl();
  auto bi = b.impl();
  auto oi = out.impl();
  tp->record([s, ai, bi, oi, ta, tb, dfda, dfdb] {
    for (std::size_t i = 0; i < s.r; ++i)
      for (std::size_t j = 0; j < s.c; ++j) {
        const double g = oi->grad[i * s.c + j];
        const double av = ai->value[s.a_index(i, j)];
        const double bv = bi->value[s.b_index(i, j)];
        if (ta) ai->grad[s.a_index(i, j)] += g * dfda(av, bv);
        if (tb) bi->grad[s.b_index(i, j)] += g * dfdb(av, bv);
      }
  });
  return out;
}

}  // namespace

Tape::Tape() : id_(++g_tape_counter) {
  if (g_active_tape)
    throw std::logic_error("Tape: nested tapes are not supported");
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = nullptr; }

Tape* Tape::active() { return g_active_tape; }

void Tape::join(const std::shared_ptr<TensorImpl>& t) {
  if (t->tape_id == id_) return;
  t->tape_id = id_;
  t->grad.assign(t->value.size(), 0.0);
  joined_.push_back(t);
}

void Tape::backward(const Tensor& loss) {
  if (used_) throw std::logic_error("Tape::backward: tape already used");
  used_ = true;
  if (loss.size() != 1)
    throw std::logic_error("Tape::backward: loss must be a scalar");
  if (loss.impl()->tape_id != id_)
    throw std::logic_error(
        "Tape::backward: loss does not depend on any tracked parameter");
  loss.impl()->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  const TensorImpl* bad_named = nullptr;
  const TensorImpl* bad_any = nullptr;
  for (const auto& t : joined_) {
    for (double g : t->grad) {
      if (!std::isfinite(g)) {
        if (!bad_any) bad_any = t.get();
        if (!t->name.empty() && !bad_named) bad_named = t.get();
        break;
      }
    }
    if (bad_named) break;
  }
  nodes_.clear();
  joined_.clear();
  if (bad_named)
    throw NumericalFailure("backward: non-finite gradient for parameter '" +
                           bad_named->name + "'");
  if (bad_any)
    throw NumericalFailure(
        "backward: non-finite gradient in an intermediate result");
}

namespace ops {

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions differ");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out(m, n);
  kernels::matmul_nn(a.data().data(), b.data().data(), out.data().data(), m, k,
                     n);
  check_finite("matmul", out);
  Tape* tp = Tape::active();
  if (!tp) return out;
  const bool ta = tp->tracked(a), tb = tp->tracked(b);
  if (!ta && !tb) return out;
  if (ta) tp->join(a.impl());
  if (tb) tp->join(b.impl());
  tp->join(out.impl());
  auto ai = a.impl();
  auto bi = b.impl();
  auto oi = out.impl();
  tp->record([ai, bi, oi, ta, tb, m, k, n] {
    if (ta)
      kernels::matmul_nt_acc(oi->grad.data(), bi->value.data(),
                             ai->grad.data(), m, n, k);
    if (tb)
      kernels::matmul_tn_acc(ai->value.data(), oi->grad.data(),
                             bi->grad.data(), k, m, n);
  });
  return out;
}

Tensor neg(const Tensor& x) {
  return unary_op(
      "neg", x, [](double v) { return -v; },
      [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary_op(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor expm1(const Tensor& x) {
  return unary_op(
      "expm1", x, [](double v) { return std::expm1(v); },
      [](double, double y) { return y + 1.0; });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

namespace {
inline double sigmoid_val(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                  : std::exp(v) / (1.0 + std::exp(v));
}
inline double softplus_val(double v) {
  return v > 30.0 ? v : std::log1p(std::exp(v));
}
}  // namespace

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      "sigmoid", x, [](double v) { return sigmoid_val(v); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
  return unary_op(
      "softplus", x, [](double v) { return softplus_val(v); },
      [](double v, double) { return v > 30.0 ? 1.0 : sigmoid_val(v); });
}

Tensor mish(const Tensor& x) {
  return unary_op(
      "mish", x,
      [](double v) { return v * std::tanh(softplus_val(v)); },
      [](double v, double) {
        const double th = std::tanh(softplus_val(v));
        return th + v * (1.0 - th * th) * sigmoid_val(v);
      });
}

Tensor silu(const Tensor& x) {
  return unary_op(
      "silu", x, [](double v) { return v * sigmoid_val(v); },
      [](double v, double) {
        const double s = sigmoid_val(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor elu(const Tensor& x) {
  return unary_op(
      "elu", x, [](double v) { return v > 0.0 ? v : std::expm1(v); },
      [](double v, double y) { return v > 0.0 ? 1.0 : y + 1.0; });
}

Tensor square(const Tensor& x) {
  return unary_op(
      "square", x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  return unary_op(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor log_normal_cdf(const Tensor& x) {
  return unary_op(
      "log_normal_cdf", x,
      [](double v) { return ::abmc::log_normal_cdf(v); },
      [](double v, double) { return ::abmc::normal_cdf_log_derivative(v); });
}

Tensor log1mexp(const Tensor& x) {
  return unary_op(
      "log1mexp", x,
      [](double v) {
        return v < -std::numbers::ln2 ? std::log1p(-std::exp(v))
                                      : std::log(-std::expm1(v));
      },
      [](double v, double y) { return -std::exp(v - y); });
}

Tensor clamp_max(const Tensor& x, double cap) {
  return unary_op(
      "clamp_max", x, [cap](double v) { return v < cap ? v : cap; },
      [cap](double v, double) { return v < cap ? 1.0 : 0.0; });
}

Tensor scale(const Tensor& x, double c) {
  return unary_op(
      "scale", x, [c](double v) { return c * v; },
      [c](double, double) { return c; });
}

Tensor add_const(const Tensor& x, double c) {
  return unary_op(
      "add_const", x, [c](double v) { return v + c; },
      [](double, double) { return 1.0; });
}

namespace {

Tensor reduce_op(const char* op, const Tensor& x, std::size_t out_r,
                 std::size_t out_c, double w) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(out_r, out_c);
  auto& ov = out.data();
  const auto& xv = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t oi = (out_r == 1 ? 0 : i) * out_c + (out_c == 1 ? 0 : j);
      ov[oi] += w * xv[i * c + j];
    }
  check_finite(op, out);
  if (Tape* tp = Tape::active(); tp && tp->tracked(x)) {
    tp->join(x.impl());
    tp->join(out.impl());
    auto xi = x.impl();
    auto oi = out.impl();
    tp->record([xi, oi, r, c, out_r, out_c, w] {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const std::size_t k =
              (out_r == 1 ? 0 : i) * out_c + (out_c == 1 ? 0 : j);
          xi->grad[i * c + j] += w * oi->grad[k];
        }
    });
  }
  return out;
}

}  // namespace

Tensor sum(const Tensor& x) { return reduce_op("sum", x, 1, 1, 1.0); }
Tensor mean(const Tensor& x) {
  return reduce_op("mean", x, 1, 1, 1.0 / static_cast<double>(x.size()));
}
Tensor colsum(const Tensor& x) {
  return reduce_op("colsum", x, 1, x.cols(), 1.0);
}
Tensor colmean(const Tensor& x) {
  return reduce_op("colmean", x, 1, x.cols(),
                   1.0 / static_cast<double>(x.rows()));
}
Tensor rowsum(const Tensor& x) {
  return reduce_op("rowsum", x, x.rows(), 1, 1.0);
}
Tensor rowmean(const Tensor& x) {
  return reduce_op("rowmean", x, x.rows(), 1,
                   1.0 / static_cast<double>(x.cols()));
}

Tensor variance(const Tensor& x, int ddof) {
  const auto n = static_cast<double>(x.size());
  if (n <= ddof) throw std::invalid_argument("variance: too few elements");
  Tensor centered = sub(x, mean(x));
  return scale(sum(mul(centered, centered)), 1.0 / (n - ddof));
}

Tensor colvar(const Tensor& x, int ddof) {
  const auto n = static_cast<double>(x.rows());
  if (n <= ddof) throw std::invalid_argument("colvar: too few rows");
  Tensor centered = sub(x, colmean(x));
  return scale(colsum(mul(centered, centered)), 1.0 / (n - ddof));
}

Tensor log_softmax_rows(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(r, c);
  const auto& xv = x.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < r; ++i) {
    double m = xv[i * c];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, xv[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(xv[i * c + j] - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < c; ++j) ov[i * c + j] = xv[i * c + j] - lse;
  }
  check_finite("log_softmax_rows", out);
  if (Tape* tp = Tape::active(); tp && tp->tracked(x)) {
    tp->join(x.impl());
    tp->join(out.impl());
    auto xi = x.impl();
    auto oi = out.impl();
    tp->record([xi, oi, r, c] {
      for (std::size_t i = 0; i < r; ++i) {
        double gsum = 0.0;
        for (std::size_t j = 0; j < c; ++j) gsum += oi->grad[i * c + j];
        for (std::size_t j = 0; j < c; ++j)
          xi->grad[i * c + j] +=
              oi->grad[i * c + j] - std::exp(oi->value[i * c + j]) * gsum;
      }
    });
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c)
      throw std::invalid_argument("concat_rows: column mismatch");
    r += p.rows();
  }
  Tensor out(r, c);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.data().begin() + off);
    off += p.size();
  }
  check_finite("concat_rows", out);
  Tape* tp = Tape::active();
  if (!tp) return out;
  bool any = false;
  for (const auto& p : parts) any = any || tp->tracked(p);
  if (!any) return out;
  std::vector<std::shared_ptr<TensorImpl>> impls;
  std::vector<bool> trk;
  for (const auto& p : parts) {
    trk.push_back(tp->tracked(p));
    if (trk.back()) tp->join(p.impl());
    impls.push_back(p.impl());
  }
  tp->join(out.impl());
  auto oi = out.impl();
  tp->record([impls, trk, oi] {
    std::size_t off = 0;
    for (std::size_t k = 0; k < impls.size(); ++k) {
      const std::size_t sz = impls[k]->value.size();
      if (trk[k])
        for (std::size_t i = 0; i < sz; ++i)
          impls[k]->grad[i] += oi->grad[off + i];
      off += sz;
    }
  });
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const std::size_t r = parts.front().rows();
  std::size_t c = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
    c += p.cols();
  }
  Tensor out(r, c);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      std::copy(p.data().begin() + i * p.cols(),
                p.data().begin() + (i + 1) * p.cols(),
                out.data().begin() + i * c + off);
    off += p.cols();
  }
  check_finite("concat_cols", out);
  Tape* tp = Tape::active();
  if (!tp) return out;
  bool any = false;
  for (const auto& p : parts) any = any || tp->tracked(p);
  if (!any) return out;
  std::vector<std::shared_ptr<TensorImpl>> impls;
  std::vector<bool> trk;
  for (const auto& p : parts) {
    trk.push_back(tp->tracked(p));
    if (trk.back()) tp->join(p.impl());
    impls.push_back(p.impl());
  }
  tp->join(out.impl());
  auto oi = out.impl();
  tp->record([impls, trk, oi, r, c] {
    std::size_t off = 0;
    for (std::size_t k = 0; k < impls.size(); ++k) {
      const std::size_t pc = impls[k]->cols;
      if (trk[k])
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < pc; ++j)
            impls[k]->grad[i * pc + j] += oi->grad[i * c + off + j];
      off += pc;
    }
  });
  return out;
}

Tensor repeat_rows(const Tensor& x, std::size_t n) {
  if (x.rows() != 1) throw std::invalid_argument("repeat_rows: need one row");
  const std::size_t c = x.cols();
  Tensor out(n, c);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(x.data().begin(), x.data().end(), out.data().begin() + i * c);
  check_finite("repeat_rows", out);
  if (Tape* tp = Tape::active(); tp && tp->tracked(x)) {
    tp->join(x.impl());
    tp->join(out.impl());
    auto xi = x.impl();
    auto oi = out.impl();
    tp->record([xi, oi, n, c] {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j)
          xi->grad[j] += oi->grad[i * c + j];
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx) {
  const std::size_t c = x.cols();
  Tensor out(idx.size(), c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.rows())
      throw std::out_of_range("gather_rows: index out of range");
    std::copy(x.data().begin() + idx[i] * c, x.data().begin() + (idx[i] + 1) * c,
              out.data().begin() + i * c);
  }
  check_finite("gather_rows", out);
  if (Tape* tp = Tape::active(); tp && tp->tracked(x)) {
    tp->join(x.impl());
    tp->join(out.impl());
    auto xi = x.impl();
    auto oi = out.impl();
    tp->record([xi, oi, idx, c] {
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < c; ++j)
          xi->grad[idx[i] * c + j] += oi->grad[i * c + j];
    });
  }
  return out;
}

Tensor gather_cols(const Tensor& x, const std::vector<std::size_t>& idx) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(r, idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= c) throw std::out_of_range("gather_cols: index out of range");
    for (std::size_t i = 0; i < r; ++i)
      out.data()[i * idx.size() + j] = x.data()[i * c + idx[j]];
  }
  check_finite("gather_cols", out);
  if (Tape* tp = Tape::active(); tp && tp->tracked(x)) {
    tp->join(x.impl());
    tp->join(out.impl());
    auto xi = x.impl();
    auto oi = out.impl();
    tp->record([xi, oi, idx, r, c] {
      for (std::size_t j = 0; j < idx.size(); ++j)
        for (std::size_t i = 0; i < r; ++i)
          xi->grad[i * c + idx[j]] += oi->grad[i * idx.size() + j];
    });
  }
  return out;
}

Tensor custom(const char* op, const std::vector<Tensor>& inputs,
              std::size_t rows, std::size_t cols,
              const std::function<void(Tensor&)>& forward,
              const std::function<void(const Tensor&)>& backward) {
  Tensor out(rows, cols);
  forward(out);
  check_finite(op, out);
  Tape* tp = Tape::active();
  if (!tp) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || tp->tracked(in);
  if (!any) return out;
  for (const auto& in : inputs) tp->join(in.impl());
  tp->join(out.impl());
  tp->record([backward, out] { backward(out); });
  return out;
}

}  // namespace ops

}  // namespace abmc
