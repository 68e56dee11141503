#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace abmc {

// Thrown whenever a forward value or a gradient goes non-finite. Every op
// checks its outputs, so NaNs surface at the op that produced them instead of
// three modules later.
struct NumericalFailure : std::runtime_error {
  explicit NumericalFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct TensorImpl {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // last tape this tensor joined
  std::string name;           // set for parameters; used in diagnostics
};

// 2D row-major tensor handle. Copies share storage; ops build new tensors.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : impl_(std::make_shared<TensorImpl>()) {
    impl_->rows = rows;
    impl_->cols = cols;
    impl_->value.assign(rows * cols, fill);
  }

  static Tensor from(std::vector<double> v, std::size_t rows,
                     std::size_t cols) {
    if (v.size() != rows * cols)
      throw std::invalid_argument("Tensor::from: size mismatch");
    Tensor t(rows, cols);
    t.impl_->value = std::move(v);
    return t;
  }
  static Tensor scalar(double v) { return from({v}, 1, 1); }
  static Tensor row(std::vector<double> v) {
    const std::size_t n = v.size();
    return from(std::move(v), 1, n);
  }
  static Tensor column(std::vector<double> v) {
    const std::size_t n = v.size();
    return from(std::move(v), n, 1);
  }

  bool defined() const { return impl_ != nullptr; }
  std::size_t rows() const { return impl_->rows; }
  std::size_t cols() const { return impl_->cols; }
  std::size_t size() const { return impl_->value.size(); }

  double at(std::size_t i, std::size_t j) const {
    return impl_->value[i * impl_->cols + j];
  }
  double& at(std::size_t i, std::size_t j) {
    return impl_->value[i * impl_->cols + j];
  }
  double item() const {
    if (size() != 1) throw std::logic_error("Tensor::item: not a scalar");
    return impl_->value[0];
  }

  const std::vector<double>& data() const { return impl_->value; }
  std::vector<double>& data() { return impl_->value; }

  void set_requires_grad(bool b) { impl_->requires_grad = b; }
  bool requires_grad() const { return impl_->requires_grad; }
  const std::vector<double>& grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.assign(size(), 0.0); }

  void set_name(std::string n) { impl_->name = std::move(n); }
  const std::string& name() const { return impl_->name; }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Reverse-mode tape. Constructing one makes it active for the current thread;
// ops record backward closures onto it in creation order, which is a valid
// topological order, so backward() just walks them in reverse. Parameters get
// their gradient buffer zeroed the first time they join a tape, so each
// tape.backward() yields fresh gradients without a manual zero step.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Seeds d(loss)/d(loss) = 1 for a 1x1 loss, runs all recorded closures in
  // reverse, then verifies every joined gradient is finite. Throws
  // NumericalFailure naming the offending parameter otherwise. Single use.
  void backward(const Tensor& loss);

  static Tape* active();

  std::uint64_t id() const { return id_; }
  void record(std::function<void()> node) { nodes_.push_back(std::move(node)); }
  void join(const std::shared_ptr<TensorImpl>& t);
  bool tracked(const Tensor& t) const {
    return t.impl()->requires_grad || t.impl()->tape_id == id_;
  }

 private:
  std::uint64_t id_;
  bool used_ = false;
  std::vector<std::function<void()>> nodes_;
  std::vector<std::shared_ptr<TensorImpl>> joined_;
};

namespace ops {

// Elementwise with broadcasting over a unit dimension ([1,c], [r,1], [1,1]).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor expm1(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);  // linear above 30 to avoid exp overflow
Tensor mish(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor elu(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor log_normal_cdf(const Tensor& x);  // log Phi, stable far into the tail
Tensor log1mexp(const Tensor& x);        // log(1 - e^x) for x < 0
Tensor clamp_max(const Tensor& x, double cap);  // min(x, cap); zero grad above

Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);

Tensor sum(const Tensor& x);   // 1x1
Tensor mean(const Tensor& x);  // 1x1
Tensor colsum(const Tensor& x);   // [1,c], reduces over rows
Tensor colmean(const Tensor& x);  // [1,c]
Tensor rowsum(const Tensor& x);   // [r,1], reduces over cols
Tensor rowmean(const Tensor& x);  // [r,1]

// Sample variances (composite, so they differentiate).
Tensor variance(const Tensor& x, int ddof = 1);  // all elements, 1x1
Tensor colvar(const Tensor& x, int ddof = 1);    // per column, [1,c]

Tensor log_softmax_rows(const Tensor& x);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor repeat_rows(const Tensor& x, std::size_t n);  // [1,c] -> [n,c]
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx);
Tensor gather_cols(const Tensor& x, const std::vector<std::size_t>& idx);

// Escape hatch for ops with hand-derived gradients (the kernel-statistic
// loss uses it). `forward` fills the output value; `backward` reads the
// output gradient and accumulates into the inputs' gradients.
Tensor custom(const char* op, const std::vector<Tensor>& inputs,
              std::size_t rows, std::size_t cols,
              const std::function<void(Tensor&)>& forward,
              const std::function<void(const Tensor&)>& backward);

}  // namespace ops

inline Tensor operator+(const Tensor& a, const Tensor& b) {
  return ops::add(a, b);
}
inline Tensor operator-(const Tensor& a, const Tensor& b) {
  return ops::sub(a, b);
}
inline Tensor operator*(const Tensor& a, const Tensor& b) {
  return ops::mul(a, b);
}
inline Tensor operator-(const Tensor& x) { return ops::neg(x); }
inline Tensor operator*(double c, const Tensor& x) { return ops::scale(x, c); }
inline Tensor operator*(const Tensor& x, double c) { return ops::scale(x, c); }
inline Tensor operator+(const Tensor& x, double c) {
  return ops::add_const(x, c);
}
inline Tensor operator+(double c, const Tensor& x) {
  return ops::add_const(x, c);
}
inline Tensor operator-(const Tensor& x, double c) {
  return ops::add_const(x, -c);
}
inline Tensor operator-(double c, const Tensor& x) {
  return ops::add_const(ops::neg(x), c);
}

}  // namespace abmc
