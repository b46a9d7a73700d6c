#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace m3dseg::numerics {

/// Scalar precision of newly created tensors. Training runs use f32; the
/// gradient-check suites switch to f64.
enum class Precision { f32, f64 };

Precision global_precision();
void set_global_precision(Precision p);

/// NaN/Inf detection on every op output when enabled.
bool checked_mode();
void set_checked_mode(bool on);

/// When on (the default) no op performs a parallel reduction. The OpenMP
/// kernels only split work over independent output elements, so they are
/// allowed in both modes; anything that would merge partial sums across
/// threads must consult this flag.
bool deterministic();
void set_deterministic(bool on);

class PrecisionScope {
 public:
  explicit PrecisionScope(Precision p) : saved_(global_precision()) { set_global_precision(p); }
  ~PrecisionScope() { set_global_precision(saved_); }
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  Precision saved_;
};

/// Flushes subnormal floats to zero on this thread while alive. Saturated
/// sigmoids otherwise push backward passes into slow subnormal arithmetic.
class FlushDenormalsScope {
 public:
  FlushDenormalsScope();
  ~FlushDenormalsScope();
  FlushDenormalsScope(const FlushDenormalsScope&) = delete;
  FlushDenormalsScope& operator=(const FlushDenormalsScope&) = delete;

 private:
  unsigned saved_ = 0;
};

class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor. Storage precision is fixed at construction.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Precision p = global_precision());

  static Tensor zeros(Shape shape, Precision p = global_precision());
  static Tensor full(Shape shape, double value, Precision p = global_precision());
  static Tensor from_values(Shape shape, std::span<const double> values,
                            Precision p = global_precision());
  static Tensor from_values(Shape shape, std::initializer_list<double> values,
                            Precision p = global_precision());
  static Tensor scalar(double value, Precision p = global_precision());

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  Precision precision() const { return precision_; }

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool on) {
    requires_grad_ = on;
    return *this;
  }

  template <class T>
  std::span<T> data() {
    return std::get<std::vector<T>>(storage_);
  }
  template <class T>
  std::span<const T> data() const {
    return std::get<std::vector<T>>(storage_);
  }

  double at(std::size_t i) const;
  void set(std::size_t i, double value);
  double item() const;

  std::vector<double> to_vector() const;
  Tensor to(Precision p) const;
  /// Same data, different shape of equal element count.
  Tensor reshaped(Shape shape) const;

  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Shape shape_;
  std::size_t size_ = 0;
  Precision precision_ = Precision::f32;
  bool requires_grad_ = false;
  std::variant<std::vector<float>, std::vector<double>> storage_;
};

/// Invokes `fn.template operator()<T>()` with T matching the precision.
template <class Fn>
decltype(auto) dispatch(Precision p, Fn&& fn) {
  if (p == Precision::f32) return fn.template operator()<float>();
  return fn.template operator()<double>();
}

}  // namespace m3dseg::numerics
