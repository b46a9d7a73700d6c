#include "m3dseg/numerics/tensor.hpp"

#include <cmath>
#include <sstream>

#if defined(__SSE__) || defined(__x86_64__)
#include <xmmintrin.h>
#endif

namespace m3dseg::numerics {

namespace {
Precision g_precision = Precision::f32;
bool g_checked = false;
bool g_deterministic = true;
}  // namespace

Precision global_precision() { return g_precision; }
void set_global_precision(Precision p) { g_precision = p; }
bool checked_mode() { return g_checked; }
void set_checked_mode(bool on) { g_checked = on; }
bool deterministic() { return g_deterministic; }
void set_deterministic(bool on) { g_deterministic = on; }

#if defined(__SSE__) || defined(__x86_64__)
FlushDenormalsScope::FlushDenormalsScope() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
FlushDenormalsScope::~FlushDenormalsScope() { _mm_setcsr(saved_); }
#else
FlushDenormalsScope::FlushDenormalsScope() = default;
FlushDenormalsScope::~FlushDenormalsScope() = default;
#endif

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Precision p)
    : shape_(std::move(shape)), precision_(p) {
  if (shape_.empty()) throw NumericsError("tensor shape must have at least one dimension");
  for (auto d : shape_) {
    if (d == 0) throw NumericsError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  size_ = shape_size(shape_);
  if (p == Precision::f32)
    storage_ = std::vector<float>(size_, 0.0f);
  else
    storage_ = std::vector<double>(size_, 0.0);
}

Tensor Tensor::zeros(Shape shape, Precision p) { return Tensor(std::move(shape), p); }

Tensor Tensor::full(Shape shape, double value, Precision p) {
  Tensor t(std::move(shape), p);
  t.fill(value);
  return t;
}

Tensor Tensor::from_values(Shape shape, std::span<const double> values, Precision p) {
  Tensor t(std::move(shape), p);
  if (values.size() != t.size())
    throw NumericsError("value count " + std::to_string(values.size()) +
                        " does not match shape " + shape_string(t.shape()));
  for (std::size_t i = 0; i < values.size(); ++i) t.set(i, values[i]);
  return t;
}

Tensor Tensor::from_values(Shape shape, std::initializer_list<double> values, Precision p) {
  return from_values(std::move(shape), std::span<const double>(values.begin(), values.size()), p);
}

Tensor Tensor::scalar(double value, Precision p) { return full({1}, value, p); }

double Tensor::at(std::size_t i) const {
  return std::visit([i](const auto& v) { return static_cast<double>(v.at(i)); }, storage_);
}

void Tensor::set(std::size_t i, double value) {
  std::visit(
      [i, value](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        v.at(i) = static_cast<T>(value);
      },
      storage_);
}

double Tensor::item() const {
  if (size_ != 1) throw NumericsError("item() on tensor of shape " + shape_string(shape_));
  return at(0);
}

std::vector<double> Tensor::to_vector() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, storage_);
}

Tensor Tensor::to(Precision p) const {
  if (p == precision_) return *this;
  Tensor out(shape_, p);
  for (std::size_t i = 0; i < size_; ++i) out.set(i, at(i));
  out.requires_grad_ = requires_grad_;
  return out;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size_)
    throw NumericsError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

void Tensor::fill(double value) {
  std::visit(
      [value](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        std::fill(v.begin(), v.end(), static_cast<T>(value));
      },
      storage_);
}

bool Tensor::all_finite() const {
  return std::visit(
      [](const auto& v) {
        for (auto x : v)
          if (!std::isfinite(x)) return false;
        return true;
      },
      storage_);
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape_ == b.shape_ && a.storage_ == b.storage_;
}

}  // namespace m3dseg::numerics
