#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

namespace dualopt {

// Dense 64-bit float array with row-major shape. Carries parameters,
// gradients and optimizer states. A default-constructed Buffer is the
// empty buffer (no shape, no data); any explicit shape must have
// positive extents and data.size() == product(shape).
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(std::vector<std::size_t> shape);
  Buffer(std::vector<std::size_t> shape, std::vector<double> data);

  static Buffer zeros(std::vector<std::size_t> shape) { return Buffer(std::move(shape)); }
  static Buffer full(std::vector<std::size_t> shape, double value);
  static Buffer from_vector(std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool is_matrix() const { return shape_.size() == 2; }
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  bool same_shape(const Buffer& other) const { return shape_ == other.shape_; }
  Buffer reshaped(std::vector<std::size_t> shape) const;

  bool all_finite() const;

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

void require_same_shape(const Buffer& a, const Buffer& b, const char* where);

// Entrywise map; unary and binary forms. Binary form rejects shape mismatch.
template <typename F>
Buffer elementwise(F&& op, const Buffer& a) {
  Buffer out = a;
  for (double& x : out) x = op(x);
  return out;
}

template <typename F>
Buffer elementwise(F&& op, const Buffer& a, const Buffer& b) {
  require_same_shape(a, b, "elementwise");
  Buffer out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = op(a[i], b[i]);
  return out;
}

template <typename F>
void elementwise_inplace(Buffer& a, F&& op) {
  for (double& x : a) x = op(x);
}

template <typename F>
void elementwise_inplace(Buffer& a, const Buffer& b, F&& op) {
  require_same_shape(a, b, "elementwise_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = op(a[i], b[i]);
}

Buffer add(const Buffer& a, const Buffer& b);
Buffer sub(const Buffer& a, const Buffer& b);
Buffer mul(const Buffer& a, const Buffer& b);
Buffer square(const Buffer& a);
Buffer scale(const Buffer& a, double alpha);
Buffer ones_like(const Buffer& a);
Buffer zeros_like(const Buffer& a);

// y += alpha * x, in place.
void axpy(Buffer& y, double alpha, const Buffer& x);

double dot(const Buffer& a, const Buffer& b);
double norm(const Buffer& a);
double max_abs(const Buffer& a);

// dot(a,b)/(|a||b|); returns 0 when either norm is below 1e-12 so
// diagnostic streams never abort on degenerate vectors.
double cosine_similarity(const Buffer& a, const Buffer& b);

// Standard product of an m-by-k and a k-by-n matrix.
Buffer matmul(const Buffer& a, const Buffer& b);

Buffer transpose(const Buffer& a);

}  // namespace dualopt
