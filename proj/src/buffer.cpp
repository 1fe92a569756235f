#include "dualopt/buffer.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dualopt {

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("Buffer: shape extents must be positive");
    n *= d;
  }
  return shape.empty() ? 0 : n;
}

std::string shape_str(const std::vector<std::size_t>& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

}  // namespace

Buffer::Buffer(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

Buffer::Buffer(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_numel(shape_) != data_.size())
    throw std::invalid_argument("Buffer: data length does not match shape " + shape_str(shape_));
}

Buffer Buffer::full(std::vector<std::size_t> shape, double value) {
  Buffer b(std::move(shape));
  for (double& x : b) x = value;
  return b;
}

Buffer Buffer::from_vector(std::vector<double> data) {
  std::vector<std::size_t> shape{data.size()};
  return Buffer(std::move(shape), std::move(data));
}

std::size_t Buffer::rows() const {
  if (!is_matrix()) throw std::invalid_argument("Buffer: rows() on non-matrix shape " + shape_str(shape_));
  return shape_[0];
}

std::size_t Buffer::cols() const {
  if (!is_matrix()) throw std::invalid_argument("Buffer: cols() on non-matrix shape " + shape_str(shape_));
  return shape_[1];
}

double& Buffer::at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
double Buffer::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

Buffer Buffer::reshaped(std::vector<std::size_t> shape) const {
  Buffer out(std::move(shape), data_);
  return out;
}

bool Buffer::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

void require_same_shape(const Buffer& a, const Buffer& b, const char* where) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(where) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

Buffer add(const Buffer& a, const Buffer& b) {
  return elementwise([](double x, double y) { return x + y; }, a, b);
}

Buffer sub(const Buffer& a, const Buffer& b) {
  return elementwise([](double x, double y) { return x - y; }, a, b);
}

Buffer mul(const Buffer& a, const Buffer& b) {
  return elementwise([](double x, double y) { return x * y; }, a, b);
}

Buffer square(const Buffer& a) {
  return elementwise([](double x) { return x * x; }, a);
}

Buffer scale(const Buffer& a, double alpha) {
  return elementwise([alpha](double x) { return alpha * x; }, a);
}

Buffer ones_like(const Buffer& a) { return Buffer::full(a.shape(), 1.0); }
Buffer zeros_like(const Buffer& a) { return Buffer::zeros(a.shape()); }

void axpy(Buffer& y, double alpha, const Buffer& x) {
  require_same_shape(y, x, "axpy");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

double dot(const Buffer& a, const Buffer& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Buffer& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Buffer& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

double cosine_similarity(const Buffer& a, const Buffer& b) {
  require_same_shape(a, b, "cosine_similarity");
  const double na = norm(a);
  const double nb = norm(b);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return dot(a, b) / (na * nb);
}

Buffer matmul(const Buffer& a, const Buffer& b) {
  if (!a.is_matrix() || !b.is_matrix())
    throw std::invalid_argument("matmul: both operands must be matrices");
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree (" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + ")");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Buffer out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * b[p * n + j];
    }
  return out;
}

Buffer transpose(const Buffer& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Buffer out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

}  // namespace dualopt
