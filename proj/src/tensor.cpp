#include "hypercurv/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "hypercurv/error.hpp"

namespace hypercurv {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.size() > 2) {
    throw ContractViolation("tensor rank above 2 is not supported: " + shape_to_string(shape));
  }
  for (auto d : shape) {
    if (d == 0) throw ContractViolation("tensor dimensions must be positive: " + shape_to_string(shape));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) +
                            " vs " + shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw ContractViolation("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_to_string(shape_));
  }
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor Tensor::vector(std::vector<double> v) {
  const auto n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor(Shape{rows, cols}, std::move(v));
}

std::size_t Tensor::rows() const { return shape_.size() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const {
  if (shape_.empty()) return 1;
  return shape_.back();
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ContractViolation("item() on tensor of shape " + shape_to_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ContractViolation("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::row(std::size_t r) const {
  const auto c = cols();
  if (r >= rows()) throw ContractViolation("row index out of range");
  return Tensor(Shape{c}, std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(r * c),
                                              data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * c)));
}

void Tensor::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (!on) grad_.reset();
}

void Tensor::set_grad(std::vector<double> g) {
  if (g.size() != data_.size()) throw ContractViolation("gradient length does not match tensor");
  grad_ = std::move(g);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw ContractViolation("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(const Tensor& a) { return dot(a, a); }
double norm(const Tensor& a) { return std::sqrt(squared_norm(a)); }

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "operator+");
  Tensor out(a.shape(), std::vector<double>(a.storage()));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "operator-");
  Tensor out(a.shape(), std::vector<double>(a.storage()));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b[i];
  return out;
}

Tensor operator-(const Tensor& a) { return -1.0 * a; }

Tensor operator*(double s, const Tensor& a) {
  Tensor out(a.shape(), std::vector<double>(a.storage()));
  for (auto& v : out.storage()) v *= s;
  return out;
}

Tensor operator*(const Tensor& a, double s) { return s * a; }
Tensor operator/(const Tensor& a, double s) { return (1.0 / s) * a; }

Tensor axpy(const Tensor& a, double s, const Tensor& b) {
  require_same_shape(a, b, "axpy");
  Tensor out(a.shape(), std::vector<double>(a.storage()));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += s * b[i];
  return out;
}

}  // namespace hypercurv
