#include "vnn/tensor.hpp"

#include <cmath>
#include <string>

namespace vnn {
namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  for (std::size_t axis = 0; axis < shape.size(); ++axis) {
    if (shape[axis] == 0) throw ShapeError("zero extent on axis " + std::to_string(axis));
  }
}

std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

void check_same_shape(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

Tensor::Tensor() : shape_{1}, data_(1, 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_string(shape_) + " needs " + std::to_string(shape_size(shape_)) +
                     " elements, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::zeros(Shape shape) {
  check_shape(shape);
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

std::vector<std::size_t> Tensor::strides() const {
  std::vector<std::size_t> s(shape_.size());
  std::size_t step = 1;
  for (std::size_t axis = shape_.size(); axis-- > 0;) {
    s[axis] = step;
    step *= shape_[axis];
  }
  return s;
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw ShapeError("index rank does not match tensor rank");
  std::size_t flat = 0;
  for (std::size_t axis = 0; axis < shape_.size(); ++axis) {
    if (index[axis] >= shape_[axis]) {
      throw BoundsError("index " + std::to_string(index[axis]) + " out of range on axis " +
                        std::to_string(axis));
    }
    flat = flat * shape_[axis] + index[axis];
  }
  return flat;
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

Tensor Tensor::window(std::span<const std::size_t> origin, std::span<const std::size_t> extents) const {
  if (origin.size() != rank() || extents.size() != rank()) {
    throw ShapeError("window rank does not match tensor rank");
  }
  Shape out_shape(extents.begin(), extents.end());
  for (std::size_t axis = 0; axis < rank(); ++axis) {
    if (extents[axis] == 0 || origin[axis] + extents[axis] > shape_[axis]) {
      throw BoundsError("window exceeds tensor bounds on axis " + std::to_string(axis));
    }
  }
  Tensor out = zeros(out_shape);
  const auto src_strides = strides();
  // Copy contiguous rows along the last axis.
  const std::size_t row = extents.back();
  const std::size_t rows = out.size() / row;
  std::vector<std::size_t> counter(rank(), 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t src = 0;
    for (std::size_t axis = 0; axis < rank(); ++axis) src += (origin[axis] + counter[axis]) * src_strides[axis];
    for (std::size_t i = 0; i < row; ++i) out.data_[r * row + i] = data_[src + i];
    for (std::size_t axis = rank() - 1; axis-- > 0;) {
      if (++counter[axis] < extents[axis]) break;
      counter[axis] = 0;
    }
  }
  return out;
}

Tensor Tensor::window(std::initializer_list<std::size_t> origin,
                      std::initializer_list<std::size_t> extents) const {
  return window(std::span<const std::size_t>(origin.begin(), origin.size()),
                std::span<const std::size_t>(extents.begin(), extents.size()));
}

double l1_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += std::abs(v);
  return s;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor operator*(double alpha, const Tensor& t) {
  Tensor out = t;
  for (auto& v : out.data()) v *= alpha;
  return out;
}

}  // namespace vnn
