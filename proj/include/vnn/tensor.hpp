#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "vnn/errors.hpp"

namespace vnn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);

// Dense row-major (last axis fastest) array of doubles. Rank >= 1, every
// extent >= 1. No broadcasting: mixed shapes are ShapeErrors.
class Tensor {
 public:
  // A single zero, so containers of tensors can be default-constructed.
  Tensor();
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::vector<std::size_t> strides() const;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  std::size_t offset(std::span<const std::size_t> index) const;
  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);
  double operator[](std::size_t flat) const noexcept { return data_[flat]; }
  double& operator[](std::size_t flat) noexcept { return data_[flat]; }

  // Copy of the sub-block [origin, origin + extents). No implicit padding.
  Tensor window(std::span<const std::size_t> origin, std::span<const std::size_t> extents) const;
  Tensor window(std::initializer_list<std::size_t> origin,
                std::initializer_list<std::size_t> extents) const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

double l1_norm(const Tensor& t);
double max_abs(const Tensor& t);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double alpha, const Tensor& t);

}  // namespace vnn
