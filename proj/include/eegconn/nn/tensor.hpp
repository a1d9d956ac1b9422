#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eegconn/types.hpp"

namespace eegconn::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor of doubles, up to 4 axes (batch, maps, height, width).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& at(std::size_t a, std::size_t b) { return values_[a * shape_[1] + b]; }
  double at(std::size_t a, std::size_t b) const { return values_[a * shape_[1] + b]; }
  double& at(std::size_t a, std::size_t b, std::size_t c) { return values_[(a * shape_[1] + b) * shape_[2] + c]; }
  double at(std::size_t a, std::size_t b, std::size_t c) const {
    return values_[(a * shape_[1] + b) * shape_[2] + c];
  }
  double& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return values_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  double at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return values_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  void reshape(Shape shape);  // element count must not change
  void fill(double v);

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  AlignedVector values_;
};

}  // namespace eegconn::nn
