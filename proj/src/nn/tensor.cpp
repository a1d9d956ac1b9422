#include "eegconn/nn/tensor.hpp"

#include <algorithm>

#include "eegconn/errors.hpp"

namespace eegconn::nn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {
  if (shape_.empty() || shape_.size() > 4) throw ConfigError("tensor rank must be 1..4");
  for (auto d : shape_) {
    if (d == 0) throw ConfigError("tensor axes must be positive");
  }
}

Tensor::Tensor(Shape shape, std::vector<double> values) : Tensor(std::move(shape)) {
  if (values.size() != values_.size()) throw ConfigError("tensor value count does not match shape");
  values_.assign(values.begin(), values.end());
}

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != values_.size()) {
    throw ConfigError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

}  // namespace eegconn::nn
