#include "lextree/tensor.hpp"

#include <algorithm>

namespace lextree {

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

std::size_t checked_volume(const Shape& shape) {
  if (shape.empty() || shape.size() > 2)
    throw ShapeError("tensor rank must be 1 or 2, got " + shape_str(shape));
  std::size_t n = 1;
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(checked_volume(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (checked_volume(shape_) != values_.size())
    throw ShapeError("tensor of shape " + shape_str(shape_) + " given " +
                     std::to_string(values_.size()) + " values");
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

double Tensor::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

}  // namespace lextree
