#include "hnav/nn/tensor.hpp"

#include <cmath>
#include <sstream>

#include "hnav/common.hpp"

namespace hnav::nn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ConfigError("tensor extents must be positive");
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (shape_size(shape) != data.size()) {
    throw ConfigError("tensor data length " + std::to_string(data.size()) +
                      " does not match shape " + shape_string(shape));
  }
}

bool Tensor::all_finite() const noexcept {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace hnav::nn
