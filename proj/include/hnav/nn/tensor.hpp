#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hnav::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  std::span<double> values() noexcept { return data; }
  std::span<const double> values() const noexcept { return data; }

  bool all_finite() const noexcept;
  bool operator==(const Tensor&) const = default;
};

}  // namespace hnav::nn
