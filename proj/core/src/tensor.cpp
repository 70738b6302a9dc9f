#include "stsreg/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "stsreg/error.hpp"

namespace stsreg {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: length mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace stsreg
