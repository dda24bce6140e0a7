#include "dair/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace dair::ad {

Tensor::Tensor(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0), grad_(rows * cols, 0.0) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)), grad_(rows * cols, 0.0) {
  if (data_.size() != rows * cols)
    throw std::invalid_argument("Tensor: value count does not match rows*cols");
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor(1, values.size(), std::vector<double>(values));
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value) {
  Tensor t(rows, cols);
  t.fill(value);
  return t;
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

}  // namespace dair::ad
