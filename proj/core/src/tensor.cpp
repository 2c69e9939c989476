#include "asap/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace asap {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  return fmt::format("[{}]", fmt::join(shape, "x"));
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) throw std::invalid_argument("tensor: zero-sized dimension in " + shape_str(shape_));
  }
  if (shape_.empty()) throw std::invalid_argument("tensor: empty shape");
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw std::invalid_argument("tensor: empty shape");
  if (shape_numel(shape_) != data_.size()) {
    throw std::invalid_argument(fmt::format("tensor: shape {} needs {} values, got {}",
                                            shape_str(shape_), shape_numel(shape_),
                                            data_.size()));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() == 1) return 1;
  if (rank() != 2) throw std::logic_error("tensor: rows() on rank " + std::to_string(rank()));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() == 1) return shape_[0];
  if (rank() != 2) throw std::logic_error("tensor: cols() on rank " + std::to_string(rank()));
  return shape_[1];
}

double Tensor::item() const {
  if (numel() != 1) throw std::logic_error("tensor: item() on " + shape_str(shape_));
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) noexcept {
  for (double& x : data_) x = v;
}

}  // namespace asap
