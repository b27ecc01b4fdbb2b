#include "nextmp/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace nextmp {

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

Tensor Tensor::zeros(std::vector<int> shape) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("Tensor::from: shape/data mismatch");
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::glorot_uniform(std::vector<int> shape, int fan_in, int fan_out,
                              Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = zeros(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-a, a);
  return t;
}

}  // namespace nextmp
