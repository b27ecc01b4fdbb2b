#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "nextmp/rng.hpp"

namespace nextmp {

// Dense row-major tensor of doubles. Small helper type shared by the
// guidance network and its gradient tape; shapes are plain int vectors.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {}

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double v);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  // Uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
  static Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out,
                               Rng& rng);

  std::size_t numel() const { return data.size(); }
  int dim(std::size_t i) const { return shape[i]; }
  int last_dim() const { return shape.empty() ? 1 : shape.back(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::size_t shape_numel(const std::vector<int>& shape);

}  // namespace nextmp
