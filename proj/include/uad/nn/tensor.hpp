// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "uad/errors.hpp"

namespace uad {

// Dense row-major tensor over a scalar type. Rank 1 ({n}) and rank 2
// ({rows, cols}) cover every architecture in this project; scalars are {1}.
template <typename S>
struct TensorT {
  std::vector<int> shape;
  std::vector<S> data;

  TensorT() = default;
  TensorT(std::vector<int> shp, std::vector<S> values) : shape(std::move(shp)), data(std::move(values)) {}

  static TensorT zeros(std::vector<int> shp) {
    TensorT t;
    t.shape = std::move(shp);
    t.data.assign(numel(t.shape), S{});
    return t;
  }

  static std::size_t numel(const std::vector<int>& shp) {
    std::size_t n = 1;
    for (int d : shp) n *= static_cast<std::size_t>(d);
    return n;
  }

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return rank() == 2 ? shape[0] : 1; }
  int cols() const { return rank() == 2 ? shape[1] : (shape.empty() ? 1 : shape[0]); }

  S& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  const S& at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }
};

using Tensor = TensorT<double>;

inline bool same_shape(const std::vector<int>& a, const std::vector<int>& b) { return a == b; }

inline std::string shape_str(const std::vector<int>& shp) {
  std::string s = "[";
  for (std::size_t i = 0; i < shp.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shp[i]);
  }
  return s + "]";
}

}  // namespace uad
