// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "uad/errors.hpp"
#include "uad/nn/graph.hpp"
#include "uad/nn/tensor.hpp"
#include "uad/rng.hpp"

namespace uad {

// Ordered, named collection of parameter tensors. Order is part of the
// identity: flatten/unflatten and all elementwise helpers rely on it.
struct ParamSet {
  struct Item {
    std::string name;
    Tensor tensor;
  };

  std::vector<Item> items;

  void add(std::string name, Tensor t) {
    for (const auto& it : items)
      if (it.name == name) throw DataError("duplicate parameter name: " + name);
    items.push_back({std::move(name), std::move(t)});
  }

  std::size_t total_len() const {
    std::size_t n = 0;
    for (const auto& it : items) n += it.tensor.size();
    return n;
  }

  const Tensor& get(std::string_view name) const {
    for (const auto& it : items)
      if (it.name == name) return it.tensor;
    throw DataError("unknown parameter: " + std::string(name));
  }

  Tensor& get(std::string_view name) {
    for (auto& it : items)
      if (it.name == name) return it.tensor;
    throw DataError("unknown parameter: " + std::string(name));
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(total_len());
    for (const auto& it : items) out.insert(out.end(), it.tensor.data.begin(), it.tensor.data.end());
    return out;
  }

  void unflatten(const std::vector<double>& flat) {
    if (flat.size() != total_len()) throw DataError("unflatten: length mismatch");
    std::size_t off = 0;
    for (auto& it : items) {
      for (auto& x : it.tensor.data) x = flat[off++];
    }
  }

  bool same_layout(const ParamSet& o) const {
    if (items.size() != o.items.size()) return false;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].name != o.items[i].name || items[i].tensor.shape != o.items[i].tensor.shape) return false;
    return true;
  }

  void check_finite(const std::string& what) const {
    for (const auto& it : items)
      for (double x : it.tensor.data)
        if (!std::isfinite(x)) throw NumericError(what + ": non-finite value in parameter '" + it.name + "'");
  }
};

// Registers every tensor of a ParamSet as a graph input, in order.
template <typename S>
std::vector<int> graph_params(GraphT<S>& g, const ParamSet& p) {
  std::vector<int> ids;
  ids.reserve(p.items.size());
  for (const auto& it : p.items) ids.push_back(g.input_from(it.tensor));
  return ids;
}

inline ParamSet zeros_like(const ParamSet& p) {
  ParamSet out;
  for (const auto& it : p.items) out.items.push_back({it.name, Tensor::zeros(it.tensor.shape)});
  return out;
}

inline ParamSet constant_like(const ParamSet& p, double c) {
  ParamSet out = zeros_like(p);
  for (auto& it : out.items)
    for (auto& x : it.tensor.data) x = c;
  return out;
}

// y += a * x
inline void axpy(double a, const ParamSet& x, ParamSet& y) {
  if (!x.same_layout(y)) throw DataError("axpy: parameter layouts differ");
  for (std::size_t i = 0; i < x.items.size(); ++i) {
    const auto& xs = x.items[i].tensor.data;
    auto& ys = y.items[i].tensor.data;
    for (std::size_t j = 0; j < xs.size(); ++j) ys[j] += a * xs[j];
  }
}

// out = a - b * c (elementwise), used for theta' = theta - alpha o grad.
inline ParamSet sub_scaled_hadamard(const ParamSet& a, const ParamSet& b, const ParamSet& c) {
  if (!a.same_layout(b) || !a.same_layout(c)) throw DataError("parameter layouts differ");
  ParamSet out = a;
  for (std::size_t i = 0; i < out.items.size(); ++i) {
    auto& os = out.items[i].tensor.data;
    const auto& bs = b.items[i].tensor.data;
    const auto& cs = c.items[i].tensor.data;
    for (std::size_t j = 0; j < os.size(); ++j) os[j] -= bs[j] * cs[j];
  }
  return out;
}

inline ParamSet hadamard(const ParamSet& a, const ParamSet& b) {
  if (!a.same_layout(b)) throw DataError("hadamard: parameter layouts differ");
  ParamSet out = a;
  for (std::size_t i = 0; i < out.items.size(); ++i) {
    const auto& bs = b.items[i].tensor.data;
    auto& os = out.items[i].tensor.data;
    for (std::size_t j = 0; j < os.size(); ++j) os[j] *= bs[j];
  }
  return out;
}

// Glorot-style uniform init in +-sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(int fan_in, int fan_out, std::vector<int> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& x : t.data) x = rng.uniform_real(-limit, limit);
  return t;
}

}  // namespace uad
