// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

#include "uad/nn/params.hpp"

namespace uad {

inline void sgd_step(ParamSet& params, const ParamSet& grad, double lr) {
  axpy(-lr, grad, params);
}

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamSet m, v;
  std::int64_t t = 0;

  static AdamState init(const ParamSet& shape_like) { return {zeros_like(shape_like), zeros_like(shape_like), 0}; }
};

inline void adam_step(ParamSet& params, const ParamSet& grad, AdamState& state, const AdamConfig& cfg) {
  if (!params.same_layout(grad) || !params.same_layout(state.m)) throw DataError("adam_step: layout mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    auto& p = params.items[i].tensor.data;
    const auto& g = grad.items[i].tensor.data;
    auto& m = state.m.items[i].tensor.data;
    auto& v = state.v.items[i].tensor.data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      p[j] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
}

}  // namespace uad
