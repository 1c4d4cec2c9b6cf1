// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "uad/nn/graph.hpp"
#include "uad/nn/params.hpp"

namespace uad {

// Fully-connected classifier: ReLU hidden layers, softmax output.
struct BackboneSpec {
  std::vector<int> widths;  // {input, hidden..., output}

  // Default stack: 256 / 128 / 128 hidden units, n_outputs softmax cells.
  static BackboneSpec dnn(int input_dim, int n_outputs) { return {{input_dim, 256, 128, 128, n_outputs}}; }

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  int layer_count() const { return static_cast<int>(widths.size()) - 1; }
};

inline ParamSet init_backbone(const BackboneSpec& spec, Rng& rng) {
  ParamSet p;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int fan_in = spec.widths[l], fan_out = spec.widths[l + 1];
    p.add("fc" + std::to_string(l) + ".W", glorot_uniform(fan_in, fan_out, {fan_in, fan_out}, rng));
    p.add("fc" + std::to_string(l) + ".b", Tensor::zeros({fan_out}));
  }
  return p;
}

// x: [batch, input_dim] node -> probability rows [batch, output_dim].
template <typename S>
int backbone_probs(GraphT<S>& g, const BackboneSpec& spec, const std::vector<int>& pids, int x) {
  int h = x;
  for (int l = 0; l < spec.layer_count(); ++l) {
    h = g.add_rowvec(g.matmul(h, pids[2 * l]), pids[2 * l + 1]);
    if (l + 1 < spec.layer_count()) h = g.relu(h);
  }
  return g.softmax_rows(h);
}

// Single-sample forward pass; returns the probability vector.
inline std::vector<double> forward_backbone(const ParamSet& params, const BackboneSpec& spec,
                                            const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != spec.input_dim())
    throw DataError("forward_backbone: input dim " + std::to_string(x.size()) + " != " +
                    std::to_string(spec.input_dim()));
  if (static_cast<int>(params.items.size()) != 2 * spec.layer_count())
    throw DataError("forward_backbone: parameter count does not match spec");
  Graph g;
  const auto pids = graph_params(g, params);
  const int xin = g.input(Tensor({1, spec.input_dim()}, x));
  const int probs = backbone_probs(g, spec, pids, xin);
  return g.value(probs).data;
}

// Cross entropy of a probability vector against a strict one-hot label.
inline double cross_entropy(const std::vector<double>& pred, const std::vector<double>& onehot) {
  if (pred.size() != onehot.size()) throw DataError("cross_entropy: size mismatch");
  int ones = 0;
  for (double y : onehot) {
    if (y == 1.0)
      ++ones;
    else if (y != 0.0)
      throw DataError("cross_entropy: label is not one-hot");
  }
  if (ones != 1) throw DataError("cross_entropy: label is not one-hot");
  double loss = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (onehot[k] == 1.0) {
      double p = pred[k];
      if (p < Graph::kLogClamp) p = Graph::kLogClamp;
      loss -= std::log(p);
    }
  }
  return loss;
}

// Mean squared error with an explicit normalizer: sum((a-b)^2) / normalizer.
inline double mse(const Tensor& a, const Tensor& b, double normalizer) {
  if (!same_shape(a.shape, b.shape))
    throw DataError("mse: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  if (!(normalizer > 0.0)) throw DataError("mse: normalizer must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / normalizer;
}

}  // namespace uad
