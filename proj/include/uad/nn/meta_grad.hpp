// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "uad/nn/backbone.hpp"
#include "uad/nn/graph.hpp"
#include "uad/nn/params.hpp"

namespace uad {

// A scalar loss over a ParamSet, expressible on both scalar types so the
// same definition serves plain gradients (double) and Hessian-vector
// products (Dual). Wrap a generic lambda with make_loss().
class LossFunction {
 public:
  virtual ~LossFunction() = default;
  virtual int build(GraphT<double>& g, const std::vector<int>& param_ids) const = 0;
  virtual int build(GraphT<Dual>& g, const std::vector<int>& param_ids) const = 0;
};

template <typename F>
class GenericLoss final : public LossFunction {
 public:
  explicit GenericLoss(F f) : f_(std::move(f)) {}
  int build(GraphT<double>& g, const std::vector<int>& ids) const override { return f_(g, ids); }
  int build(GraphT<Dual>& g, const std::vector<int>& ids) const override { return f_(g, ids); }

 private:
  F f_;
};

template <typename F>
GenericLoss<F> make_loss(F f) {
  return GenericLoss<F>(std::move(f));
}

namespace detail {

template <typename S>
void check_scalar_root(const GraphT<S>& g, int root) {
  if (g.value(root).size() != 1) throw DataError("loss function did not produce a scalar");
}

}  // namespace detail

// Reverse-mode gradient of loss w.r.t. every parameter entry. Optionally
// reports the loss value.
inline ParamSet grad(const LossFunction& loss, const ParamSet& params, double* loss_value = nullptr) {
  Graph g;
  const auto pids = graph_params(g, params);
  const int root = loss.build(g, pids);
  detail::check_scalar_root(g, root);
  const double lv = g.value(root).data[0];
  if (!std::isfinite(lv)) throw NumericError("loss is non-finite");
  if (loss_value) *loss_value = lv;
  g.backward(root);
  ParamSet out = zeros_like(params);
  for (std::size_t i = 0; i < pids.size(); ++i) {
    out.items[i].tensor.data = g.grad(pids[i]).data;
    for (double x : out.items[i].tensor.data)
      if (!std::isfinite(x)) throw NumericError("non-finite gradient for parameter '" + out.items[i].name + "'");
  }
  return out;
}

inline double eval_loss(const LossFunction& loss, const ParamSet& params) {
  Graph g;
  const auto pids = graph_params(g, params);
  const int root = loss.build(g, pids);
  detail::check_scalar_root(g, root);
  return g.value(root).data[0];
}

// Exact Hessian-vector product H(at) * v via forward-over-reverse: the tape
// runs on dual numbers seeded with direction v, and the dual part of the
// gradient is the product.
inline ParamSet hvp(const LossFunction& loss, const ParamSet& at, const ParamSet& v) {
  if (!at.same_layout(v)) throw DataError("hvp: layout mismatch");
  GraphT<Dual> g;
  std::vector<int> pids;
  pids.reserve(at.items.size());
  for (std::size_t i = 0; i < at.items.size(); ++i) {
    TensorT<Dual> t;
    t.shape = at.items[i].tensor.shape;
    t.data.resize(at.items[i].tensor.size());
    for (std::size_t j = 0; j < t.data.size(); ++j)
      t.data[j] = Dual(at.items[i].tensor.data[j], v.items[i].tensor.data[j]);
    pids.push_back(g.input(std::move(t)));
  }
  const int root = loss.build(g, pids);
  detail::check_scalar_root(g, root);
  if (!std::isfinite(value_of(g.value(root).data[0]))) throw NumericError("loss is non-finite");
  g.backward(root);
  ParamSet out = zeros_like(at);
  for (std::size_t i = 0; i < pids.size(); ++i) {
    const auto& gd = g.grad(pids[i]).data;
    auto& od = out.items[i].tensor.data;
    for (std::size_t j = 0; j < od.size(); ++j) {
      if (!std::isfinite(gd[j].d)) throw NumericError("non-finite Hessian-vector entry in '" + out.items[i].name + "'");
      od[j] = gd[j].d;
    }
  }
  return out;
}

enum class MetaGradMode { kExact, kFirstOrder };

struct MetaGradResult {
  ParamSet d_theta;
  ParamSet d_alpha;
  ParamSet adapted_theta;  // final theta' after the inner steps
  double outer_loss = 0.0;
};

// Differentiates outer_loss(theta_T) w.r.t. (theta, alpha) where
//   theta_{t+1} = theta_t - alpha o grad(inner_loss)(theta_t),  t < steps.
//
// Exact mode backpropagates through the update chain; with u the running
// cotangent it applies, per step,
//   d_alpha += -g_t o u,   u <- u - H(theta_t) (alpha o u),
// using exact Hessian-vector products. First-order mode treats g_t as a
// constant w.r.t. theta (u never changes).
inline MetaGradResult grad_through_update(const LossFunction& outer_loss, const ParamSet& theta,
                                          const ParamSet& alpha, const LossFunction& inner_loss, int steps = 1,
                                          MetaGradMode mode = MetaGradMode::kExact) {
  if (!theta.same_layout(alpha)) throw DataError("grad_through_update: theta/alpha layout mismatch");
  if (steps < 1) throw DataError("grad_through_update: steps must be >= 1");

  std::vector<ParamSet> thetas;  // theta_0 .. theta_{T-1}
  std::vector<ParamSet> grads;   // g_t = grad(inner)(theta_t)
  thetas.reserve(steps);
  grads.reserve(steps);
  ParamSet cur = theta;
  for (int t = 0; t < steps; ++t) {
    ParamSet g = grad(inner_loss, cur);
    thetas.push_back(cur);
    cur = sub_scaled_hadamard(cur, alpha, g);
    grads.push_back(std::move(g));
  }

  MetaGradResult res;
  res.adapted_theta = cur;
  ParamSet u = grad(outer_loss, cur, &res.outer_loss);
  res.d_alpha = zeros_like(alpha);
  for (int t = steps - 1; t >= 0; --t) {
    ParamSet contrib = hadamard(grads[t], u);
    axpy(-1.0, contrib, res.d_alpha);
    if (mode == MetaGradMode::kExact) {
      const ParamSet hv = hvp(inner_loss, thetas[t], hadamard(alpha, u));
      axpy(-1.0, hv, u);
    }
  }
  res.d_theta = std::move(u);
  return res;
}

}  // namespace uad
