// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fd_check.hpp"
#include "uad/nn/backbone.hpp"
#include "uad/nn/meta_grad.hpp"
#include "uad/rng.hpp"

using namespace uad;
using testutil::compare_grads;
using testutil::fd_grad;

namespace {

// L(t) = 1/2 * (t - c)^2 over a single scalar parameter.
auto scalar_quadratic(double c) {
  return make_loss([c](auto& g, const std::vector<int>& ids) {
    const int target = g.input_from(Tensor({1}, {c}));
    return g.scale(g.sum_sq(g.sub(ids[0], target)), 0.5);
  });
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& x : t.data) x = scale * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("grad and eval_loss agree on a quadratic") {
  ParamSet p;
  p.add("theta", Tensor({1}, {2.0}));
  const auto loss = scalar_quadratic(1.0);
  CHECK(eval_loss(loss, p) == doctest::Approx(0.5));
  double lv = 0.0;
  const ParamSet g = grad(loss, p, &lv);
  CHECK(lv == doctest::Approx(0.5));
  CHECK(g.items[0].tensor.data[0] == doctest::Approx(1.0));
}

TEST_CASE("grad surfaces non-finite losses as numeric errors") {
  ParamSet p;
  p.add("theta", Tensor({1}, {std::numeric_limits<double>::quiet_NaN()}));
  CHECK_THROWS_AS((void)grad(scalar_quadratic(0.0), p), NumericError);
}

TEST_CASE("hvp matches finite differences of the gradient") {
  Rng rng(5);
  const BackboneSpec spec{{3, 4, 3}};
  ParamSet theta = init_backbone(spec, rng);
  const Tensor x = random_tensor({2, 3}, rng);
  const std::vector<int> labels{0, 2};
  const auto loss = make_loss([&](auto& g, const std::vector<int>& ids) {
    const int xin = g.input_from(x);
    return g.nll_sum(backbone_probs(g, spec, ids, xin), labels);
  });

  ParamSet v = zeros_like(theta);
  {
    Rng vr = rng.derive("v");
    for (auto& it : v.items)
      for (auto& e : it.tensor.data) e = vr.normal();
  }
  const ParamSet hv = hvp(loss, theta, v);

  // (grad(theta + h v) - grad(theta - h v)) / 2h
  const double h = 1e-5;
  ParamSet plus = theta, minus = theta;
  axpy(h, v, plus);
  axpy(-h, v, minus);
  const auto gp = grad(loss, plus).flatten();
  const auto gm = grad(loss, minus).flatten();
  std::vector<double> fd(gp.size());
  for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = (gp[i] - gm[i]) / (2.0 * h);
  const auto rep = compare_grads(hv.flatten(), fd);
  CHECK(rep.max_rel < 1e-5);
}

TEST_CASE("closed-form scalar meta-gradient reproduces exactly") {
  // inner L_s(t) = 1/2 (t-1)^2, outer L_v(t') = 1/2 t'^2, t = 2, a = 0.5:
  // t' = 1.5, dL/dt = 0.75, dL/da = -1.5.
  ParamSet theta;
  theta.add("theta", Tensor({1}, {2.0}));
  ParamSet alpha;
  alpha.add("theta", Tensor({1}, {0.5}));
  const auto inner = scalar_quadratic(1.0);
  const auto outer = scalar_quadratic(0.0);
  const auto res = grad_through_update(outer, theta, alpha, inner, 1, MetaGradMode::kExact);
  CHECK(res.adapted_theta.items[0].tensor.data[0] == 1.5);
  CHECK(std::abs(res.d_theta.items[0].tensor.data[0] - 0.75) < 1e-10);
  CHECK(std::abs(res.d_alpha.items[0].tensor.data[0] - (-1.5)) < 1e-10);
  CHECK(res.outer_loss == doctest::Approx(0.5 * 1.5 * 1.5));

  // First-order mode drops the curvature term: dL/dt = t' = 1.5.
  const auto fo = grad_through_update(outer, theta, alpha, inner, 1, MetaGradMode::kFirstOrder);
  CHECK(fo.d_theta.items[0].tensor.data[0] == doctest::Approx(1.5));
  CHECK(fo.d_alpha.items[0].tensor.data[0] == doctest::Approx(-1.5));
}

TEST_CASE("zero learning factors leave parameters bitwise untouched") {
  Rng rng(11);
  const BackboneSpec spec{{4, 5, 3}};
  ParamSet theta = init_backbone(spec, rng);
  ParamSet alpha = zeros_like(theta);
  const Tensor x = random_tensor({3, 4}, rng);
  const std::vector<int> labels{1, 2, 0};
  const auto loss = make_loss([&](auto& g, const std::vector<int>& ids) {
    const int xin = g.input_from(x);
    return g.nll_sum(backbone_probs(g, spec, ids, xin), labels);
  });
  const auto res = grad_through_update(loss, theta, alpha, loss, 1);
  const auto a = res.adapted_theta.flatten();
  const auto b = theta.flatten();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

// The acceptance-level check: exact-mode meta-gradient vs central finite
// differences of the full composed map (theta, alpha) -> outer(theta')
// on a backbone with fewer than 100 parameters.
TEST_CASE("exact meta-gradient matches finite differences of the composed map") {
  Rng rng(23);
  const BackboneSpec spec{{3, 5, 4}};  // 44 parameters
  ParamSet theta = init_backbone(spec, rng);
  REQUIRE(theta.total_len() <= 100);
  ParamSet alpha = constant_like(theta, 0.0);
  {
    Rng ar = rng.derive("alpha");
    for (auto& it : alpha.items)
      for (auto& e : it.tensor.data) e = 0.05 + 0.1 * ar.uniform01();
  }
  const Tensor xs = random_tensor({4, 3}, rng);
  const Tensor xq = random_tensor({5, 3}, rng);
  const std::vector<int> ls{0, 1, 2, 3};
  const std::vector<int> lq{3, 2, 1, 0, 1};
  const auto inner = make_loss([&](auto& g, const std::vector<int>& ids) {
    return g.nll_sum(backbone_probs(g, spec, ids, g.input_from(xs)), ls);
  });
  const auto outer = make_loss([&](auto& g, const std::vector<int>& ids) {
    return g.nll_sum(backbone_probs(g, spec, ids, g.input_from(xq)), lq);
  });

  for (int steps : {1, 3}) {
    const auto res = grad_through_update(outer, theta, alpha, inner, steps, MetaGradMode::kExact);

    // Composed map evaluated from scratch for finite differencing: the
    // ParamSet piggybacks theta and alpha side by side.
    const auto composed = [&](const ParamSet& packed) {
      ParamSet th = theta, al = alpha;
      const std::size_t half = theta.items.size();
      for (std::size_t i = 0; i < half; ++i) {
        th.items[i].tensor = packed.items[i].tensor;
        al.items[i].tensor = packed.items[half + i].tensor;
      }
      ParamSet cur = th;
      for (int t = 0; t < steps; ++t) cur = sub_scaled_hadamard(cur, al, grad(inner, cur));
      return eval_loss(outer, cur);
    };
    ParamSet packed;
    for (const auto& it : theta.items) packed.add("t." + it.name, it.tensor);
    for (const auto& it : alpha.items) packed.add("a." + it.name, it.tensor);

    std::vector<double> analytic = res.d_theta.flatten();
    const auto da = res.d_alpha.flatten();
    analytic.insert(analytic.end(), da.begin(), da.end());
    const auto rep = compare_grads(analytic, fd_grad(composed, packed));
    CAPTURE(steps);
    CHECK(rep.max_rel < 1e-4);
    CHECK(rep.max_rel < 1e-6);  // typically far tighter than the contract
  }
}

TEST_CASE("layout mismatches and bad step counts are rejected") {
  ParamSet theta;
  theta.add("w", Tensor({2}, {1.0, 2.0}));
  ParamSet alpha;
  alpha.add("w", Tensor({3}, {1.0, 2.0, 3.0}));
  const auto loss = scalar_quadratic(0.0);
  CHECK_THROWS_AS((void)grad_through_update(loss, theta, alpha, loss, 1), DataError);
  ParamSet ok = zeros_like(theta);
  CHECK_THROWS_AS((void)grad_through_update(loss, theta, ok, loss, 0), DataError);
}
