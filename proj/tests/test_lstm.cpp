// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "fd_check.hpp"
#include "uad/nn/lstm.hpp"
#include "uad/rng.hpp"

using namespace uad;
using testutil::compare_grads;
using testutil::fd_grad;

namespace {

// Two-layer stack with fixed weights; expected values frozen from an
// independent NumPy implementation (gates packed [i|f|g|o]).
ParamSet oracle_params() {
  ParamSet p;
  p.add("lstm0.Wx", Tensor({2, 8}, {0.1, -0.2, 0.3, 0.05, -0.1, 0.2, 0.15, -0.05,
                                    0.2, 0.1, -0.3, 0.25, 0.05, -0.15, 0.1, 0.3}));
  p.add("lstm0.Wh", Tensor({2, 8}, {0.05, 0.1, -0.05, 0.2, 0.1, -0.1, 0.05, 0.15,
                                    -0.1, 0.05, 0.2, -0.15, 0.3, 0.1, -0.2, 0.05}));
  p.add("lstm0.b", Tensor({8}, {0.01, -0.02, 0.03, 0.0, 0.02, -0.01, 0.0, 0.01}));
  p.add("lstm1.Wx", Tensor({2, 12}, {0.1, 0.2, -0.1, 0.05, 0.15, -0.2, 0.1, 0.0, 0.05, -0.05, 0.2, 0.1,
                                     -0.15, 0.1, 0.05, 0.2, -0.1, 0.15, 0.0, 0.1, -0.2, 0.05, 0.1, -0.1}));
  p.add("lstm1.Wh", Tensor({3, 12}, {0.05, -0.1, 0.1, 0.0, 0.2, 0.05, -0.05, 0.15, 0.1, -0.15, 0.0, 0.05,
                                     0.1, 0.05, -0.2, 0.15, 0.0, -0.1, 0.2, 0.05, -0.05, 0.1, 0.15, 0.0,
                                     -0.05, 0.2, 0.0, 0.1, -0.15, 0.05, 0.1, -0.2, 0.15, 0.0, 0.05, 0.1}));
  p.add("lstm1.b", Tensor({12}, {0.0, 0.01, -0.01, 0.02, 0.0, -0.02, 0.01, 0.0, 0.02, -0.01, 0.0, 0.01}));
  return p;
}

}  // namespace

TEST_CASE("stacked forward matches the frozen oracle") {
  const LstmStackSpec spec{2, {2, 3}};
  const ParamSet p = oracle_params();
  const std::vector<Tensor> seq = {Tensor({2}, {1.0, -0.5}), Tensor({2}, {0.25, 2.0}), Tensor({2}, {-1.0, 0.75})};
  const auto out = lstm_forward(p, spec, seq);
  REQUIRE(out.step_hidden.size() == 3);
  const std::vector<std::vector<double>> expect_tops = {
      {0.00179580109006062, 0.00126905528396787, 0.00212591293191244},
      {0.00410851064499805, -0.00038551396097496, 0.00846570166642908},
      {0.00581183676117386, -0.00346148888944349, 0.01613881767496135},
  };
  for (int t = 0; t < 3; ++t) {
    REQUIRE(out.step_hidden[t].size() == 3);
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(out.step_hidden[t].data[j] - expect_tops[t][j]) < 1e-12);
  }
  const std::vector<double> fh0{0.04471522044526301, -0.1193758095213472};
  const std::vector<double> fc0{0.0927369858586311, -0.21211683855102015};
  const std::vector<double> fc1{0.01173485987911289, -0.00693220132082767, 0.0318512422770534};
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(out.final_h[0].data[j] - fh0[j]) < 1e-12);
    CHECK(std::abs(out.final_c[0].data[j] - fc0[j]) < 1e-12);
  }
  for (int j = 0; j < 3; ++j) CHECK(std::abs(out.final_c[1].data[j] - fc1[j]) < 1e-12);
  CHECK(out.final_h[1].data == out.step_hidden[2].data);
}

TEST_CASE("parameter initialization produces the documented layout") {
  Rng rng(1);
  const LstmStackSpec spec{8, {256, 128}};
  ParamSet p;
  add_lstm_params(p, spec, "enc.", rng);
  REQUIRE(p.items.size() == 6);
  CHECK(p.get("enc.lstm0.Wx").shape == std::vector<int>{8, 1024});
  CHECK(p.get("enc.lstm0.Wh").shape == std::vector<int>{256, 1024});
  CHECK(p.get("enc.lstm0.b").shape == std::vector<int>{1024});
  CHECK(p.get("enc.lstm1.Wx").shape == std::vector<int>{256, 512});
  CHECK(p.get("enc.lstm1.Wh").shape == std::vector<int>{128, 512});
  for (double x : p.get("enc.lstm1.b").data) CHECK(x == 0.0);
}

TEST_CASE("lstm gradients match finite differences") {
  Rng root(77);
  const std::vector<LstmStackSpec> specs = {
      LstmStackSpec{3, {4}},
      LstmStackSpec{2, {3, 2}},
      LstmStackSpec{4, {2, 3, 2}},
  };
  for (std::size_t si = 0; si < specs.size(); ++si) {
    const auto& spec = specs[si];
    Rng rng = root.derive("lstm", si);
    ParamSet p;
    add_lstm_params(p, spec, "", rng);
    // Nonzero biases so every gate path carries signal.
    for (auto& it : p.items)
      if (it.name.ends_with(".b"))
        for (auto& x : it.tensor.data) x = 0.1 * rng.normal();

    std::vector<Tensor> seq;
    for (int t = 0; t < 3; ++t) {
      Tensor x = Tensor::zeros({1, spec.input_dim});
      for (auto& e : x.data) e = rng.normal();
      seq.push_back(std::move(x));
    }

    // Loss: squared norm of the sum of top hidden states over the sequence.
    const auto value_and_grad = [&](const ParamSet& ps, std::vector<double>* analytic) {
      Graph g;
      const auto pids = graph_params(g, ps);
      auto st = lstm_initial_state<double>(spec);
      int acc = -1;
      for (const auto& x : seq) {
        const int top = lstm_step(g, spec, pids, 0, g.input(x), st);
        acc = acc < 0 ? top : g.add(acc, top);
      }
      const int loss = g.sum_sq(acc);
      if (analytic) {
        g.backward(loss);
        analytic->clear();
        for (int id : pids) {
          const auto& gr = g.grad(id);
          analytic->insert(analytic->end(), gr.data.begin(), gr.data.end());
        }
      }
      return g.value(loss).data[0];
    };

    std::vector<double> analytic;
    (void)value_and_grad(p, &analytic);
    const auto fd = fd_grad([&](const ParamSet& ps) { return value_and_grad(ps, nullptr); }, p);
    const auto rep = compare_grads(analytic, fd);
    CAPTURE(si);
    CHECK(rep.max_rel < 1e-6);
  }
}

TEST_CASE("lstm_forward validates its inputs") {
  const LstmStackSpec spec{2, {2}};
  Rng rng(4);
  ParamSet p;
  add_lstm_params(p, spec, "", rng);
  CHECK_THROWS_AS((void)lstm_forward(p, spec, {}), DataError);
  CHECK_THROWS_AS((void)lstm_forward(p, spec, {Tensor({3}, {1, 2, 3})}), DataError);
  ParamSet wrong = p;
  wrong.items.pop_back();
  CHECK_THROWS_AS((void)lstm_forward(wrong, spec, {Tensor({2}, {1, 2})}), DataError);
}
