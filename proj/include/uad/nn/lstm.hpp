// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "uad/nn/graph.hpp"
#include "uad/nn/params.hpp"

namespace uad {

// Stacked LSTM. Gate pre-activations are packed [i | f | g | o] into one
// width-4h matmul per step; initial hidden/cell states are zero.
struct LstmStackSpec {
  int input_dim = 0;
  std::vector<int> hidden;  // one entry per layer

  int layer_count() const { return static_cast<int>(hidden.size()); }
  int layer_input(int l) const { return l == 0 ? input_dim : hidden[l - 1]; }
};

inline void add_lstm_params(ParamSet& p, const LstmStackSpec& spec, const std::string& prefix, Rng& rng) {
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.layer_input(l), h = spec.hidden[l];
    const std::string base = prefix + "lstm" + std::to_string(l);
    p.add(base + ".Wx", glorot_uniform(in, 4 * h, {in, 4 * h}, rng));
    p.add(base + ".Wh", glorot_uniform(h, 4 * h, {h, 4 * h}, rng));
    p.add(base + ".b", Tensor::zeros({4 * h}));
  }
}

template <typename S>
struct LstmState {
  // Node ids of (h, c) per layer; -1 means the zero initial state.
  std::vector<int> h, c;
};

template <typename S>
LstmState<S> lstm_initial_state(const LstmStackSpec& spec) {
  LstmState<S> st;
  st.h.assign(spec.layer_count(), -1);
  st.c.assign(spec.layer_count(), -1);
  return st;
}

// One step through the full stack. pids holds (Wx, Wh, b) per layer starting
// at pid_base. Returns the top layer's hidden node.
template <typename S>
int lstm_step(GraphT<S>& g, const LstmStackSpec& spec, const std::vector<int>& pids, int pid_base, int x,
              LstmState<S>& st) {
  int layer_in = x;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int h = spec.hidden[l];
    const int wx = pids[pid_base + 3 * l], wh = pids[pid_base + 3 * l + 1], b = pids[pid_base + 3 * l + 2];
    int pre = g.add_rowvec(g.matmul(layer_in, wx), b);
    if (st.h[l] >= 0) pre = g.add(pre, g.matmul(st.h[l], wh));
    const int gi = g.sigmoid(g.slice_cols(pre, 0, h));
    const int gf = g.sigmoid(g.slice_cols(pre, h, 2 * h));
    const int gg = g.tanh_(g.slice_cols(pre, 2 * h, 3 * h));
    const int go = g.sigmoid(g.slice_cols(pre, 3 * h, 4 * h));
    int c_new = g.mul(gi, gg);
    if (st.c[l] >= 0) c_new = g.add(c_new, g.mul(gf, st.c[l]));
    const int h_new = g.mul(go, g.tanh_(c_new));
    st.h[l] = h_new;
    st.c[l] = c_new;
    layer_in = h_new;
  }
  return layer_in;
}

struct LstmForwardResult {
  std::vector<Tensor> step_hidden;  // top-layer hidden state per step
  std::vector<Tensor> final_h;      // per layer
  std::vector<Tensor> final_c;      // per layer
};

// Plain forward evaluation of a stacked LSTM over a sequence. Each sequence
// element is either [input_dim] or [batch, input_dim].
inline LstmForwardResult lstm_forward(const ParamSet& params, const LstmStackSpec& spec,
                                      const std::vector<Tensor>& sequence) {
  if (sequence.empty()) throw DataError("lstm_forward: empty sequence");
  if (static_cast<int>(params.items.size()) != 3 * spec.layer_count())
    throw DataError("lstm_forward: parameter count does not match spec");
  Graph g;
  const auto pids = graph_params(g, params);
  auto st = lstm_initial_state<double>(spec);
  LstmForwardResult out;
  for (const auto& x : sequence) {
    Tensor xin = x;
    if (xin.rank() == 1) xin.shape = {1, xin.shape[0]};
    if (xin.cols() != spec.input_dim) throw DataError("lstm_forward: input width mismatch");
    const int top = lstm_step(g, spec, pids, 0, g.input(std::move(xin)), st);
    out.step_hidden.push_back(g.value(top));
  }
  for (int l = 0; l < spec.layer_count(); ++l) {
    out.final_h.push_back(g.value(st.h[l]));
    out.final_c.push_back(g.value(st.c[l]));
  }
  return out;
}

}  // namespace uad
