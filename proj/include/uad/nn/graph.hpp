// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "uad/errors.hpp"
#include "uad/nn/dual.hpp"
#include "uad/nn/tensor.hpp"

namespace uad {

namespace detail {

using RowMatd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// C[m,n] += A[m,k] * B[k,n]. Doubles go through Eigen's GEMM; other scalar
// types (Dual) take the plain loop, which is only used on small models.
template <typename S>
void mm_acc(const S* a, const S* b, S* c, int m, int k, int n) {
  if constexpr (std::is_same_v<S, double>) {
    Eigen::Map<const RowMatd> ma(a, m, k), mb(b, k, n);
    Eigen::Map<RowMatd> mc(c, m, n);
    mc.noalias() += ma * mb;
  } else {
    for (int i = 0; i < m; ++i) {
      S* crow = c + static_cast<std::size_t>(i) * n;
      for (int p = 0; p < k; ++p) {
        const S av = a[static_cast<std::size_t>(i) * k + p];
        const S* brow = b + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

// C[m,k] += A[m,n] * B[k,n]^T
template <typename S>
void mm_abt_acc(const S* a, const S* b, S* c, int m, int n, int k) {
  if constexpr (std::is_same_v<S, double>) {
    Eigen::Map<const RowMatd> ma(a, m, n), mb(b, k, n);
    Eigen::Map<RowMatd> mc(c, m, k);
    mc.noalias() += ma * mb.transpose();
  } else {
    for (int i = 0; i < m; ++i) {
      const S* arow = a + static_cast<std::size_t>(i) * n;
      S* crow = c + static_cast<std::size_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        const S* brow = b + static_cast<std::size_t>(p) * n;
        S acc{};
        for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
        crow[p] += acc;
      }
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
template <typename S>
void mm_atb_acc(const S* a, const S* b, S* c, int m, int k, int n) {
  if constexpr (std::is_same_v<S, double>) {
    Eigen::Map<const RowMatd> ma(a, m, k), mb(b, m, n);
    Eigen::Map<RowMatd> mc(c, k, n);
    mc.noalias() += ma.transpose() * mb;
  } else {
    for (int i = 0; i < m; ++i) {
      const S* arow = a + static_cast<std::size_t>(i) * k;
      const S* brow = b + static_cast<std::size_t>(i) * n;
      for (int p = 0; p < k; ++p) {
        const S av = arow[p];
        S* crow = c + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace detail

// Reverse-mode tape over tensor-valued nodes. Forward values are computed
// eagerly as nodes are appended, so node ids are already a topological order
// and backward() is a single reverse sweep.
template <typename S>
class GraphT {
 public:
  using Id = int;

  // Probabilities are clamped to this floor before any log.
  static constexpr double kLogClamp = 1e-12;

  enum class Op : std::uint8_t {
    kInput,
    kMatmul,
    kAdd,
    kAddRowVec,
    kSub,
    kMul,
    kScale,
    kRelu,
    kSigmoid,
    kTanh,
    kSoftmaxRows,
    kNllSum,
    kSum,
    kSumSq,
    kSliceCols,
  };

  Id input(TensorT<S> v) {
    Node n;
    n.op = Op::kInput;
    n.val = std::move(v);
    return push(std::move(n));
  }

  Id input_from(const TensorT<double>& v) {
    TensorT<S> t;
    t.shape = v.shape;
    t.data.assign(v.data.begin(), v.data.end());
    return input(std::move(t));
  }

  Id matmul(Id a, Id b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0])
      throw DataError("matmul shape mismatch: " + shape_str(ta.shape) + " x " + shape_str(tb.shape));
    Node n;
    n.op = Op::kMatmul;
    n.a = a;
    n.b = b;
    n.val = TensorT<S>::zeros({ta.shape[0], tb.shape[1]});
    detail::mm_acc(ta.data.data(), tb.data.data(), n.val.data.data(), ta.shape[0], ta.shape[1], tb.shape[1]);
    return push(std::move(n));
  }

  Id add(Id a, Id b) { return binary(Op::kAdd, a, b); }
  Id sub(Id a, Id b) { return binary(Op::kSub, a, b); }
  Id mul(Id a, Id b) { return binary(Op::kMul, a, b); }

  // [m,n] plus a length-n row vector broadcast over rows.
  Id add_rowvec(Id a, Id v) {
    const auto& ta = val(a);
    const auto& tv = val(v);
    if (ta.cols() != tv.cols() || tv.rank() != 1)
      throw DataError("add_rowvec shape mismatch: " + shape_str(ta.shape) + " + " + shape_str(tv.shape));
    Node n;
    n.op = Op::kAddRowVec;
    n.a = a;
    n.b = v;
    n.val = ta;
    const int rows = ta.rows(), cols = ta.cols();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) n.val.data[static_cast<std::size_t>(r) * cols + c] += tv.data[c];
    return push(std::move(n));
  }

  Id scale(Id a, double c) {
    Node n;
    n.op = Op::kScale;
    n.a = a;
    n.cval = c;
    n.val = val(a);
    for (auto& x : n.val.data) x = x * S(c);
    return push(std::move(n));
  }

  Id relu(Id a) {
    Node n;
    n.op = Op::kRelu;
    n.a = a;
    n.val = val(a);
    for (auto& x : n.val.data)
      if (!(x > 0.0)) x = S{};
    return push(std::move(n));
  }

  Id sigmoid(Id a) {
    Node n;
    n.op = Op::kSigmoid;
    n.a = a;
    n.val = val(a);
    for (auto& x : n.val.data) {
      using std::exp;
      x = S(1.0) / (S(1.0) + exp(-x));
    }
    return push(std::move(n));
  }

  Id tanh_(Id a) {
    Node n;
    n.op = Op::kTanh;
    n.a = a;
    n.val = val(a);
    for (auto& x : n.val.data) {
      using std::tanh;
      x = tanh(x);
    }
    return push(std::move(n));
  }

  // Row-wise softmax with the usual max-shift for stability.
  Id softmax_rows(Id a) {
    Node n;
    n.op = Op::kSoftmaxRows;
    n.a = a;
    n.val = val(a);
    const int rows = n.val.rows(), cols = n.val.cols();
    for (int r = 0; r < rows; ++r) {
      S* row = n.val.data.data() + static_cast<std::size_t>(r) * cols;
      S mx = row[0];
      for (int c = 1; c < cols; ++c)
        if (row[c] > mx) mx = row[c];
      S sum{};
      for (int c = 0; c < cols; ++c) {
        using std::exp;
        row[c] = exp(row[c] - mx);
        sum += row[c];
      }
      const S inv = S(1.0) / sum;
      for (int c = 0; c < cols; ++c) row[c] = row[c] * inv;
    }
    return push(std::move(n));
  }

  // Sum over rows of -log(p[row, label[row]]), probabilities clamped below.
  Id nll_sum(Id probs, std::vector<int> labels) {
    const auto& tp = val(probs);
    if (static_cast<int>(labels.size()) != tp.rows()) throw DataError("nll_sum: label count != row count");
    for (int l : labels)
      if (l < 0 || l >= tp.cols()) throw DataError("nll_sum: label out of range");
    Node n;
    n.op = Op::kNllSum;
    n.a = probs;
    n.labels = std::move(labels);
    S acc{};
    const int cols = tp.cols();
    for (std::size_t r = 0; r < n.labels.size(); ++r) {
      S p = tp.data[r * cols + n.labels[r]];
      if (!(p > kLogClamp)) p = S(kLogClamp);
      using std::log;
      acc += -log(p);
    }
    n.val = TensorT<S>({1}, {acc});
    return push(std::move(n));
  }

  Id sum(Id a) {
    Node n;
    n.op = Op::kSum;
    n.a = a;
    S acc{};
    for (const auto& x : val(a).data) acc += x;
    n.val = TensorT<S>({1}, {acc});
    return push(std::move(n));
  }

  Id sum_sq(Id a) {
    Node n;
    n.op = Op::kSumSq;
    n.a = a;
    S acc{};
    for (const auto& x : val(a).data) acc += x * x;
    n.val = TensorT<S>({1}, {acc});
    return push(std::move(n));
  }

  Id slice_cols(Id a, int c0, int c1) {
    const auto& ta = val(a);
    if (ta.rank() != 2 || c0 < 0 || c1 > ta.shape[1] || c0 >= c1)
      throw DataError("slice_cols: bad range on " + shape_str(ta.shape));
    Node n;
    n.op = Op::kSliceCols;
    n.a = a;
    n.c0 = c0;
    n.c1 = c1;
    const int rows = ta.shape[0], cols = ta.shape[1], w = c1 - c0;
    n.val = TensorT<S>::zeros({rows, w});
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < w; ++c)
        n.val.data[static_cast<std::size_t>(r) * w + c] = ta.data[static_cast<std::size_t>(r) * cols + c0 + c];
    return push(std::move(n));
  }

  const TensorT<S>& value(Id id) const { return nodes_[id].val; }

  const TensorT<S>& grad(Id id) const { return nodes_[id].grad; }

  // Accumulates d(root)/d(node) into every node's grad. Root must be scalar.
  void backward(Id root) {
    if (val(root).size() != 1) throw DataError("backward: root is not a scalar");
    for (auto& n : nodes_) n.grad = TensorT<S>::zeros(n.val.shape);
    nodes_[root].grad.data[0] = S(1.0);
    for (Id id = root; id >= 0; --id) {
      Node& n = nodes_[id];
      switch (n.op) {
        case Op::kInput:
          break;
        case Op::kMatmul: {
          const auto& ta = val(n.a);
          const auto& tb = val(n.b);
          const int m = ta.shape[0], k = ta.shape[1], c = tb.shape[1];
          detail::mm_abt_acc(n.grad.data.data(), tb.data.data(), nodes_[n.a].grad.data.data(), m, c, k);
          detail::mm_atb_acc(ta.data.data(), n.grad.data.data(), nodes_[n.b].grad.data.data(), m, k, c);
          break;
        }
        case Op::kAdd:
          acc(n.a, n.grad.data, +1);
          acc(n.b, n.grad.data, +1);
          break;
        case Op::kSub:
          acc(n.a, n.grad.data, +1);
          acc(n.b, n.grad.data, -1);
          break;
        case Op::kMul: {
          auto& ga = nodes_[n.a].grad.data;
          auto& gb = nodes_[n.b].grad.data;
          const auto& va = val(n.a).data;
          const auto& vb = val(n.b).data;
          for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
            ga[i] += n.grad.data[i] * vb[i];
            gb[i] += n.grad.data[i] * va[i];
          }
          break;
        }
        case Op::kAddRowVec: {
          acc(n.a, n.grad.data, +1);
          auto& gv = nodes_[n.b].grad.data;
          const int rows = n.val.rows(), cols = n.val.cols();
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) gv[c] += n.grad.data[static_cast<std::size_t>(r) * cols + c];
          break;
        }
        case Op::kScale: {
          auto& ga = nodes_[n.a].grad.data;
          for (std::size_t i = 0; i < n.grad.data.size(); ++i) ga[i] += n.grad.data[i] * S(n.cval);
          break;
        }
        case Op::kRelu: {
          auto& ga = nodes_[n.a].grad.data;
          const auto& va = val(n.a).data;
          for (std::size_t i = 0; i < n.grad.data.size(); ++i)
            if (va[i] > 0.0) ga[i] += n.grad.data[i];
          break;
        }
        case Op::kSigmoid: {
          auto& ga = nodes_[n.a].grad.data;
          for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
            const S y = n.val.data[i];
            ga[i] += n.grad.data[i] * y * (S(1.0) - y);
          }
          break;
        }
        case Op::kTanh: {
          auto& ga = nodes_[n.a].grad.data;
          for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
            const S y = n.val.data[i];
            ga[i] += n.grad.data[i] * (S(1.0) - y * y);
          }
          break;
        }
        case Op::kSoftmaxRows: {
          auto& ga = nodes_[n.a].grad.data;
          const int rows = n.val.rows(), cols = n.val.cols();
          for (int r = 0; r < rows; ++r) {
            const S* y = n.val.data.data() + static_cast<std::size_t>(r) * cols;
            const S* gy = n.grad.data.data() + static_cast<std::size_t>(r) * cols;
            S dot{};
            for (int c = 0; c < cols; ++c) dot += gy[c] * y[c];
            S* gx = ga.data() + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) gx[c] += y[c] * (gy[c] - dot);
          }
          break;
        }
        case Op::kNllSum: {
          auto& ga = nodes_[n.a].grad.data;
          const auto& va = val(n.a).data;
          const int cols = val(n.a).cols();
          const S g = n.grad.data[0];
          for (std::size_t r = 0; r < n.labels.size(); ++r) {
            const std::size_t idx = r * cols + n.labels[r];
            if (va[idx] > kLogClamp) ga[idx] += -g / va[idx];
          }
          break;
        }
        case Op::kSum: {
          auto& ga = nodes_[n.a].grad.data;
          const S g = n.grad.data[0];
          for (auto& x : ga) x += g;
          break;
        }
        case Op::kSumSq: {
          auto& ga = nodes_[n.a].grad.data;
          const auto& va = val(n.a).data;
          const S g = n.grad.data[0];
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += S(2.0) * va[i] * g;
          break;
        }
        case Op::kSliceCols: {
          auto& ga = nodes_[n.a].grad.data;
          const int rows = n.val.rows(), w = n.val.cols(), cols = val(n.a).cols();
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < w; ++c)
              ga[static_cast<std::size_t>(r) * cols + n.c0 + c] += n.grad.data[static_cast<std::size_t>(r) * w + c];
          break;
        }
      }
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Op op = Op::kInput;
    Id a = -1;
    Id b = -1;
    int c0 = 0, c1 = 0;
    double cval = 0.0;
    TensorT<S> val;
    TensorT<S> grad;
    std::vector<int> labels;
  };

  const TensorT<S>& val(Id id) const { return nodes_[id].val; }

  Id push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Id binary(Op op, Id a, Id b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    if (!same_shape(ta.shape, tb.shape))
      throw DataError("elementwise shape mismatch: " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.val = ta;
    for (std::size_t i = 0; i < n.val.data.size(); ++i) {
      if (op == Op::kAdd)
        n.val.data[i] += tb.data[i];
      else if (op == Op::kSub)
        n.val.data[i] -= tb.data[i];
      else
        n.val.data[i] *= tb.data[i];
    }
    return push(std::move(n));
  }

  void acc(Id target, const std::vector<S>& g, int sign) {
    auto& gt = nodes_[target].grad.data;
    if (sign > 0)
      for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
    else
      for (std::size_t i = 0; i < g.size(); ++i) gt[i] -= g[i];
  }

  std::vector<Node> nodes_;
};

using Graph = GraphT<double>;

}  // namespace uad
