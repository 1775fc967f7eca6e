#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "deisi/tensor.hpp"

namespace deisi {

class Graph;

// Handle to a value recorded on a Graph's tape.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;
};

// Reverse-mode tape over a fixed set of tensor operations. Every op checks
// shapes and records an adjoint; backward() accumulates gradients for all
// ancestors of the loss. One Graph instance covers one forward/backward pass.
class Graph {
 public:
  // Leaves. Parameters get gradients; constants are excluded from backward.
  Var param(Tensor value);
  Var constant(Tensor value);

  // Core linear algebra.
  Var matmul(Var a, Var b);
  Var transpose(Var a);

  // Elementwise arithmetic (same shape).
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);

  // Scalar-constant arithmetic.
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  // c - a, elementwise.
  Var rsub_scalar(Var a, double c);

  // Broadcasting, explicit only.
  Var add_rowvec(Var a, Var v);             // a[m,n] + v[1,n] per row
  Var mul_colvec(Var a, Var v);             // a[m,n] scaled per row by v[m,1]
  Var broadcast_row(Var v, std::size_t m);  // tile v[1,n] to [m,n]

  // Shape surgery.
  Var concat_cols(Var a, Var b);
  Var concat_rows(Var a, Var b);
  Var slice_cols(Var a, std::size_t from, std::size_t to);  // [from,to)
  Var gather_rows(Var a, std::vector<std::size_t> idx);
  Var stack_rows(const std::vector<Var>& rows);  // each [1,n] -> [m,n]

  // Reductions.
  Var sum_all(Var a);    // -> [1,1]
  Var mean_all(Var a);   // -> [1,1]
  Var sum_rows(Var a);   // row sums    -> [m,1]
  Var sum_cols(Var a);   // column sums -> [1,n]
  Var mean_rows(Var a);  // -> [m,1]
  Var mean_cols(Var a);  // -> [1,n]

  // Nonlinearities.
  Var sigmoid(Var a);
  Var tanh_(Var a);
  Var relu(Var a);
  Var square(Var a);
  Var sqrt_(Var a);  // sqrt(max(x,0)); adjoint guarded near 0
  Var logsigmoid(Var a);
  Var log_clamped(Var a, double floor = 1e-12);
  Var softmax_rows(Var a);

  // Row-geometry ops.
  Var l2norm_rows(Var a);       // -> [m,1]; zero rows give 0
  Var l2normalize_rows(Var a);  // zero rows pass through unchanged
  Var pairwise_cosine(Var a);   // [m,d] -> [m,m]; zero-norm rows give 0
  Var pairwise_dist(Var a);     // [m,d] -> [m,m] Euclidean distances

  // Values and gradients.
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  void backward(Var loss);
  bool has_grad(Var v) const;
  Tensor grad(Var v) const;  // zero tensor if loss does not reach v

  std::size_t node_count() const { return nodes_.size(); }

 private:
  using BackFn = std::function<void(Graph&, std::size_t self)>;

  struct Node {
    Tensor value;
    bool needs_grad = false;
    BackFn back;
  };

  Var emit(const char* op, Tensor value, bool needs_grad, BackFn back);
  void accumulate(std::size_t id, const Tensor& g);
  const Tensor& val(std::size_t id) const { return nodes_[id].value; }
  const Tensor& out_grad(std::size_t self) const { return grads_[self]; }
  bool needs(Var a) const { return nodes_[a.id].needs_grad; }
  bool needs(Var a, Var b) const { return needs(a) || needs(b); }
  void check_same_shape(const char* op, Var a, Var b) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

}  // namespace deisi
