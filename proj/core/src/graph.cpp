#include "deisi/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace deisi {

namespace {

void add_into(Tensor& dst, const Tensor& src) {
  auto& d = dst.data();
  const auto& s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                              " vs " + b.shape_str());
}

double stable_logsigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

constexpr double kNormGuard = 1e-12;
constexpr double kSqrtAdjointFloor = 1e-8;

}  // namespace

Var Graph::emit(const char* op, Tensor value, bool needs_grad, BackFn back) {
  if (!value.all_finite())
    throw std::runtime_error(std::string(op) + ": non-finite value produced");
  nodes_.push_back(Node{std::move(value), needs_grad, std::move(back)});
  return Var{this, nodes_.size() - 1};
}

Var Graph::param(Tensor value) { return emit("param", std::move(value), true, nullptr); }
Var Graph::constant(Tensor value) { return emit("constant", std::move(value), false, nullptr); }

void Graph::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].needs_grad) return;
  if (grads_[id].empty())
    grads_[id] = g;
  else
    add_into(grads_[id], g);
}

void Graph::check_same_shape(const char* op, Var a, Var b) const {
  if (!val(a.id).same_shape(val(b.id))) shape_error(op, val(a.id), val(b.id));
}

bool Graph::has_grad(Var v) const {
  return v.id < grads_.size() && !grads_[v.id].empty();
}

Tensor Graph::grad(Var v) const {
  if (!has_grad(v)) return Tensor::zeros(val(v.id).shape());
  return grads_[v.id];
}

void Graph::backward(Var loss) {
  const Tensor& lv = val(loss.id);
  if (lv.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  grads_.assign(nodes_.size(), Tensor());
  grads_[loss.id] = Tensor::full(lv.shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (grads_[i].empty()) continue;
    if (nodes_[i].back) nodes_[i].back(*this, i);
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

Var Graph::matmul(Var a, Var b) {
  const Tensor& A = val(a.id);
  const Tensor& B = val(b.id);
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  std::size_t m = A.rows(), p = A.cols(), n = B.cols();
  Tensor Y = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < p; ++k) {
      double aik = A.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) Y.at(i, j) += aik * B.at(k, j);
    }
  std::size_t ai = a.id, bi = b.id;
  return emit("matmul", std::move(Y), needs(a, b), [ai, bi](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& A = g.val(ai);
    const Tensor& B = g.val(bi);
    std::size_t m = A.rows(), p = A.cols(), n = B.cols();
    if (g.nodes_[ai].needs_grad) {
      Tensor GA = Tensor::zeros({m, p});  // G * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double gij = G.at(i, j);
          if (gij == 0.0) continue;
          for (std::size_t k = 0; k < p; ++k) GA.at(i, k) += gij * B.at(k, j);
        }
      g.accumulate(ai, GA);
    }
    if (g.nodes_[bi].needs_grad) {
      Tensor GB = Tensor::zeros({p, n});  // A^T * G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < p; ++k) {
          double aik = A.at(i, k);
          if (aik == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) GB.at(k, j) += aik * G.at(i, j);
        }
      g.accumulate(bi, GB);
    }
  });
}

Var Graph::transpose(Var a) {
  const Tensor& A = val(a.id);
  std::size_t m = A.rows(), n = A.cols();
  Tensor Y = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) Y.at(j, i) = A.at(i, j);
  std::size_t ai = a.id;
  return emit("transpose", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    std::size_t m = G.cols(), n = G.rows();
    Tensor GA = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) GA.at(i, j) = G.at(j, i);
    g.accumulate(ai, GA);
  });
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic

Var Graph::add(Var a, Var b) {
  check_same_shape("add", a, b);
  Tensor Y = val(a.id);
  add_into(Y, val(b.id));
  std::size_t ai = a.id, bi = b.id;
  return emit("add", std::move(Y), needs(a, b), [ai, bi](Graph& g, std::size_t self) {
    g.accumulate(ai, g.out_grad(self));
    g.accumulate(bi, g.out_grad(self));
  });
}

Var Graph::sub(Var a, Var b) {
  check_same_shape("sub", a, b);
  Tensor Y = val(a.id);
  const auto& bd = val(b.id).data();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] -= bd[i];
  std::size_t ai = a.id, bi = b.id;
  return emit("sub", std::move(Y), needs(a, b), [ai, bi](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    g.accumulate(ai, G);
    if (g.nodes_[bi].needs_grad) {
      Tensor GB = G;
      for (auto& x : GB.data()) x = -x;
      g.accumulate(bi, GB);
    }
  });
}

Var Graph::mul(Var a, Var b) {
  check_same_shape("mul", a, b);
  Tensor Y = val(a.id);
  const auto& bd = val(b.id).data();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] *= bd[i];
  std::size_t ai = a.id, bi = b.id;
  return emit("mul", std::move(Y), needs(a, b), [ai, bi](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    if (g.nodes_[ai].needs_grad) {
      Tensor GA = G;
      const auto& B = g.val(bi).data();
      for (std::size_t i = 0; i < GA.size(); ++i) GA[i] *= B[i];
      g.accumulate(ai, GA);
    }
    if (g.nodes_[bi].needs_grad) {
      Tensor GB = G;
      const auto& A = g.val(ai).data();
      for (std::size_t i = 0; i < GB.size(); ++i) GB[i] *= A[i];
      g.accumulate(bi, GB);
    }
  });
}

Var Graph::div(Var a, Var b) {
  check_same_shape("div", a, b);
  Tensor Y = val(a.id);
  const auto& bd = val(b.id).data();
  for (std::size_t i = 0; i < Y.size(); ++i) {
    if (bd[i] == 0.0) throw std::domain_error("div: division by zero");
    Y[i] /= bd[i];
  }
  std::size_t ai = a.id, bi = b.id;
  return emit("div", std::move(Y), needs(a, b), [ai, bi](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const auto& A = g.val(ai).data();
    const auto& B = g.val(bi).data();
    if (g.nodes_[ai].needs_grad) {
      Tensor GA = G;
      for (std::size_t i = 0; i < GA.size(); ++i) GA[i] /= B[i];
      g.accumulate(ai, GA);
    }
    if (g.nodes_[bi].needs_grad) {
      Tensor GB = G;
      for (std::size_t i = 0; i < GB.size(); ++i) GB[i] *= -A[i] / (B[i] * B[i]);
      g.accumulate(bi, GB);
    }
  });
}

Var Graph::scale(Var a, double c) {
  Tensor Y = val(a.id);
  for (auto& x : Y.data()) x *= c;
  std::size_t ai = a.id;
  return emit("scale", std::move(Y), needs(a), [ai, c](Graph& g, std::size_t self) {
    Tensor GA = g.out_grad(self);
    for (auto& x : GA.data()) x *= c;
    g.accumulate(ai, GA);
  });
}

Var Graph::add_scalar(Var a, double c) {
  Tensor Y = val(a.id);
  for (auto& x : Y.data()) x += c;
  std::size_t ai = a.id;
  return emit("add_scalar", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    g.accumulate(ai, g.out_grad(self));
  });
}

Var Graph::rsub_scalar(Var a, double c) {
  Tensor Y = val(a.id);
  for (auto& x : Y.data()) x = c - x;
  std::size_t ai = a.id;
  return emit("rsub_scalar", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    Tensor GA = g.out_grad(self);
    for (auto& x : GA.data()) x = -x;
    g.accumulate(ai, GA);
  });
}

// ---------------------------------------------------------------------------
// Broadcasting

Var Graph::add_rowvec(Var a, Var v) {
  const Tensor& A = val(a.id);
  const Tensor& V = val(v.id);
  if (V.rows() != 1 || V.cols() != A.cols()) shape_error("add_rowvec", A, V);
  Tensor Y = A;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) Y.at(i, j) += V.at(0, j);
  std::size_t ai = a.id, vi = v.id;
  return emit("add_rowvec", std::move(Y), needs(a, v), [ai, vi](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    g.accumulate(ai, G);
    if (g.nodes_[vi].needs_grad) {
      Tensor GV = Tensor::zeros({1, G.cols()});
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) GV.at(0, j) += G.at(i, j);
      g.accumulate(vi, GV);
    }
  });
}

Var Graph::mul_colvec(Var a, Var v) {
  const Tensor& A = val(a.id);
  const Tensor& V = val(v.id);
  if (V.cols() != 1 || V.rows() != A.rows()) shape_error("mul_colvec", A, V);
  Tensor Y = A;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) Y.at(i, j) *= V.at(i, 0);
  std::size_t ai = a.id, vi = v.id;
  return emit("mul_colvec", std::move(Y), needs(a, v), [ai, vi](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& A = g.val(ai);
    const Tensor& V = g.val(vi);
    if (g.nodes_[ai].needs_grad) {
      Tensor GA = G;
      for (std::size_t i = 0; i < GA.rows(); ++i)
        for (std::size_t j = 0; j < GA.cols(); ++j) GA.at(i, j) *= V.at(i, 0);
      g.accumulate(ai, GA);
    }
    if (g.nodes_[vi].needs_grad) {
      Tensor GV = Tensor::zeros({G.rows(), 1});
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) GV.at(i, 0) += G.at(i, j) * A.at(i, j);
      g.accumulate(vi, GV);
    }
  });
}

Var Graph::broadcast_row(Var v, std::size_t m) {
  const Tensor& V = val(v.id);
  if (V.rows() != 1) shape_error("broadcast_row", V, V);
  Tensor Y = Tensor::zeros({m, V.cols()});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < V.cols(); ++j) Y.at(i, j) = V.at(0, j);
  std::size_t vi = v.id;
  return emit("broadcast_row", std::move(Y), needs(v), [vi](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    Tensor GV = Tensor::zeros({1, G.cols()});
    for (std::size_t i = 0; i < G.rows(); ++i)
      for (std::size_t j = 0; j < G.cols(); ++j) GV.at(0, j) += G.at(i, j);
    g.accumulate(vi, GV);
  });
}

// ---------------------------------------------------------------------------
// Shape surgery

Var Graph::concat_cols(Var a, Var b) {
  const Tensor& A = val(a.id);
  const Tensor& B = val(b.id);
  if (A.rows() != B.rows()) shape_error("concat_cols", A, B);
  std::size_t m = A.rows(), na = A.cols(), nb = B.cols();
  Tensor Y = Tensor::zeros({m, na + nb});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < na; ++j) Y.at(i, j) = A.at(i, j);
    for (std::size_t j = 0; j < nb; ++j) Y.at(i, na + j) = B.at(i, j);
  }
  std::size_t ai = a.id, bi = b.id;
  return emit("concat_cols", std::move(Y), needs(a, b),
              [ai, bi, na, nb](Graph& g, std::size_t self) {
                const Tensor& G = g.out_grad(self);
                std::size_t m = G.rows();
                if (g.nodes_[ai].needs_grad) {
                  Tensor GA = Tensor::zeros({m, na});
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < na; ++j) GA.at(i, j) = G.at(i, j);
                  g.accumulate(ai, GA);
                }
                if (g.nodes_[bi].needs_grad) {
                  Tensor GB = Tensor::zeros({m, nb});
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < nb; ++j) GB.at(i, j) = G.at(i, na + j);
                  g.accumulate(bi, GB);
                }
              });
}

Var Graph::concat_rows(Var a, Var b) {
  const Tensor& A = val(a.id);
  const Tensor& B = val(b.id);
  if (A.cols() != B.cols()) shape_error("concat_rows", A, B);
  std::size_t ma = A.rows(), mb = B.rows(), n = A.cols();
  Tensor Y = Tensor::zeros({ma + mb, n});
  for (std::size_t i = 0; i < ma; ++i)
    for (std::size_t j = 0; j < n; ++j) Y.at(i, j) = A.at(i, j);
  for (std::size_t i = 0; i < mb; ++i)
    for (std::size_t j = 0; j < n; ++j) Y.at(ma + i, j) = B.at(i, j);
  std::size_t ai = a.id, bi = b.id;
  return emit("concat_rows", std::move(Y), needs(a, b),
              [ai, bi, ma, mb](Graph& g, std::size_t self) {
                const Tensor& G = g.out_grad(self);
                std::size_t n = G.cols();
                if (g.nodes_[ai].needs_grad) {
                  Tensor GA = Tensor::zeros({ma, n});
                  for (std::size_t i = 0; i < ma; ++i)
                    for (std::size_t j = 0; j < n; ++j) GA.at(i, j) = G.at(i, j);
                  g.accumulate(ai, GA);
                }
                if (g.nodes_[bi].needs_grad) {
                  Tensor GB = Tensor::zeros({mb, n});
                  for (std::size_t i = 0; i < mb; ++i)
                    for (std::size_t j = 0; j < n; ++j) GB.at(i, j) = G.at(ma + i, j);
                  g.accumulate(bi, GB);
                }
              });
}

Var Graph::slice_cols(Var a, std::size_t from, std::size_t to) {
  const Tensor& A = val(a.id);
  if (from >= to || to > A.cols())
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(from) + "," +
                                std::to_string(to) + ") on " + A.shape_str());
  std::size_t m = A.rows(), n = to - from;
  Tensor Y = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) Y.at(i, j) = A.at(i, from + j);
  std::size_t ai = a.id;
  std::size_t full = A.cols();
  return emit("slice_cols", std::move(Y), needs(a),
              [ai, from, full](Graph& g, std::size_t self) {
                const Tensor& G = g.out_grad(self);
                Tensor GA = Tensor::zeros({G.rows(), full});
                for (std::size_t i = 0; i < G.rows(); ++i)
                  for (std::size_t j = 0; j < G.cols(); ++j) GA.at(i, from + j) = G.at(i, j);
                g.accumulate(ai, GA);
              });
}

Var Graph::gather_rows(Var a, std::vector<std::size_t> idx) {
  const Tensor& A = val(a.id);
  std::size_t n = A.cols();
  Tensor Y = Tensor::zeros({idx.size(), n});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= A.rows())
      throw std::invalid_argument("gather_rows: index " + std::to_string(idx[r]) +
                                  " out of range for " + A.shape_str());
    for (std::size_t j = 0; j < n; ++j) Y.at(r, j) = A.at(idx[r], j);
  }
  std::size_t ai = a.id, rows = A.rows();
  return emit("gather_rows", std::move(Y), needs(a),
              [ai, idx = std::move(idx), rows](Graph& g, std::size_t self) {
                const Tensor& G = g.out_grad(self);
                Tensor GA = Tensor::zeros({rows, G.cols()});
                for (std::size_t r = 0; r < idx.size(); ++r)
                  for (std::size_t j = 0; j < G.cols(); ++j)
                    GA.at(idx[r], j) += G.at(r, j);
                g.accumulate(ai, GA);
              });
}

Var Graph::stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
  std::size_t n = val(rows[0].id).cols();
  Tensor Y = Tensor::zeros({rows.size(), n});
  bool ng = false;
  std::vector<std::size_t> ids(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& R = val(rows[r].id);
    if (R.rows() != 1 || R.cols() != n) shape_error("stack_rows", val(rows[0].id), R);
    for (std::size_t j = 0; j < n; ++j) Y.at(r, j) = R.at(0, j);
    ids[r] = rows[r].id;
    ng = ng || nodes_[ids[r]].needs_grad;
  }
  return emit("stack_rows", std::move(Y), ng,
              [ids = std::move(ids)](Graph& g, std::size_t self) {
                const Tensor& G = g.out_grad(self);
                for (std::size_t r = 0; r < ids.size(); ++r) {
                  if (!g.nodes_[ids[r]].needs_grad) continue;
                  Tensor GR = Tensor::zeros({1, G.cols()});
                  for (std::size_t j = 0; j < G.cols(); ++j) GR.at(0, j) = G.at(r, j);
                  g.accumulate(ids[r], GR);
                }
              });
}

// ---------------------------------------------------------------------------
// Reductions

Var Graph::sum_all(Var a) {
  const Tensor& A = val(a.id);
  double s = 0.0;
  for (double x : A.data()) s += x;
  std::size_t ai = a.id;
  return emit("sum_all", Tensor::scalar(s), needs(a), [ai](Graph& g, std::size_t self) {
    double gv = g.out_grad(self).item();
    g.accumulate(ai, Tensor::full(g.val(ai).shape(), gv));
  });
}

Var Graph::mean_all(Var a) {
  const Tensor& A = val(a.id);
  double s = 0.0;
  for (double x : A.data()) s += x;
  double inv = 1.0 / static_cast<double>(A.size());
  std::size_t ai = a.id;
  return emit("mean_all", Tensor::scalar(s * inv), needs(a),
              [ai, inv](Graph& g, std::size_t self) {
                double gv = g.out_grad(self).item() * inv;
                g.accumulate(ai, Tensor::full(g.val(ai).shape(), gv));
              });
}

Var Graph::sum_rows(Var a) {
  const Tensor& A = val(a.id);
  Tensor Y = Tensor::zeros({A.rows(), 1});
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) Y.at(i, 0) += A.at(i, j);
  std::size_t ai = a.id;
  return emit("sum_rows", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& A = g.val(ai);
    Tensor GA = Tensor::zeros(A.shape());
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) GA.at(i, j) = G.at(i, 0);
    g.accumulate(ai, GA);
  });
}

Var Graph::sum_cols(Var a) {
  const Tensor& A = val(a.id);
  Tensor Y = Tensor::zeros({1, A.cols()});
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) Y.at(0, j) += A.at(i, j);
  std::size_t ai = a.id;
  return emit("sum_cols", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& A = g.val(ai);
    Tensor GA = Tensor::zeros(A.shape());
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) GA.at(i, j) = G.at(0, j);
    g.accumulate(ai, GA);
  });
}

Var Graph::mean_rows(Var a) {
  Var s = sum_rows(a);
  return scale(s, 1.0 / static_cast<double>(val(a.id).cols()));
}

Var Graph::mean_cols(Var a) {
  Var s = sum_cols(a);
  return scale(s, 1.0 / static_cast<double>(val(a.id).rows()));
}

// ---------------------------------------------------------------------------
// Nonlinearities

Var Graph::sigmoid(Var a) {
  Tensor Y = val(a.id);
  for (auto& x : Y.data()) x = 1.0 / (1.0 + std::exp(-x));
  std::size_t ai = a.id;
  return emit("sigmoid", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    Tensor GA = g.out_grad(self);
    const auto& Y = g.val(self).data();
    for (std::size_t i = 0; i < GA.size(); ++i) GA[i] *= Y[i] * (1.0 - Y[i]);
    g.accumulate(ai, GA);
  });
}

Var Graph::tanh_(Var a) {
  Tensor Y = val(a.id);
  for (auto& x : Y.data()) x = std::tanh(x);
  std::size_t ai = a.id;
  return emit("tanh", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    Tensor GA = g.out_grad(self);
    const auto& Y = g.val(self).data();
    for (std::size_t i = 0; i < GA.size(); ++i) GA[i] *= 1.0 - Y[i] * Y[i];
    g.accumulate(ai, GA);
  });
}

Var Graph::relu(Var a) {
  Tensor Y = val(a.id);
  for (auto& x : Y.data()) x = x > 0.0 ? x : 0.0;
  std::size_t ai = a.id;
  return emit("relu", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    Tensor GA = g.out_grad(self);
    const auto& X = g.val(ai).data();
    for (std::size_t i = 0; i < GA.size(); ++i)
      if (X[i] <= 0.0) GA[i] = 0.0;
    g.accumulate(ai, GA);
  });
}

Var Graph::square(Var a) {
  Tensor Y = val(a.id);
  for (auto& x : Y.data()) x = x * x;
  std::size_t ai = a.id;
  return emit("square", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    Tensor GA = g.out_grad(self);
    const auto& X = g.val(ai).data();
    for (std::size_t i = 0; i < GA.size(); ++i) GA[i] *= 2.0 * X[i];
    g.accumulate(ai, GA);
  });
}

Var Graph::sqrt_(Var a) {
  Tensor Y = val(a.id);
  for (auto& x : Y.data()) x = std::sqrt(x > 0.0 ? x : 0.0);
  std::size_t ai = a.id;
  return emit("sqrt", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    Tensor GA = g.out_grad(self);
    const auto& X = g.val(ai).data();
    const auto& Y = g.val(self).data();
    for (std::size_t i = 0; i < GA.size(); ++i) {
      if (X[i] <= 0.0)
        GA[i] = 0.0;
      else
        GA[i] /= 2.0 * std::max(Y[i], kSqrtAdjointFloor);
    }
    g.accumulate(ai, GA);
  });
}

Var Graph::logsigmoid(Var a) {
  Tensor Y = val(a.id);
  for (auto& x : Y.data()) x = stable_logsigmoid(x);
  std::size_t ai = a.id;
  return emit("logsigmoid", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    Tensor GA = g.out_grad(self);
    const auto& X = g.val(ai).data();
    for (std::size_t i = 0; i < GA.size(); ++i)
      GA[i] *= 1.0 / (1.0 + std::exp(X[i]));  // sigma(-x)
    g.accumulate(ai, GA);
  });
}

Var Graph::log_clamped(Var a, double floor) {
  Tensor Y = val(a.id);
  for (auto& x : Y.data()) x = std::log(x > floor ? x : floor);
  std::size_t ai = a.id;
  return emit("log_clamped", std::move(Y), needs(a), [ai, floor](Graph& g, std::size_t self) {
    Tensor GA = g.out_grad(self);
    const auto& X = g.val(ai).data();
    for (std::size_t i = 0; i < GA.size(); ++i) {
      if (X[i] > floor)
        GA[i] /= X[i];
      else
        GA[i] = 0.0;
    }
    g.accumulate(ai, GA);
  });
}

Var Graph::softmax_rows(Var a) {
  const Tensor& A = val(a.id);
  Tensor Y = A;
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double mx = A.at(i, 0);
    for (std::size_t j = 1; j < A.cols(); ++j) mx = std::max(mx, A.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < A.cols(); ++j) {
      double e = std::exp(A.at(i, j) - mx);
      Y.at(i, j) = e;
      z += e;
    }
    for (std::size_t j = 0; j < A.cols(); ++j) Y.at(i, j) /= z;
  }
  std::size_t ai = a.id;
  return emit("softmax_rows", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& Y = g.val(self);
    Tensor GA = Tensor::zeros(Y.shape());
    for (std::size_t i = 0; i < Y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < Y.cols(); ++j) dot += G.at(i, j) * Y.at(i, j);
      for (std::size_t j = 0; j < Y.cols(); ++j)
        GA.at(i, j) = Y.at(i, j) * (G.at(i, j) - dot);
    }
    g.accumulate(ai, GA);
  });
}

// ---------------------------------------------------------------------------
// Row geometry

Var Graph::l2norm_rows(Var a) {
  const Tensor& A = val(a.id);
  Tensor Y = Tensor::zeros({A.rows(), 1});
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < A.cols(); ++j) s += A.at(i, j) * A.at(i, j);
    Y.at(i, 0) = std::sqrt(s);
  }
  std::size_t ai = a.id;
  return emit("l2norm_rows", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& A = g.val(ai);
    const Tensor& N = g.val(self);
    Tensor GA = Tensor::zeros(A.shape());
    for (std::size_t i = 0; i < A.rows(); ++i) {
      double n = N.at(i, 0);
      if (n <= kNormGuard) continue;
      for (std::size_t j = 0; j < A.cols(); ++j)
        GA.at(i, j) = G.at(i, 0) * A.at(i, j) / n;
    }
    g.accumulate(ai, GA);
  });
}

Var Graph::l2normalize_rows(Var a) {
  const Tensor& A = val(a.id);
  Tensor Y = A;
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < A.cols(); ++j) s += A.at(i, j) * A.at(i, j);
    double n = std::sqrt(s);
    if (n <= kNormGuard) continue;  // zero rows pass through
    for (std::size_t j = 0; j < A.cols(); ++j) Y.at(i, j) /= n;
  }
  std::size_t ai = a.id;
  return emit("l2normalize_rows", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& A = g.val(ai);
    const Tensor& Y = g.val(self);
    Tensor GA = Tensor::zeros(A.shape());
    for (std::size_t i = 0; i < A.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < A.cols(); ++j) s += A.at(i, j) * A.at(i, j);
      double n = std::sqrt(s);
      if (n <= kNormGuard) {
        for (std::size_t j = 0; j < A.cols(); ++j) GA.at(i, j) = G.at(i, j);
        continue;
      }
      double dot = 0.0;
      for (std::size_t j = 0; j < A.cols(); ++j) dot += G.at(i, j) * Y.at(i, j);
      for (std::size_t j = 0; j < A.cols(); ++j)
        GA.at(i, j) = (G.at(i, j) - dot * Y.at(i, j)) / n;
    }
    g.accumulate(ai, GA);
  });
}

Var Graph::pairwise_cosine(Var a) {
  const Tensor& A = val(a.id);
  std::size_t m = A.rows(), d = A.cols();
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += A.at(i, j) * A.at(i, j);
    norms[i] = std::sqrt(s);
  }
  Tensor Y = Tensor::zeros({m, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (norms[i] <= kNormGuard || norms[j] <= kNormGuard) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += A.at(i, c) * A.at(j, c);
      Y.at(i, j) = dot / (norms[i] * norms[j]);
    }
  std::size_t ai = a.id;
  return emit("pairwise_cosine", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& A = g.val(ai);
    const Tensor& C = g.val(self);
    std::size_t m = A.rows(), d = A.cols();
    std::vector<double> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += A.at(i, j) * A.at(i, j);
      norms[i] = std::sqrt(s);
    }
    Tensor GA = Tensor::zeros(A.shape());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double gij = G.at(i, j);
        if (gij == 0.0) continue;
        if (norms[i] <= kNormGuard || norms[j] <= kNormGuard) continue;
        double inv = 1.0 / (norms[i] * norms[j]);
        double cij = C.at(i, j);
        for (std::size_t c = 0; c < d; ++c) {
          GA.at(i, c) += gij * (A.at(j, c) * inv - cij * A.at(i, c) / (norms[i] * norms[i]));
          GA.at(j, c) += gij * (A.at(i, c) * inv - cij * A.at(j, c) / (norms[j] * norms[j]));
        }
      }
    g.accumulate(ai, GA);
  });
}

Var Graph::pairwise_dist(Var a) {
  const Tensor& A = val(a.id);
  std::size_t m = A.rows(), d = A.cols();
  Tensor Y = Tensor::zeros({m, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        double diff = A.at(i, c) - A.at(j, c);
        s += diff * diff;
      }
      double dist = std::sqrt(s);
      Y.at(i, j) = dist;
      Y.at(j, i) = dist;
    }
  std::size_t ai = a.id;
  return emit("pairwise_dist", std::move(Y), needs(a), [ai](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& A = g.val(ai);
    const Tensor& D = g.val(self);
    std::size_t m = A.rows(), d = A.cols();
    Tensor GA = Tensor::zeros(A.shape());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        double gij = G.at(i, j);
        double dist = D.at(i, j);
        if (gij == 0.0 || dist <= kNormGuard) continue;
        for (std::size_t c = 0; c < d; ++c) {
          double u = (A.at(i, c) - A.at(j, c)) / dist;
          GA.at(i, c) += gij * u;
          GA.at(j, c) -= gij * u;
        }
      }
    g.accumulate(ai, GA);
  });
}

}  // namespace deisi
