#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dgn/error.hpp"
#include "dgn/tensor.hpp"

namespace dgn {

// Reverse-mode gradient accumulation over a recorded computation.
//
// Every operation appends a node holding its output value and a closure that
// routes the output gradient to the input gradients. backward(loss) seeds the
// scalar loss with gradient 1 and walks the record in reverse. Gradients of
// parameter leaves are accumulated into the owning Parameter object (see
// params.hpp), so repeated use of one parameter sums contributions.
//
// All ops are single-threaded and evaluate in a fixed order: identical inputs
// give bit-identical outputs within one precision mode.
template <typename T>
class Tape {
 public:
  using Id = std::uint32_t;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t node_count() const { return nodes_.size(); }

  const Tensor<T>& value(Id id) const { return nodes_[id].value; }

  // Gradient of the last backward() pass w.r.t. node `id`; zeros if the node
  // did not influence the loss.
  Tensor<T> grad(Id id) const {
    if (grads_.size() > id && !grads_[id].empty()) return grads_[id];
    Tensor<T> g = nodes_[id].value;
    g.fill(T(0));
    return g;
  }

  // ---- leaves ----

  Id constant(Tensor<T> v) { return push(std::move(v), {}); }

  // Parameter leaf: after backward(), the accumulated gradient is added into
  // `grad_sink` (which must outlive the tape).
  Id leaf(const Tensor<T>& value, Tensor<T>* grad_sink) {
    Id id = push(value, {});
    if (grad_sink) param_sinks_.push_back({id, grad_sink});
    return id;
  }

  // ---- elementwise ----

  Id add(Id a, Id b) {
    require_same(a, b, "add");
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    return push(std::move(out), [a, b](Tape& t, Id self) {
      t.accumulate(a, t.grads_[self]);
      t.accumulate(b, t.grads_[self]);
    });
  }

  Id mul(Id a, Id b) {
    require_same(a, b, "mul");
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    return push(std::move(out), [a, b](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      Tensor<T> ga = g;
      Tensor<T> gb = g;
      const Tensor<T>& va = t.value(a);
      const Tensor<T>& vb2 = t.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] = g[i] * vb2[i];
        gb[i] = g[i] * va[i];
      }
      t.accumulate(a, ga);
      t.accumulate(b, gb);
    });
  }

  Id tanh(Id a) {
    Tensor<T> out = value(a);
    for (T& x : out.data()) x = std::tanh(x);
    return push(std::move(out), [a](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& y = t.value(self);
      Tensor<T> ga = g;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * (T(1) - y[i] * y[i]);
      t.accumulate(a, ga);
    });
  }

  Id sigmoid(Id a) {
    Tensor<T> out = value(a);
    for (T& x : out.data()) x = sigmoid_scalar(x);
    return push(std::move(out), [a](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& y = t.value(self);
      Tensor<T> ga = g;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * y[i] * (T(1) - y[i]);
      t.accumulate(a, ga);
    });
  }

  Id one_minus(Id a) {
    Tensor<T> out = value(a);
    for (T& x : out.data()) x = T(1) - x;
    return push(std::move(out), [a](Tape& t, Id self) {
      Tensor<T> ga = t.grads_[self];
      for (T& x : ga.data()) x = -x;
      t.accumulate(a, ga);
    });
  }

  Id scale(Id a, T c) {
    Tensor<T> out = value(a);
    for (T& x : out.data()) x *= c;
    return push(std::move(out), [a, c](Tape& t, Id self) {
      Tensor<T> ga = t.grads_[self];
      for (T& x : ga.data()) x *= c;
      t.accumulate(a, ga);
    });
  }

  // ---- linear algebra ----

  Id matmul(Id a, Id b) {
    const Tensor<T>& va = value(a);
    const Tensor<T>& vb = value(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.cols() != vb.rows())
      throw ShapeError("matmul: dimension mismatch lhs " + va.shape_str() + " rhs " +
                       vb.shape_str());
    Tensor<T> out = matmul_value(va, vb);
    return push(std::move(out), [a, b](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& va2 = t.value(a);
      const Tensor<T>& vb2 = t.value(b);
      // dA = g * B^T, dB = A^T * g
      Tensor<T> ga = Tensor<T>::matrix(va2.rows(), va2.cols());
      for (std::size_t i = 0; i < va2.rows(); ++i)
        for (std::size_t j = 0; j < vb2.cols(); ++j) {
          T gij = g.at(i, j);
          for (std::size_t k = 0; k < va2.cols(); ++k) ga.at(i, k) += gij * vb2.at(k, j);
        }
      Tensor<T> gb = Tensor<T>::matrix(vb2.rows(), vb2.cols());
      for (std::size_t i = 0; i < va2.rows(); ++i)
        for (std::size_t k = 0; k < va2.cols(); ++k) {
          T aik = va2.at(i, k);
          for (std::size_t j = 0; j < vb2.cols(); ++j) gb.at(k, j) += aik * g.at(i, j);
        }
      t.accumulate(a, ga);
      t.accumulate(b, gb);
    });
  }

  // y = A x, A rank-2 [m x k], x rank-1 [k] -> rank-1 [m].
  Id matvec(Id a, Id x) {
    const Tensor<T>& va = value(a);
    const Tensor<T>& vx = value(x);
    if (va.rank() != 2 || vx.rank() != 1 || va.cols() != vx.size())
      throw ShapeError("matvec: dimension mismatch lhs " + va.shape_str() + " rhs " +
                       vx.shape_str());
    Tensor<T> out = Tensor<T>::vector(va.rows());
    for (std::size_t i = 0; i < va.rows(); ++i) {
      T acc = T(0);
      for (std::size_t k = 0; k < va.cols(); ++k) acc += va.at(i, k) * vx[k];
      out[i] = acc;
    }
    return push(std::move(out), [a, x](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& va2 = t.value(a);
      const Tensor<T>& vx2 = t.value(x);
      Tensor<T> ga = Tensor<T>::matrix(va2.rows(), va2.cols());
      Tensor<T> gx = Tensor<T>::vector(vx2.size());
      for (std::size_t i = 0; i < va2.rows(); ++i)
        for (std::size_t k = 0; k < va2.cols(); ++k) {
          ga.at(i, k) += g[i] * vx2[k];
          gx[k] += va2.at(i, k) * g[i];
        }
      t.accumulate(a, ga);
      t.accumulate(x, gx);
    });
  }

  Id transpose(Id a) {
    const Tensor<T>& va = value(a);
    if (va.rank() != 2) throw ShapeError("transpose: rank-2 required, got " + va.shape_str());
    Tensor<T> out = Tensor<T>::matrix(va.cols(), va.rows());
    for (std::size_t i = 0; i < va.rows(); ++i)
      for (std::size_t j = 0; j < va.cols(); ++j) out.at(j, i) = va.at(i, j);
    return push(std::move(out), [a](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      Tensor<T> ga = Tensor<T>::matrix(g.cols(), g.rows());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) ga.at(j, i) = g.at(i, j);
      t.accumulate(a, ga);
    });
  }

  // ---- broadcasts ----

  // A (rank-2) + row vector b (rank-1 of size A.cols()), broadcast over rows.
  Id add_rowvec(Id a, Id b) {
    const Tensor<T>& va = value(a);
    const Tensor<T>& vb = value(b);
    if (va.rank() != 2 || vb.rank() != 1 || vb.size() != va.cols())
      throw ShapeError("add_rowvec: dimension mismatch lhs " + va.shape_str() + " rhs " +
                       vb.shape_str());
    Tensor<T> out = va;
    for (std::size_t i = 0; i < va.rows(); ++i)
      for (std::size_t j = 0; j < va.cols(); ++j) out.at(i, j) += vb[j];
    return push(std::move(out), [a, b](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      t.accumulate(a, g);
      Tensor<T> gb = Tensor<T>::vector(g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g.at(i, j);
      t.accumulate(b, gb);
    });
  }

  // A + s, s a scalar tensor broadcast over every entry.
  Id add_scalar(Id a, Id s) {
    const Tensor<T>& va = value(a);
    T sv = value(s).item();
    Tensor<T> out = va;
    for (T& x : out.data()) x += sv;
    return push(std::move(out), [a, s](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      t.accumulate(a, g);
      T total = T(0);
      for (std::size_t i = 0; i < g.size(); ++i) total += g[i];
      t.accumulate(s, Tensor<T>::scalar(total));
    });
  }

  // Row i of A scaled by s[i].
  Id scale_rows(Id a, Id s) {
    const Tensor<T>& va = value(a);
    const Tensor<T>& vs = value(s);
    if (va.rank() != 2 || vs.rank() != 1 || vs.size() != va.rows())
      throw ShapeError("scale_rows: dimension mismatch lhs " + va.shape_str() + " scale " +
                       vs.shape_str());
    Tensor<T> out = va;
    for (std::size_t i = 0; i < va.rows(); ++i)
      for (std::size_t j = 0; j < va.cols(); ++j) out.at(i, j) *= vs[i];
    return push(std::move(out), [a, s](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& va2 = t.value(a);
      const Tensor<T>& vs2 = t.value(s);
      Tensor<T> ga = Tensor<T>::matrix(va2.rows(), va2.cols());
      Tensor<T> gs = Tensor<T>::vector(vs2.size());
      for (std::size_t i = 0; i < va2.rows(); ++i)
        for (std::size_t j = 0; j < va2.cols(); ++j) {
          ga.at(i, j) = g.at(i, j) * vs2[i];
          gs[i] += g.at(i, j) * va2.at(i, j);
        }
      t.accumulate(a, ga);
      t.accumulate(s, gs);
    });
  }

  // ---- reductions / reshapes ----

  // Per-row maximum of a rank-2 tensor -> rank-1. Gradient routes to the
  // first maximal entry of each row.
  Id row_max(Id a) {
    const Tensor<T>& va = value(a);
    if (va.rank() != 2 || va.cols() == 0)
      throw ShapeError("row_max: nonempty rank-2 required, got " + va.shape_str());
    Tensor<T> out = Tensor<T>::vector(va.rows());
    auto argmax = std::make_shared<std::vector<std::size_t>>(va.rows());
    for (std::size_t i = 0; i < va.rows(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < va.cols(); ++j)
        if (va.at(i, j) > va.at(i, best)) best = j;
      (*argmax)[i] = best;
      out[i] = va.at(i, best);
    }
    return push(std::move(out), [a, argmax](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& va2 = t.value(a);
      Tensor<T> ga = Tensor<T>::matrix(va2.rows(), va2.cols());
      for (std::size_t i = 0; i < va2.rows(); ++i) ga.at(i, (*argmax)[i]) = g[i];
      t.accumulate(a, ga);
    });
  }

  // Stabilized softmax along each row (max subtraction). Rank-1 input is
  // treated as a single row.
  Id softmax_rows(Id a) {
    const Tensor<T>& va = value(a);
    if (va.size() == 0 || (va.rank() == 2 && va.cols() == 0))
      throw ShapeError("softmax_rows: empty input " + va.shape_str());
    Tensor<T> out = va;
    std::size_t rows = va.rank() == 2 ? va.rows() : 1;
    std::size_t cols = va.rank() == 2 ? va.cols() : va.size();
    for (std::size_t i = 0; i < rows; ++i) {
      T* row = out.data().data() + i * cols;
      T mx = row[0];
      for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
      T sum = T(0);
      for (std::size_t j = 0; j < cols; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      }
      for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
    }
    return push(std::move(out), [a](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& y = t.value(self);
      Tensor<T> ga = y;
      std::size_t rows = y.rank() == 2 ? y.rows() : 1;
      std::size_t cols = y.rank() == 2 ? y.cols() : y.size();
      for (std::size_t i = 0; i < rows; ++i) {
        const T* yr = y.data().data() + i * cols;
        const T* gr = g.data().data() + i * cols;
        T* or_ = ga.data().data() + i * cols;
        T dot = T(0);
        for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
        for (std::size_t j = 0; j < cols; ++j) or_[j] = yr[j] * (gr[j] - dot);
      }
      t.accumulate(a, ga);
    });
  }

  // Zero-pad a rank-2 tensor on the right to `width` columns.
  Id pad_cols(Id a, std::size_t width) {
    const Tensor<T>& va = value(a);
    if (va.rank() != 2 || width < va.cols())
      throw ShapeError("pad_cols: cannot pad " + va.shape_str() + " to width " +
                       std::to_string(width));
    Tensor<T> out = Tensor<T>::matrix(va.rows(), width);
    for (std::size_t i = 0; i < va.rows(); ++i)
      for (std::size_t j = 0; j < va.cols(); ++j) out.at(i, j) = va.at(i, j);
    return push(std::move(out), [a](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& va2 = t.value(a);
      Tensor<T> ga = Tensor<T>::matrix(va2.rows(), va2.cols());
      for (std::size_t i = 0; i < va2.rows(); ++i)
        for (std::size_t j = 0; j < va2.cols(); ++j) ga.at(i, j) = g.at(i, j);
      t.accumulate(a, ga);
    });
  }

  Id concat_cols(Id a, Id b) {
    const Tensor<T>& va = value(a);
    const Tensor<T>& vb = value(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.rows() != vb.rows())
      throw ShapeError("concat_cols: dimension mismatch lhs " + va.shape_str() + " rhs " +
                       vb.shape_str());
    Tensor<T> out = Tensor<T>::matrix(va.rows(), va.cols() + vb.cols());
    for (std::size_t i = 0; i < va.rows(); ++i) {
      for (std::size_t j = 0; j < va.cols(); ++j) out.at(i, j) = va.at(i, j);
      for (std::size_t j = 0; j < vb.cols(); ++j) out.at(i, va.cols() + j) = vb.at(i, j);
    }
    return push(std::move(out), [a, b](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& va2 = t.value(a);
      const Tensor<T>& vb2 = t.value(b);
      Tensor<T> ga = Tensor<T>::matrix(va2.rows(), va2.cols());
      Tensor<T> gb = Tensor<T>::matrix(vb2.rows(), vb2.cols());
      for (std::size_t i = 0; i < va2.rows(); ++i) {
        for (std::size_t j = 0; j < va2.cols(); ++j) ga.at(i, j) = g.at(i, j);
        for (std::size_t j = 0; j < vb2.cols(); ++j) gb.at(i, j) = g.at(i, va2.cols() + j);
      }
      t.accumulate(a, ga);
      t.accumulate(b, gb);
    });
  }

  Id gather_rows(Id a, std::vector<std::size_t> rows) {
    const Tensor<T>& va = value(a);
    if (va.rank() != 2) throw ShapeError("gather_rows: rank-2 required, got " + va.shape_str());
    for (std::size_t r : rows)
      if (r >= va.rows())
        throw ShapeError("gather_rows: row " + std::to_string(r) + " out of " + va.shape_str());
    Tensor<T> out = Tensor<T>::matrix(rows.size(), va.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < va.cols(); ++j) out.at(i, j) = va.at(rows[i], j);
    auto idx = std::make_shared<std::vector<std::size_t>>(std::move(rows));
    return push(std::move(out), [a, idx](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& va2 = t.value(a);
      Tensor<T> ga = Tensor<T>::matrix(va2.rows(), va2.cols());
      for (std::size_t i = 0; i < idx->size(); ++i)
        for (std::size_t j = 0; j < va2.cols(); ++j) ga.at((*idx)[i], j) += g.at(i, j);
      t.accumulate(a, ga);
    });
  }

  // Stack rank-1 tensors of equal length into a rank-2 tensor, one per row.
  Id stack_rows(std::vector<Id> parts) {
    if (parts.empty()) throw ShapeError("stack_rows: no inputs");
    std::size_t cols = value(parts[0]).size();
    for (Id p : parts)
      if (value(p).rank() != 1 || value(p).size() != cols)
        throw ShapeError("stack_rows: mismatched row " + value(p).shape_str() + " vs [" +
                         std::to_string(cols) + "]");
    Tensor<T> out = Tensor<T>::matrix(parts.size(), cols);
    for (std::size_t i = 0; i < parts.size(); ++i)
      for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = value(parts[i])[j];
    auto ids = std::make_shared<std::vector<Id>>(std::move(parts));
    return push(std::move(out), [ids](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      for (std::size_t i = 0; i < ids->size(); ++i) {
        Tensor<T> gi = Tensor<T>::vector(g.cols());
        for (std::size_t j = 0; j < g.cols(); ++j) gi[j] = g.at(i, j);
        t.accumulate((*ids)[i], gi);
      }
    });
  }

  // out[v] = sum (or mean, if normalize) of rows h[u] for u in nbrs[v].
  Id neighbor_sum(Id h, std::shared_ptr<const std::vector<std::vector<std::uint32_t>>> nbrs,
                  bool normalize = false) {
    const Tensor<T>& vh = value(h);
    if (vh.rank() != 2 || nbrs->size() != vh.rows())
      throw ShapeError("neighbor_sum: " + std::to_string(nbrs->size()) + " lists for " +
                       vh.shape_str());
    Tensor<T> out = Tensor<T>::matrix(vh.rows(), vh.cols());
    for (std::size_t v = 0; v < nbrs->size(); ++v) {
      const auto& list = (*nbrs)[v];
      for (std::uint32_t u : list)
        for (std::size_t j = 0; j < vh.cols(); ++j) out.at(v, j) += vh.at(u, j);
      if (normalize && !list.empty()) {
        T inv = T(1) / static_cast<T>(list.size());
        for (std::size_t j = 0; j < vh.cols(); ++j) out.at(v, j) *= inv;
      }
    }
    return push(std::move(out), [h, nbrs, normalize](Tape& t, Id self) {
      const Tensor<T>& g = t.grads_[self];
      const Tensor<T>& vh2 = t.value(h);
      Tensor<T> gh = Tensor<T>::matrix(vh2.rows(), vh2.cols());
      for (std::size_t v = 0; v < nbrs->size(); ++v) {
        const auto& list = (*nbrs)[v];
        T w = normalize && !list.empty() ? T(1) / static_cast<T>(list.size()) : T(1);
        for (std::uint32_t u : list)
          for (std::size_t j = 0; j < g.cols(); ++j) gh.at(u, j) += w * g.at(v, j);
      }
      t.accumulate(h, gh);
    });
  }

  Id sum(Id a) {
    const Tensor<T>& va = value(a);
    T acc = T(0);
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i];
    return push(Tensor<T>::scalar(acc), [a](Tape& t, Id self) {
      T g = t.grads_[self].item();
      Tensor<T> ga = t.value(a);
      ga.fill(g);
      t.accumulate(a, ga);
    });
  }

  // Weighted binary cross-entropy with logits, averaged over entries:
  //   mean_i [ w_pos * y_i * softplus(-l_i) + (1 - y_i) * softplus(l_i) ]
  // Fused for numerical stability; equals -mean[w_pos*y*log p + (1-y)*log(1-p)]
  // with p = sigmoid(l).
  Id bce_with_logits(Id logits, std::vector<T> labels, T w_pos) {
    const Tensor<T>& vl = value(logits);
    if (vl.rank() != 1 || vl.size() != labels.size() || labels.empty())
      throw ShapeError("bce_with_logits: logits " + vl.shape_str() + " vs " +
                       std::to_string(labels.size()) + " labels");
    T n = static_cast<T>(labels.size());
    T loss = T(0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      T l = vl[i];
      loss += w_pos * labels[i] * softplus(-l) + (T(1) - labels[i]) * softplus(l);
    }
    loss /= n;
    auto y = std::make_shared<std::vector<T>>(std::move(labels));
    return push(Tensor<T>::scalar(loss), [logits, y, w_pos, n](Tape& t, Id self) {
      T g = t.grads_[self].item();
      const Tensor<T>& vl2 = t.value(logits);
      Tensor<T> gl = Tensor<T>::vector(vl2.size());
      for (std::size_t i = 0; i < vl2.size(); ++i) {
        T p = sigmoid_scalar(vl2[i]);
        gl[i] = g * (-w_pos * (*y)[i] * (T(1) - p) + (T(1) - (*y)[i]) * p) / n;
      }
      t.accumulate(logits, gl);
    });
  }

  // ---- backward ----

  // Seed d(loss)/d(loss) = 1 and accumulate gradients in reverse recording
  // order. Parameter leaves add their gradient into the registered sinks.
  void backward(Id loss) {
    const Tensor<T>& vl = value(loss);
    if (vl.size() != 1)
      throw ShapeError("backward: loss must be scalar, got " + vl.shape_str());
    grads_.assign(nodes_.size(), Tensor<T>());
    grads_[loss] = Tensor<T>::scalar(T(1));
    for (std::size_t i = loss + 1; i-- > 0;) {
      if (grads_[i].empty()) continue;
      if (nodes_[i].back) nodes_[i].back(*this, static_cast<Id>(i));
    }
    for (const auto& [id, sink] : param_sinks_) {
      if (grads_[id].empty()) continue;
      for (std::size_t i = 0; i < sink->size(); ++i) (*sink)[i] += grads_[id][i];
    }
  }

  static T sigmoid_scalar(T x) {
    if (x >= T(0)) {
      T e = std::exp(-x);
      return T(1) / (T(1) + e);
    }
    T e = std::exp(x);
    return e / (T(1) + e);
  }

  static T softplus(T x) {
    return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }

  static Tensor<T> matmul_value(const Tensor<T>& a, const Tensor<T>& b) {
    // Per-entry accumulation runs over k in ascending order, the same order a
    // naive i,j,k triple loop uses, so results agree with it bit for bit.
    Tensor<T> out = Tensor<T>::matrix(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t k = 0; k < a.cols(); ++k) {
        T aik = a.at(i, k);
        for (std::size_t j = 0; j < b.cols(); ++j) out.at(i, j) += aik * b.at(k, j);
      }
    return out;
  }

 private:
  struct Node {
    Tensor<T> value;
    std::function<void(Tape&, Id)> back;
  };

  Id push(Tensor<T> value, std::function<void(Tape&, Id)> back) {
    nodes_.push_back(Node{std::move(value), std::move(back)});
    return static_cast<Id>(nodes_.size() - 1);
  }

  void require_same(Id a, Id b, const char* op) {
    if (!value(a).same_shape(value(b)))
      throw ShapeError(std::string(op) + ": dimension mismatch lhs " + value(a).shape_str() +
                       " rhs " + value(b).shape_str());
  }

  void accumulate(Id id, const Tensor<T>& g) {
    if (grads_[id].empty()) {
      grads_[id] = g;
      return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) grads_[id][i] += g[i];
  }

  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
  std::vector<std::pair<Id, Tensor<T>*>> param_sinks_;
};

}  // namespace dgn
