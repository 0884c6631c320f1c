// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gamma_rnn/errors.hpp"
#include "gamma_rnn/tensor.hpp"

namespace gamma_rnn {

class Tape;

/// Handle to a tensor recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  inline const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradient buffers handed to backward rules during a reverse sweep.
class GradSink {
 public:
  GradSink(const Tape& tape, std::vector<Tensor>& grads) : tape_(tape), grads_(grads) {}

  /// Zero-initialized on first touch; rules accumulate into it.
  inline Tensor& slot(std::size_t id);
  inline const Tensor& value(std::size_t id) const;

 private:
  const Tape& tape_;
  std::vector<Tensor>& grads_;
};

/// Result of a reverse sweep: one gradient per tape node, zero where the loss
/// does not depend on the node.
class Gradients {
 public:
  explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

  const Tensor& at(std::size_t id) const { return grads_.at(id); }
  const Tensor& operator[](const Var& v) const { return at(v.id()); }
  std::size_t size() const { return grads_.size(); }

 private:
  std::vector<Tensor> grads_;
};

/// Append-only record of operations. Parents always precede children, so a
/// reverse sweep over insertion order is a valid topological order.
class Tape {
 public:
  /// Called with the node's own id, its output gradient and the sink.
  using BackwardFn = std::function<void(std::size_t self, const Tensor& grad_out, GradSink& sink)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value) { return record(std::move(value), {}, nullptr); }

  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
    for (std::size_t p : parents) {
      if (p >= nodes_.size()) throw ContractError("tape parent id out of range");
    }
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_.at(id).parents; }

  Gradients backward(const Var& loss) const {
    if (loss.tape() != this) throw ContractError("backward: loss recorded on a different tape");
    const Tensor& out = value(loss.id());
    if (out.size() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + shape_string(out.shape()));
    }
    std::vector<Tensor> grads(nodes_.size());
    GradSink sink(*this, grads);
    sink.slot(loss.id())[0] = 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      const Node& node = nodes_[id];
      if (grads[id].empty() || !node.backward) continue;
      node.backward(id, grads[id], sink);
    }
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
      if (grads[id].empty()) grads[id] = Tensor(nodes_[id].value.shape());
    }
    return Gradients(std::move(grads));
  }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return tape_->value(id_);
}

inline Tensor& GradSink::slot(std::size_t id) {
  Tensor& g = grads_[id];
  if (g.empty()) g = Tensor(tape_.value(id).shape());
  return g;
}

inline const Tensor& GradSink::value(std::size_t id) const { return tape_.value(id); }

// ---------------------------------------------------------------------------
// Operations. Rank-1 operands are read as 1xn rows.

namespace detail {

inline Tape& tape_of(const Var& a) {
  if (!a.valid()) throw ContractError("use of an unbound Var");
  return *a.tape();
}

inline Tape& tape_of(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw ContractError("operands recorded on different tapes");
  return tape_of(a);
}

inline void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() == 0 || t.rank() > 2) {
    throw DimensionError(std::string(op) + ": expected vector or matrix, got " +
                         shape_string(t.shape()));
  }
}

/// Elementwise map whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var map(const Var& x, Fwd fwd, Deriv deriv) {
  Tape& tape = tape_of(x);
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  const std::size_t xid = x.id();
  return tape.record(std::move(out), {xid},
                     [xid, deriv](std::size_t self, const Tensor& g, GradSink& sink) {
                       const Tensor& xv = sink.value(xid);
                       const Tensor& yv = sink.value(self);
                       Tensor& gx = sink.slot(xid);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
                     });
}

inline double logistic(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace detail

/// a [m x k] times b [k x n].
inline Var matmul(const Var& a, const Var& b) {
  Tape& tape = detail::tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_matrix(av, "matmul");
  detail::require_matrix(bv, "matmul");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record(std::move(out), {aid, bid},
                     [aid, bid, m, k, n](std::size_t, const Tensor& g, GradSink& sink) {
                       const Tensor& av = sink.value(aid);
                       const Tensor& bv = sink.value(bid);
                       // dA = G B^T
                       Tensor& ga = sink.slot(aid);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t p = 0; p < k; ++p) {
                           double acc = 0.0;
                           for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
                           ga[i * k + p] += acc;
                         }
                       }
                       // dB = A^T G
                       Tensor& gb = sink.slot(bid);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t p = 0; p < k; ++p) {
                           const double aip = av[i * k + p];
                           for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                         }
                       }
                     });
}

/// a [m x k] times the transpose of b [n x k]; the layout of weight matrices
/// stored as [out x in].
inline Var matmul_bt(const Var& a, const Var& b) {
  Tape& tape = detail::tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_matrix(av, "matmul_bt");
  detail::require_matrix(bv, "matmul_bt");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  if (bv.cols() != k) {
    throw DimensionError("matmul_bt: inner extents differ, " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()) + "^T");
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = &av[i * k];
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = &bv[j * k];
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      out[i * n + j] = acc;
    }
  }
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record(std::move(out), {aid, bid},
                     [aid, bid, m, k, n](std::size_t, const Tensor& g, GradSink& sink) {
                       const Tensor& av = sink.value(aid);
                       const Tensor& bv = sink.value(bid);
                       // dA = G B, dB = G^T A
                       Tensor& ga = sink.slot(aid);
                       Tensor& gb = sink.slot(bid);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < n; ++j) {
                           const double gij = g[i * n + j];
                           if (gij == 0.0) continue;
                           for (std::size_t p = 0; p < k; ++p) {
                             ga[i * k + p] += gij * bv[j * k + p];
                             gb[j * k + p] += gij * av[i * k + p];
                           }
                         }
                       }
                     });
}

/// x [m x k] times w^T plus b, with w stored as [n x k] and b of extent n.
inline Var linear(const Var& x, const Var& w, const Var& b) {
  Tape& tape = detail::tape_of(x, w);
  detail::tape_of(x, b);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  detail::require_matrix(xv, "linear");
  detail::require_matrix(wv, "linear");
  const std::size_t m = xv.rows(), k = xv.cols(), n = wv.rows();
  if (wv.cols() != k || bv.size() != n) {
    throw DimensionError("linear: input " + shape_string(xv.shape()) + " does not fit weight " +
                         shape_string(wv.shape()) + " and bias " + shape_string(bv.shape()));
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* xrow = &xv[i * k];
    for (std::size_t j = 0; j < n; ++j) {
      const double* wrow = &wv[j * k];
      double acc = bv[j];
      for (std::size_t p = 0; p < k; ++p) acc += xrow[p] * wrow[p];
      out[i * n + j] = acc;
    }
  }
  const std::size_t xid = x.id(), wid = w.id(), bid = b.id();
  return tape.record(std::move(out), {xid, wid, bid},
                     [xid, wid, bid, m, k, n](std::size_t, const Tensor& g, GradSink& sink) {
                       const Tensor& xv = sink.value(xid);
                       const Tensor& wv = sink.value(wid);
                       Tensor& gx = sink.slot(xid);
                       Tensor& gw = sink.slot(wid);
                       Tensor& gb = sink.slot(bid);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < n; ++j) {
                           const double gij = g[i * n + j];
                           gb[j] += gij;
                           if (gij == 0.0) continue;
                           for (std::size_t p = 0; p < k; ++p) {
                             gx[i * k + p] += gij * wv[j * k + p];
                             gw[j * k + p] += gij * xv[i * k + p];
                           }
                         }
                       }
                     });
}

inline Var add(const Var& a, const Var& b) {
  Tape& tape = detail::tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out(a.value());
  out += b.value();
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record(std::move(out), {aid, bid}, [aid, bid](std::size_t, const Tensor& g, GradSink& sink) {
    sink.slot(aid) += g;
    sink.slot(bid) += g;
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& tape = detail::tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "sub");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record(std::move(out), {aid, bid}, [aid, bid](std::size_t, const Tensor& g, GradSink& sink) {
    sink.slot(aid) += g;
    Tensor& gb = sink.slot(bid);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

inline Var mul(const Var& a, const Var& b) {
  Tape& tape = detail::tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record(std::move(out), {aid, bid}, [aid, bid](std::size_t, const Tensor& g, GradSink& sink) {
    const Tensor& av = sink.value(aid);
    const Tensor& bv = sink.value(bid);
    {
      Tensor& ga = sink.slot(aid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    Tensor& gb = sink.slot(bid);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

inline Var scale(const Var& x, double factor) {
  return detail::map(
      x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

inline Var neg(const Var& x) { return scale(x, -1.0); }

inline Var sigmoid(const Var& x) {
  return detail::map(x, detail::logistic, [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(const Var& x) {
  return detail::map(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

/// x [m x n] plus bias [n] broadcast over rows.
inline Var add_row(const Var& x, const Var& bias) {
  Tape& tape = detail::tape_of(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  detail::require_matrix(xv, "add_row");
  const std::size_t m = xv.rows(), n = xv.cols();
  if (bv.size() != n) {
    throw DimensionError("add_row: bias " + shape_string(bv.shape()) + " does not fit rows of " +
                         shape_string(xv.shape()));
  }
  Tensor out(xv);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  }
  const std::size_t xid = x.id(), bid = bias.id();
  return tape.record(std::move(out), {xid, bid}, [xid, bid, m, n](std::size_t, const Tensor& g, GradSink& sink) {
    sink.slot(xid) += g;
    Tensor& gb = sink.slot(bid);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}

/// Row sums: [m x n] -> [m x 1].
inline Var row_sum(const Var& x) {
  Tape& tape = detail::tape_of(x);
  const Tensor& xv = x.value();
  detail::require_matrix(xv, "row_sum");
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out({m, 1});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += xv[i * n + j];
    out[i] = acc;
  }
  const std::size_t xid = x.id();
  return tape.record(std::move(out), {xid}, [xid, m, n](std::size_t, const Tensor& g, GradSink& sink) {
    Tensor& gx = sink.slot(xid);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[i];
    }
  });
}

/// Sum of all elements, as a one-element tensor.
inline Var sum(const Var& x) {
  Tape& tape = detail::tape_of(x);
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (double v : xv.data()) acc += v;
  const std::size_t xid = x.id();
  return tape.record(Tensor::scalar(acc), {xid}, [xid](std::size_t, const Tensor& g, GradSink& sink) {
    Tensor& gx = sink.slot(xid);
    for (double& v : gx.data()) v += g[0];
  });
}

/// Horizontal concatenation of matrices with equal row counts.
inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  Tape& tape = detail::tape_of(parts.front());
  const std::size_t m = parts.front().value().rows();
  std::vector<std::size_t> ids;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    detail::tape_of(parts.front(), p);
    const Tensor& pv = p.value();
    detail::require_matrix(pv, "concat_cols");
    if (pv.rows() != m) {
      throw DimensionError("concat_cols: row counts differ, " + shape_string(parts.front().shape()) +
                           " vs " + shape_string(pv.shape()));
    }
    ids.push_back(p.id());
    widths.push_back(pv.cols());
    total += pv.cols();
  }
  Tensor out({m, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + offset + j] = pv[i * widths[k] + j];
    }
    offset += widths[k];
  }
  std::vector<std::size_t> parents = ids;
  return tape.record(std::move(out), std::move(parents),
                     [ids, widths, m, total](std::size_t, const Tensor& g, GradSink& sink) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         Tensor& gp = sink.slot(ids[k]);
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < widths[k]; ++j) {
                             gp[i * widths[k] + j] += g[i * total + offset + j];
                           }
                         }
                         offset += widths[k];
                       }
                     });
}

/// Column j of x [m x n] as an [m x 1] matrix.
inline Var column(const Var& x, std::size_t j) {
  Tape& tape = detail::tape_of(x);
  const Tensor& xv = x.value();
  detail::require_matrix(xv, "column");
  const std::size_t m = xv.rows(), n = xv.cols();
  if (j >= n) throw DimensionError("column: index " + std::to_string(j) + " out of " + shape_string(xv.shape()));
  Tensor out({m, 1});
  for (std::size_t i = 0; i < m; ++i) out[i] = xv[i * n + j];
  const std::size_t xid = x.id();
  return tape.record(std::move(out), {xid}, [xid, m, n, j](std::size_t, const Tensor& g, GradSink& sink) {
    Tensor& gx = sink.slot(xid);
    for (std::size_t i = 0; i < m; ++i) gx[i * n + j] += g[i];
  });
}

/// x [m x n] with row i scaled by s[i]; s is [m x 1].
inline Var mul_col(const Var& x, const Var& s) {
  Tape& tape = detail::tape_of(x, s);
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  detail::require_matrix(xv, "mul_col");
  const std::size_t m = xv.rows(), n = xv.cols();
  if (sv.size() != m) {
    throw DimensionError("mul_col: scale " + shape_string(sv.shape()) + " does not match rows of " +
                         shape_string(xv.shape()));
  }
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * sv[i];
  }
  const std::size_t xid = x.id(), sid = s.id();
  return tape.record(std::move(out), {xid, sid}, [xid, sid, m, n](std::size_t, const Tensor& g, GradSink& sink) {
    const Tensor& xv = sink.value(xid);
    const Tensor& sv = sink.value(sid);
    {
      Tensor& gx = sink.slot(xid);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[i * n + j] * sv[i];
      }
    }
    Tensor& gs = sink.slot(sid);
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * xv[i * n + j];
      gs[i] += acc;
    }
  });
}

/// Row-wise softmax, stabilized by subtracting each row's maximum.
inline Var softmax(const Var& x) {
  if (!x.valid() || x.value().empty()) throw DimensionError("softmax: empty input");
  Tape& tape = detail::tape_of(x);
  const Tensor& xv = x.value();
  detail::require_matrix(xv, "softmax");
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = &xv[i * n];
    const double peak = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - peak);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  const std::size_t xid = x.id();
  return tape.record(std::move(out), {xid}, [xid, m, n](std::size_t self, const Tensor& g, GradSink& sink) {
    const Tensor& y = sink.value(self);
    Tensor& gx = sink.slot(xid);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

// ---------------------------------------------------------------------------
// Finite-difference verification.

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t input = 0;  // which input tensor holds the worst coordinate
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

inline double relative_error(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  if (diff == 0.0) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Compares reverse-mode gradients of f against central differences
/// (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for every coordinate of every input.
/// f is called as f(Tape&, std::span<const Var>) and must return a scalar Var.
template <typename F>
GradCheckResult grad_check_all(F&& f, std::vector<Tensor> inputs, double eps) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive");
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(xs.size());
    for (const Tensor& x : xs) vars.push_back(tape.leaf(x));
    return f(tape, std::span<const Var>(vars)).value().item();
  };

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& x : inputs) vars.push_back(tape.leaf(x));
  const Var loss = f(tape, std::span<const Var>(vars));
  const Gradients grads = tape.backward(loss);

  GradCheckResult worst;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor& analytic = grads[vars[k]];
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + eps;
      const double up = evaluate(inputs);
      inputs[k][i] = saved - eps;
      const double down = evaluate(inputs);
      inputs[k][i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[i], numeric);
      if (err > worst.max_rel_error || (k == 0 && i == 0)) {
        worst = GradCheckResult{err, k, i, analytic[i], numeric};
      }
    }
  }
  return worst;
}

/// Single-input form: f(Tape&, Var) -> scalar Var. Returns the max relative error.
template <typename F>
double grad_check(F&& f, const Tensor& x, double eps) {
  auto wrapped = [&f](Tape& tape, std::span<const Var> vars) { return f(tape, vars[0]); };
  return grad_check_all(wrapped, std::vector<Tensor>{x}, eps).max_rel_error;
}

}  // namespace gamma_rnn
