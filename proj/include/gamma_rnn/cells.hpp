// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "gamma_rnn/autodiff.hpp"
#include "gamma_rnn/errors.hpp"
#include "gamma_rnn/rng.hpp"
#include "gamma_rnn/tensor.hpp"

namespace gamma_rnn {

// Parameter and state structs are templated on storage: Tensor holds the
// weights themselves, Var holds handles to the same weights bound on a tape.
// Inputs, hidden states and memory levels are [batch x width] matrices.

/// One gate's affine maps, double-bias convention:
/// pre = W_x x + b_x + W_h h + b_h. W_x is [hidden x input], W_h is [hidden x hidden].
template <typename T>
struct GateParams {
  T w_x, w_h, b_x, b_h;
};

/// Standard LSTM cell (gates i, f, g, o).
template <typename T>
struct LstmParams {
  GateParams<T> input, forget, cell, output;
};

template <typename T>
struct LstmState {
  T h, c;
};

/// LSTM whose memory is a gated gamma cascade c_0..c_K read out through
/// softmax attention over levels.
template <typename T>
struct GammaLstmParams {
  std::size_t order = 1;       // K
  bool readout_lag = false;    // read levels from t-1 instead of t
  bool shared_forget = false;  // one forget gate drives every level
  GateParams<T> input, cell, output;
  std::vector<GateParams<T>> forget;  // K sets, or 1 when shared_forget
  T w_a, b_a;                         // attention query map, [hidden x hidden] and [hidden]

  const GateParams<T>& forget_gate(std::size_t k) const { return shared_forget ? forget.at(0) : forget.at(k - 1); }
};

template <typename T>
struct GammaLstmState {
  T h;
  std::vector<T> levels;  // c_0..c_K
};

// ---------------------------------------------------------------------------
// Visiting and mapping. Names are stable and define checkpoint/optimizer order.

template <typename G, typename F>
  requires std::is_same_v<std::remove_const_t<G>, GateParams<Tensor>> ||
           std::is_same_v<std::remove_const_t<G>, GateParams<Var>>
void for_each_param(G& g, const std::string& prefix, F&& f) {
  f(prefix + ".w_x", g.w_x);
  f(prefix + ".w_h", g.w_h);
  f(prefix + ".b_x", g.b_x);
  f(prefix + ".b_h", g.b_h);
}

template <typename P, typename F>
  requires std::is_same_v<std::remove_const_t<P>, LstmParams<Tensor>> ||
           std::is_same_v<std::remove_const_t<P>, LstmParams<Var>>
void for_each_param(P& p, const std::string& prefix, F&& f) {
  for_each_param(p.input, prefix + ".input", f);
  for_each_param(p.forget, prefix + ".forget", f);
  for_each_param(p.cell, prefix + ".cell", f);
  for_each_param(p.output, prefix + ".output", f);
}

template <typename P, typename F>
  requires std::is_same_v<std::remove_const_t<P>, GammaLstmParams<Tensor>> ||
           std::is_same_v<std::remove_const_t<P>, GammaLstmParams<Var>>
void for_each_param(P& p, const std::string& prefix, F&& f) {
  for_each_param(p.input, prefix + ".input", f);
  for_each_param(p.cell, prefix + ".cell", f);
  for_each_param(p.output, prefix + ".output", f);
  for (std::size_t k = 0; k < p.forget.size(); ++k) {
    for_each_param(p.forget[k], prefix + ".forget" + std::to_string(k + 1), f);
  }
  f(prefix + ".attention.w_a", p.w_a);
  f(prefix + ".attention.b_a", p.b_a);
}

template <typename U, typename T, typename F>
GateParams<U> map_params(const GateParams<T>& g, F&& f) {
  return GateParams<U>{f(g.w_x), f(g.w_h), f(g.b_x), f(g.b_h)};
}

template <typename U, typename T, typename F>
LstmParams<U> map_params(const LstmParams<T>& p, F&& f) {
  return LstmParams<U>{map_params<U>(p.input, f), map_params<U>(p.forget, f), map_params<U>(p.cell, f),
                       map_params<U>(p.output, f)};
}

template <typename U, typename T, typename F>
GammaLstmParams<U> map_params(const GammaLstmParams<T>& p, F&& f) {
  GammaLstmParams<U> out;
  out.order = p.order;
  out.readout_lag = p.readout_lag;
  out.shared_forget = p.shared_forget;
  out.input = map_params<U>(p.input, f);
  out.cell = map_params<U>(p.cell, f);
  out.output = map_params<U>(p.output, f);
  for (const auto& g : p.forget) out.forget.push_back(map_params<U>(g, f));
  out.w_a = f(p.w_a);
  out.b_a = f(p.b_a);
  return out;
}

/// Records every weight of a Tensor-backed param struct as a tape leaf.
template <typename P>
auto bind(Tape& tape, const P& params) {
  return map_params<Var>(params, [&tape](const Tensor& t) { return tape.leaf(t); });
}

// ---------------------------------------------------------------------------
// Construction.

inline GateParams<Tensor> make_gate(std::size_t input, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  GateParams<Tensor> g;
  g.w_x = Tensor::uniform({hidden, input}, -bound, bound, rng);
  g.w_h = Tensor::uniform({hidden, hidden}, -bound, bound, rng);
  g.b_x = Tensor::uniform({hidden}, -bound, bound, rng);
  g.b_h = Tensor::uniform({hidden}, -bound, bound, rng);
  return g;
}

inline GateParams<Tensor> zero_gate(std::size_t input, std::size_t hidden) {
  return GateParams<Tensor>{Tensor({hidden, input}), Tensor({hidden, hidden}), Tensor({hidden}), Tensor({hidden})};
}

/// Weights drawn from uniform(-1/sqrt(hidden), 1/sqrt(hidden)).
inline LstmParams<Tensor> init_lstm(std::size_t input, std::size_t hidden, Rng& rng) {
  if (input == 0 || hidden == 0) throw ConfigError("LSTM widths must be positive");
  LstmParams<Tensor> p;
  p.input = make_gate(input, hidden, rng);
  p.forget = make_gate(input, hidden, rng);
  p.cell = make_gate(input, hidden, rng);
  p.output = make_gate(input, hidden, rng);
  return p;
}

struct GammaLstmOptions {
  std::size_t order = 3;
  bool readout_lag = false;
  bool shared_forget = false;
};

inline GammaLstmParams<Tensor> init_gamma_lstm(std::size_t input, std::size_t hidden, GammaLstmOptions opts,
                                               Rng& rng) {
  if (input == 0 || hidden == 0) throw ConfigError("Gamma-LSTM widths must be positive");
  if (opts.order < 1) throw ConfigError("Gamma-LSTM memory order must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  GammaLstmParams<Tensor> p;
  p.order = opts.order;
  p.readout_lag = opts.readout_lag;
  p.shared_forget = opts.shared_forget;
  p.input = make_gate(input, hidden, rng);
  p.cell = make_gate(input, hidden, rng);
  p.output = make_gate(input, hidden, rng);
  const std::size_t forget_sets = opts.shared_forget ? 1 : opts.order;
  for (std::size_t k = 0; k < forget_sets; ++k) p.forget.push_back(make_gate(input, hidden, rng));
  p.w_a = Tensor::uniform({hidden, hidden}, -bound, bound, rng);
  p.b_a = Tensor::uniform({hidden}, -bound, bound, rng);
  return p;
}

template <typename P>
std::size_t param_count(const P& params) {
  std::size_t n = 0;
  for_each_param(params, "", [&n](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

inline std::size_t input_width(const LstmParams<Tensor>& p) { return p.input.w_x.shape()[1]; }
inline std::size_t hidden_width(const LstmParams<Tensor>& p) { return p.input.w_x.shape()[0]; }
inline std::size_t input_width(const GammaLstmParams<Tensor>& p) { return p.input.w_x.shape()[1]; }
inline std::size_t hidden_width(const GammaLstmParams<Tensor>& p) { return p.input.w_x.shape()[0]; }

// ---------------------------------------------------------------------------
// Steps.

namespace detail {

inline void require_width(const Var& v, std::size_t width, const char* what) {
  const Tensor& t = v.value();
  if (t.rank() > 2 || t.cols() != width) {
    throw DimensionError(std::string(what) + " has shape " + shape_string(t.shape()) + ", expected width " +
                         std::to_string(width));
  }
}

inline Var gate_preactivation(const GateParams<Var>& g, const Var& x, const Var& h) {
  const std::size_t hidden = g.w_x.shape()[0];
  require_width(x, g.w_x.shape()[1], "cell input");
  require_width(h, hidden, "hidden state");
  return add(linear(x, g.w_x, g.b_x), linear(h, g.w_h, g.b_h));
}

}  // namespace detail

/// i, f, o = sigmoid(.), g = tanh(.), c_t = f*c + i*g, h_t = o*tanh(c_t).
inline LstmState<Var> lstm_step(const LstmParams<Var>& p, const LstmState<Var>& s, const Var& x) {
  require_same_shape(s.h.value(), s.c.value(), "lstm_step state");
  const Var i = sigmoid(detail::gate_preactivation(p.input, x, s.h));
  const Var f = sigmoid(detail::gate_preactivation(p.forget, x, s.h));
  const Var g = tanh(detail::gate_preactivation(p.cell, x, s.h));
  const Var o = sigmoid(detail::gate_preactivation(p.output, x, s.h));
  const Var c = add(mul(f, s.c), mul(i, g));
  return LstmState<Var>{mul(o, tanh(c)), c};
}

struct GammaStepResult {
  GammaLstmState<Var> state;
  Var attention;  // [batch x (K+1)]
};

/// One Gamma-LSTM step:
///   c_0(t) = i * g
///   c_k(t) = (1 - f_k) c_k(t-1) + f_k c_{k-1}(t-1)
///   q = W_a h_{t-1} + b_a,  a = softmax_i(q . c_i),  c_t = sum_i a_i c_i
///   h_t = o * tanh(c_t)
/// The readout uses levels at t, or at t-1 when readout_lag is set.
inline GammaStepResult gamma_lstm_step(const GammaLstmParams<Var>& p, const GammaLstmState<Var>& s,
                                       const Var& x) {
  if (p.order < 1) throw ConfigError("Gamma-LSTM memory order must be >= 1");
  if (p.forget.size() != (p.shared_forget ? 1 : p.order)) {
    throw ConfigError("Gamma-LSTM has " + std::to_string(p.forget.size()) + " forget gates for order " +
                      std::to_string(p.order));
  }
  if (s.levels.size() != p.order + 1) {
    throw DimensionError("Gamma-LSTM state has " + std::to_string(s.levels.size()) + " levels, expected " +
                         std::to_string(p.order + 1));
  }
  for (const Var& level : s.levels) require_same_shape(level.value(), s.h.value(), "gamma_lstm_step state");

  const Var i = sigmoid(detail::gate_preactivation(p.input, x, s.h));
  const Var g = tanh(detail::gate_preactivation(p.cell, x, s.h));
  const Var o = sigmoid(detail::gate_preactivation(p.output, x, s.h));

  std::vector<Var> levels;
  levels.reserve(p.order + 1);
  levels.push_back(mul(i, g));
  Var shared_f;
  if (p.shared_forget) shared_f = sigmoid(detail::gate_preactivation(p.forget.front(), x, s.h));
  for (std::size_t k = 1; k <= p.order; ++k) {
    const Var f = p.shared_forget ? shared_f : sigmoid(detail::gate_preactivation(p.forget[k - 1], x, s.h));
    // (1 - f) c_k + f c_{k-1} == c_k + f (c_{k-1} - c_k)
    levels.push_back(add(s.levels[k], mul(f, sub(s.levels[k - 1], s.levels[k]))));
  }

  const std::vector<Var>& read = p.readout_lag ? s.levels : levels;
  const Var query = linear(s.h, p.w_a, p.b_a);
  std::vector<Var> scores;
  scores.reserve(read.size());
  for (const Var& level : read) scores.push_back(row_sum(mul(query, level)));
  const Var attention = softmax(concat_cols(scores));
  Var memory = mul_col(read[0], column(attention, 0));
  for (std::size_t k = 1; k < read.size(); ++k) memory = add(memory, mul_col(read[k], column(attention, k)));

  return GammaStepResult{GammaLstmState<Var>{mul(o, tanh(memory)), std::move(levels)}, attention};
}

// Tensor conveniences: evaluate one step on a scratch tape.

inline LstmState<Tensor> lstm_step(const LstmParams<Tensor>& p, const LstmState<Tensor>& s, const Tensor& x) {
  Tape tape;
  const LstmState<Var> next = lstm_step(bind(tape, p), LstmState<Var>{tape.leaf(s.h), tape.leaf(s.c)}, tape.leaf(x));
  return LstmState<Tensor>{next.h.value(), next.c.value()};
}

struct GammaStepValues {
  GammaLstmState<Tensor> state;
  Tensor attention;
};

inline GammaStepValues gamma_lstm_step(const GammaLstmParams<Tensor>& p, const GammaLstmState<Tensor>& s,
                                       const Tensor& x) {
  Tape tape;
  GammaLstmState<Var> bound{tape.leaf(s.h), {}};
  for (const Tensor& level : s.levels) bound.levels.push_back(tape.leaf(level));
  const GammaStepResult r = gamma_lstm_step(bind(tape, p), bound, tape.leaf(x));
  GammaStepValues out{GammaLstmState<Tensor>{r.state.h.value(), {}}, r.attention.value()};
  for (const Var& level : r.state.levels) out.state.levels.push_back(level.value());
  return out;
}

// ---------------------------------------------------------------------------
// Unrolling.

inline LstmState<Var> zero_state(Tape& tape, const LstmParams<Var>& p, std::size_t batch) {
  const std::size_t hidden = p.input.w_x.shape()[0];
  return LstmState<Var>{tape.leaf(Tensor({batch, hidden})), tape.leaf(Tensor({batch, hidden}))};
}

inline GammaLstmState<Var> zero_state(Tape& tape, const GammaLstmParams<Var>& p, std::size_t batch) {
  const std::size_t hidden = p.input.w_x.shape()[0];
  GammaLstmState<Var> s{tape.leaf(Tensor({batch, hidden})), {}};
  for (std::size_t k = 0; k <= p.order; ++k) s.levels.push_back(tape.leaf(Tensor({batch, hidden})));
  return s;
}

template <typename State>
struct SequenceResult {
  State final_state;
  std::vector<Var> hidden;
  std::vector<Var> attention;  // Gamma-LSTM only
};

/// Folds the step over xs on the tape the inputs live on, so a backward pass
/// from any downstream loss is full backpropagation through time.
inline SequenceResult<LstmState<Var>> run_sequence(const LstmParams<Var>& p, LstmState<Var> init,
                                                   std::span<const Var> xs) {
  SequenceResult<LstmState<Var>> out{std::move(init), {}, {}};
  out.hidden.reserve(xs.size());
  for (const Var& x : xs) {
    out.final_state = lstm_step(p, out.final_state, x);
    out.hidden.push_back(out.final_state.h);
  }
  return out;
}

inline SequenceResult<GammaLstmState<Var>> run_sequence(const GammaLstmParams<Var>& p, GammaLstmState<Var> init,
                                                        std::span<const Var> xs) {
  SequenceResult<GammaLstmState<Var>> out{std::move(init), {}, {}};
  out.hidden.reserve(xs.size());
  out.attention.reserve(xs.size());
  for (const Var& x : xs) {
    GammaStepResult r = gamma_lstm_step(p, out.final_state, x);
    out.final_state = std::move(r.state);
    out.hidden.push_back(out.final_state.h);
    out.attention.push_back(r.attention);
  }
  return out;
}

}  // namespace gamma_rnn
