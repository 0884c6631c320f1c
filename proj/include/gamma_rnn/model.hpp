// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gamma_rnn/autodiff.hpp"
#include "gamma_rnn/cells.hpp"
#include "gamma_rnn/errors.hpp"
#include "gamma_rnn/rng.hpp"
#include "gamma_rnn/tensor.hpp"

namespace gamma_rnn {

enum class CellKind { lstm, stacked_lstm, gamma_lstm };

inline std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::lstm: return "lstm";
    case CellKind::stacked_lstm: return "stacked_lstm";
    case CellKind::gamma_lstm: return "gamma_lstm";
  }
  return "?";
}

inline CellKind parse_cell_kind(std::string_view name) {
  if (name == "lstm") return CellKind::lstm;
  if (name == "stacked_lstm") return CellKind::stacked_lstm;
  if (name == "gamma_lstm") return CellKind::gamma_lstm;
  throw ConfigError("unknown model kind '" + std::string(name) + "' (expected lstm, stacked_lstm or gamma_lstm)");
}

/// Architecture of a sequence classifier: a recurrent stack read out by a
/// linear head on the final hidden state.
struct ModelSpec {
  CellKind kind = CellKind::gamma_lstm;
  std::size_t input = 7;
  std::size_t hidden = 128;
  std::size_t layers = 1;
  std::size_t order = 3;  // memory order K, gamma_lstm only
  std::size_t classes = 10;
  bool readout_lag = false;
  bool shared_forget = false;

  void validate() const {
    if (input == 0 || hidden == 0 || classes == 0) throw ConfigError("model widths and class count must be positive");
    switch (kind) {
      case CellKind::lstm:
        if (layers != 1) throw ConfigError("lstm has exactly 1 layer; use stacked_lstm for more");
        break;
      case CellKind::stacked_lstm:
        if (layers < 2) throw ConfigError("stacked_lstm needs layers >= 2");
        break;
      case CellKind::gamma_lstm:
        if (layers != 1) throw ConfigError("gamma_lstm is a single-layer model");
        if (order < 1) throw ConfigError("gamma_lstm needs memory order >= 1");
        break;
    }
    if (kind != CellKind::gamma_lstm && (readout_lag || shared_forget)) {
      throw ConfigError("readout_lag and shared_forget apply only to gamma_lstm");
    }
  }
};

template <typename T>
using Layer = std::variant<LstmParams<T>, GammaLstmParams<T>>;

template <typename T>
struct Classifier {
  std::vector<Layer<T>> layers;
  T w_out, b_out;  // [classes x hidden], [classes]
};

template <typename C, typename F>
  requires std::is_same_v<std::remove_const_t<C>, Classifier<Tensor>> ||
           std::is_same_v<std::remove_const_t<C>, Classifier<Var>>
void for_each_param(C& model, F&& f) {
  for (std::size_t n = 0; n < model.layers.size(); ++n) {
    std::visit([&](auto& layer) { for_each_param(layer, "layer" + std::to_string(n), f); }, model.layers[n]);
  }
  f(std::string("head.w"), model.w_out);
  f(std::string("head.b"), model.b_out);
}

inline Classifier<Var> bind(Tape& tape, const Classifier<Tensor>& model) {
  Classifier<Var> out;
  for (const auto& layer : model.layers) {
    std::visit([&](const auto& p) { out.layers.emplace_back(bind(tape, p)); }, layer);
  }
  out.w_out = tape.leaf(model.w_out);
  out.b_out = tape.leaf(model.b_out);
  return out;
}

inline std::size_t gate_param_count(std::size_t input, std::size_t hidden) {
  return hidden * input + hidden * hidden + 2 * hidden;
}

/// Learnable scalars implied by a spec, head included. Pure arithmetic; the
/// tests cross-check it against the tensors init_classifier allocates.
inline std::size_t count_params(const ModelSpec& spec) {
  spec.validate();
  const std::size_t h = spec.hidden;
  std::size_t total = spec.classes * h + spec.classes;
  if (spec.kind == CellKind::gamma_lstm) {
    const std::size_t forget_sets = spec.shared_forget ? 1 : spec.order;
    total += (3 + forget_sets) * gate_param_count(spec.input, h) + h * h + h;
  } else {
    for (std::size_t n = 0; n < spec.layers; ++n) total += 4 * gate_param_count(n == 0 ? spec.input : h, h);
  }
  return total;
}

inline std::size_t count_params(const Classifier<Tensor>& model) {
  std::size_t n = 0;
  for_each_param(model, [&n](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

inline Classifier<Tensor> init_classifier(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Classifier<Tensor> model;
  if (spec.kind == CellKind::gamma_lstm) {
    model.layers.emplace_back(
        init_gamma_lstm(spec.input, spec.hidden, GammaLstmOptions{spec.order, spec.readout_lag, spec.shared_forget}, rng));
  } else {
    for (std::size_t n = 0; n < spec.layers; ++n) {
      model.layers.emplace_back(init_lstm(n == 0 ? spec.input : spec.hidden, spec.hidden, rng));
    }
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.hidden));
  model.w_out = Tensor::uniform({spec.classes, spec.hidden}, -bound, bound, rng);
  model.b_out = Tensor::uniform({spec.classes}, -bound, bound, rng);
  return model;
}

/// Ordered name -> tensor view of a model, the unit of checkpointing.
struct NamedTensor {
  std::string name;
  Tensor value;
};

inline std::vector<NamedTensor> named_params(const Classifier<Tensor>& model) {
  std::vector<NamedTensor> out;
  for_each_param(model, [&out](const std::string& name, const Tensor& t) { out.push_back({name, t}); });
  return out;
}

/// Overwrites every parameter of `model` from `tensors`; names and shapes must match exactly.
inline void assign_params(Classifier<Tensor>& model, const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.value;
  std::size_t used = 0;
  for_each_param(model, [&](const std::string& name, Tensor& t) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
    if (it->second->shape() != t.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(it->second->shape()) +
                        ", model expects " + shape_string(t.shape()));
    }
    t = *it->second;
    ++used;
  });
  if (used != by_name.size()) throw FormatError("checkpoint holds tensors the model does not use");
}

struct ForwardResult {
  Var logits;                               // [batch x classes]
  std::vector<std::vector<Var>> attention;  // per Gamma-LSTM layer, per step [batch x (K+1)]
};

/// Runs the stack over xs (each [batch x input]) from zero state and applies
/// the head to the top layer's final hidden state.
inline ForwardResult forward(Tape& tape, const Classifier<Var>& model, std::span<const Var> xs) {
  if (xs.empty()) throw DimensionError("forward: empty input sequence");
  const std::size_t batch = xs.front().value().rows();
  std::vector<Var> seq(xs.begin(), xs.end());
  ForwardResult out;
  for (const auto& layer : model.layers) {
    std::visit(
        [&](const auto& p) {
          auto r = run_sequence(p, zero_state(tape, p, batch), seq);
          seq = std::move(r.hidden);
          if (!r.attention.empty()) out.attention.push_back(std::move(r.attention));
        },
        layer);
  }
  out.logits = linear(seq.back(), model.w_out, model.b_out);
  return out;
}

}  // namespace gamma_rnn
