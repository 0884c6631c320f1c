// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gamma_rnn/autodiff.hpp"
#include "gamma_rnn/cells.hpp"
#include "gamma_rnn/model.hpp"
#include "gamma_rnn/rng.hpp"
#include "gamma_rnn/train.hpp"

namespace gamma_rnn {

struct GradCheckCase {
  std::string label;
  ModelSpec spec;
};

/// Every cell variant: LSTM, 2-layer stacked LSTM, and Gamma-LSTM for
/// K = 1..3 under each readout_lag / shared_forget setting.
inline std::vector<GradCheckCase> standard_grad_check_cases(std::size_t input, std::size_t hidden,
                                                            std::size_t classes = 3) {
  std::vector<GradCheckCase> cases;
  ModelSpec base;
  base.input = input;
  base.hidden = hidden;
  base.classes = classes;

  ModelSpec lstm = base;
  lstm.kind = CellKind::lstm;
  cases.push_back({"lstm", lstm});

  ModelSpec stacked = base;
  stacked.kind = CellKind::stacked_lstm;
  stacked.layers = 2;
  cases.push_back({"stacked_lstm(layers=2)", stacked});

  for (std::size_t k = 1; k <= 3; ++k) {
    for (bool lag : {false, true}) {
      for (bool shared : {false, true}) {
        ModelSpec g = base;
        g.kind = CellKind::gamma_lstm;
        g.order = k;
        g.readout_lag = lag;
        g.shared_forget = shared;
        cases.push_back({"gamma_lstm(K=" + std::to_string(k) + ",readout_lag=" + (lag ? "1" : "0") +
                             ",shared_forget=" + (shared ? "1" : "0") + ")",
                         g});
      }
    }
  }
  return cases;
}

/// BPTT gradient check of a whole classifier on a random instance: random
/// weights, inputs, initial states and labels; the loss is the head's
/// cross-entropy on the final hidden state plus a random projection of every
/// top-layer hidden state, so every step contributes. Checks all weights and
/// all inputs against central differences.
inline GradCheckResult check_model_gradients(const ModelSpec& spec, std::size_t length, std::size_t batch,
                                             std::uint64_t seed, double eps) {
  spec.validate();
  Rng rng(seed);
  const Classifier<Tensor> skeleton = init_classifier(spec, rng.next());

  std::vector<Tensor> inputs;
  for_each_param(skeleton, [&](const std::string&, const Tensor& t) { inputs.push_back(t); });
  const std::size_t n_params = inputs.size();
  for (std::size_t t = 0; t < length; ++t) inputs.push_back(Tensor::uniform({batch, spec.input}, -1.0, 1.0, rng));

  // Constants of the loss, fixed across evaluations.
  std::vector<std::vector<Tensor>> init_states;  // per layer: h then memory tensors
  for (const auto& layer : skeleton.layers) {
    std::vector<Tensor> s;
    const std::size_t memories = std::holds_alternative<GammaLstmParams<Tensor>>(layer)
                                     ? std::get<GammaLstmParams<Tensor>>(layer).order + 1
                                     : 1;
    for (std::size_t k = 0; k < memories + 1; ++k) s.push_back(Tensor::uniform({batch, spec.hidden}, -0.5, 0.5, rng));
    init_states.push_back(std::move(s));
  }
  std::vector<Tensor> projections;
  for (std::size_t t = 0; t < length; ++t) projections.push_back(Tensor::uniform({batch, spec.hidden}, -1.0, 1.0, rng));
  std::vector<std::size_t> labels;
  for (std::size_t b = 0; b < batch; ++b) labels.push_back(rng.index(spec.classes));

  auto loss_fn = [&](Tape& tape, std::span<const Var> vars) {
    Classifier<Var> model = bind(tape, skeleton);
    std::size_t k = 0;
    for_each_param(model, [&](const std::string&, Var& v) { v = vars[k++]; });
    std::vector<Var> seq(vars.begin() + static_cast<std::ptrdiff_t>(n_params), vars.end());
    for (std::size_t n = 0; n < model.layers.size(); ++n) {
      const auto& s = init_states[n];
      if (const auto* g = std::get_if<GammaLstmParams<Var>>(&model.layers[n])) {
        GammaLstmState<Var> init{tape.leaf(s[0]), {}};
        for (std::size_t i = 1; i < s.size(); ++i) init.levels.push_back(tape.leaf(s[i]));
        seq = run_sequence(*g, init, seq).hidden;
      } else {
        const auto& p = std::get<LstmParams<Var>>(model.layers[n]);
        seq = run_sequence(p, LstmState<Var>{tape.leaf(s[0]), tape.leaf(s[1])}, seq).hidden;
      }
    }
    Var loss = cross_entropy(linear(seq.back(), model.w_out, model.b_out), labels);
    for (std::size_t t = 0; t < seq.size(); ++t) loss = add(loss, sum(mul(seq[t], tape.leaf(projections[t]))));
    return loss;
  };
  return grad_check_all(loss_fn, std::move(inputs), eps);
}

}  // namespace gamma_rnn
