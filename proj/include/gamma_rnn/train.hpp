// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gamma_rnn/autodiff.hpp"
#include "gamma_rnn/data.hpp"
#include "gamma_rnn/errors.hpp"
#include "gamma_rnn/model.hpp"
#include "gamma_rnn/rng.hpp"
#include "gamma_rnn/tensor.hpp"

namespace gamma_rnn {

/// Mean over the batch of -log softmax(logits)[label], via log-sum-exp.
inline Var cross_entropy(const Var& logits, std::span<const std::size_t> labels) {
  Tape& tape = *logits.tape();
  const Tensor& z = logits.value();
  if (z.rank() != 2 && z.rank() != 1) throw DimensionError("cross_entropy: logits must be [batch x classes]");
  const std::size_t m = z.rows(), n = z.cols();
  if (labels.size() != m) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(m) +
                         " rows");
  }
  std::vector<std::size_t> targets(labels.begin(), labels.end());
  for (std::size_t label : targets) {
    if (label >= n) throw ContractError("cross_entropy: label " + std::to_string(label) + " >= classes " + std::to_string(n));
  }
  Tensor probs({m, n});
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = &z[i * n];
    const double peak = *std::max_element(row, row + n);
    double norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) norm += std::exp(row[j] - peak);
    const double log_norm = peak + std::log(norm);
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] = std::exp(row[j] - log_norm);
    total += log_norm - row[targets[i]];
  }
  const std::size_t zid = logits.id();
  return tape.record(Tensor::scalar(total / static_cast<double>(m)), {zid},
                     [zid, m, n, probs = std::move(probs), targets = std::move(targets)](
                         std::size_t, const Tensor& g, GradSink& sink) {
                       Tensor& gz = sink.slot(zid);
                       const double s = g[0] / static_cast<double>(m);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < n; ++j) {
                           gz[i * n + j] += s * (probs[i * n + j] - (j == targets[i] ? 1.0 : 0.0));
                         }
                       }
                     });
}

// ---------------------------------------------------------------------------
// Optimizers.

struct OptimizerConfig {
  std::string name = "adam";  // "adam" or "sgd"
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moments, one pair per parameter tensor.
struct OptimizerState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::size_t step = 0;
};

namespace detail {
inline void require_mirrored(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) throw DimensionError("optimizer: parameter and gradient counts differ");
  for (std::size_t k = 0; k < params.size(); ++k) require_same_shape(*params[k], grads[k], "optimizer");
}
}  // namespace detail

inline void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads, double lr) {
  detail::require_mirrored(params, grads);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grads[k][i];
  }
}

/// Adam with bias correction:
///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2
///   p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
inline void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptimizerState& state,
                      const OptimizerConfig& cfg) {
  detail::require_mirrored(params, grads);
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) throw DimensionError("adam: moment count differs from parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    require_same_shape(p, m, "adam moments");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = grads[k][i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      p[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
}

inline double global_norm(std::span<const Tensor> grads) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (double v : g.data()) sq += v * v;
  }
  return std::sqrt(sq);
}

/// Rescales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
inline double clip_grad_norm(std::span<Tensor> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractError("clip_grad_norm: max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor& g : grads) {
      for (double& v : g.data()) v *= factor;
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Training loop.

struct TrainConfig {
  OptimizerConfig optimizer;
  std::size_t batch = 64;
  double clip = 5.0;  // 0 disables clipping
  std::size_t epochs = 10;
  std::size_t log_every = 0;  // extra records every N steps; 0 = epoch ends only
  std::uint64_t seed = 1;
};

struct MetricRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
  std::optional<double> wall_seconds;
};

struct TrainState {
  Classifier<Tensor> model;
  OptimizerState optimizer;
  std::uint64_t seed = 0;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
};

struct Batch {
  std::vector<Tensor> steps;  // T tensors of [batch x input]
  std::vector<std::size_t> labels;
};

inline Batch make_batch(const std::vector<SequenceExample>& examples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("make_batch: empty batch");
  const SequenceExample& first = examples.at(indices.front());
  const std::size_t length = first.length(), width = first.width();
  Batch b;
  b.steps.assign(length, Tensor({indices.size(), width}));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const SequenceExample& ex = examples.at(indices[r]);
    if (ex.length() != length || ex.width() != width) throw DimensionError("make_batch: ragged sequences");
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t j = 0; j < width; ++j) b.steps[t][r * width + j] = ex.inputs[t * width + j];
    }
    b.labels.push_back(ex.label);
  }
  return b;
}

inline std::size_t count_correct(const Tensor& logits, std::span<const std::size_t> labels) {
  const std::size_t n = logits.cols();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* row = &logits[i * n];
    const auto best = static_cast<std::size_t>(std::max_element(row, row + n) - row);
    correct += best == labels[i] ? 1 : 0;
  }
  return correct;
}

struct BatchOutcome {
  double loss = 0.0;
  std::size_t correct = 0;
};

/// Forward pass of one batch on a fresh tape; fills grads (in parameter
/// order) when requested.
inline BatchOutcome run_batch(const Classifier<Tensor>& model, const Batch& batch, std::vector<Tensor>* grads) {
  Tape tape;
  const Classifier<Var> bound = bind(tape, model);
  std::vector<Var> xs;
  xs.reserve(batch.steps.size());
  for (const Tensor& step : batch.steps) xs.push_back(tape.leaf(step));
  const ForwardResult fwd = forward(tape, bound, xs);
  const Var loss = cross_entropy(fwd.logits, batch.labels);
  BatchOutcome out{loss.value().item(), count_correct(fwd.logits.value(), batch.labels)};
  if (grads != nullptr) {
    const Gradients g = tape.backward(loss);
    grads->clear();
    for_each_param(bound, [&](const std::string&, const Var& v) { grads->push_back(g[v]); });
  }
  return out;
}

inline Evaluation evaluate(const Classifier<Tensor>& model, const std::vector<SequenceExample>& examples,
                           std::size_t batch_size) {
  Evaluation ev;
  if (examples.empty()) return ev;
  std::vector<std::size_t> idx(examples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const std::size_t stop = std::min(idx.size(), start + batch_size);
    const Batch b = make_batch(examples, std::span<const std::size_t>(idx).subspan(start, stop - start));
    const BatchOutcome r = run_batch(model, b, nullptr);
    loss_sum += r.loss * static_cast<double>(stop - start);
    correct += r.correct;
  }
  ev.n = examples.size();
  ev.loss = loss_sum / static_cast<double>(ev.n);
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(ev.n);
  return ev;
}

inline std::vector<Tensor*> param_pointers(Classifier<Tensor>& model) {
  std::vector<Tensor*> out;
  for_each_param(model, [&out](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

/// Applies one optimizer update with optional clipping; returns the pre-clip norm.
inline double apply_update(TrainState& state, std::vector<Tensor>& grads, const TrainConfig& cfg) {
  const double norm = cfg.clip > 0.0 ? clip_grad_norm(grads, cfg.clip) : global_norm(grads);
  const auto params = param_pointers(state.model);
  if (cfg.optimizer.name == "adam") {
    adam_step(params, grads, state.optimizer, cfg.optimizer);
  } else if (cfg.optimizer.name == "sgd") {
    sgd_step(params, grads, cfg.optimizer.lr);
    ++state.optimizer.step;
  } else {
    throw ConfigError("unknown optimizer '" + cfg.optimizer.name + "' (expected adam or sgd)");
  }
  return norm;
}

struct TrainResult {
  Classifier<Tensor> model;
  std::vector<MetricRecord> records;
};

/// Trains a fresh model. Emits an epoch-0 record (the untrained model
/// evaluated on both splits), optional records every log_every steps, and one
/// record per epoch: mean mini-batch loss and accuracy over the epoch plus
/// accuracy on the full test split. Deterministic for a given seed;
/// wall_seconds is filled only when record_wall_time is set.
inline TrainResult train_loop(const ModelSpec& spec, const TrainConfig& cfg, const DataSource& data,
                              const std::function<void(const MetricRecord&)>& on_record = {},
                              bool record_wall_time = false) {
  spec.validate();
  if (cfg.batch == 0) throw ConfigError("batch size must be positive");
  if (data.train.empty()) throw ConfigError("training split is empty");
  if (data.input_size != spec.input) {
    throw ConfigError("model input width " + std::to_string(spec.input) + " does not match data width " +
                      std::to_string(data.input_size));
  }
  if (data.classes > spec.classes) {
    throw ConfigError("data has " + std::to_string(data.classes) + " classes but the model only " +
                      std::to_string(spec.classes));
  }

  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&]() -> std::optional<double> {
    if (!record_wall_time) return std::nullopt;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  TrainState state{init_classifier(spec, cfg.seed), {}, cfg.seed};
  TrainResult result;
  auto emit = [&](MetricRecord rec) {
    if (on_record) on_record(rec);
    result.records.push_back(rec);
  };

  {
    const Evaluation tr = evaluate(state.model, data.train, cfg.batch);
    const Evaluation te = evaluate(state.model, data.test, cfg.batch);
    emit({0, 0, tr.loss, tr.accuracy, data.test.empty() ? std::nullopt : std::optional(te.accuracy), elapsed()});
  }

  // Shuffle stream is separate from the initialization stream.
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Tensor> grads;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0, window_loss = 0.0;
    std::size_t epoch_seen = 0, epoch_correct = 0, window_seen = 0, window_correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch);
      const Batch b = make_batch(data.train, std::span<const std::size_t>(order).subspan(start, stop - start));
      const BatchOutcome r = run_batch(state.model, b, &grads);
      ++step;
      if (!std::isfinite(r.loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step));
      }
      const double norm = apply_update(state, grads, cfg);
      if (!std::isfinite(norm)) {
        throw NumericalError("non-finite gradient norm at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step));
      }
      const std::size_t n = stop - start;
      epoch_loss += r.loss * static_cast<double>(n);
      window_loss += r.loss * static_cast<double>(n);
      epoch_seen += n;
      window_seen += n;
      epoch_correct += r.correct;
      window_correct += r.correct;
      if (cfg.log_every != 0 && step % cfg.log_every == 0 && stop != order.size()) {
        emit({epoch, step, window_loss / static_cast<double>(window_seen),
              static_cast<double>(window_correct) / static_cast<double>(window_seen), std::nullopt, elapsed()});
        window_loss = 0.0;
        window_seen = window_correct = 0;
      }
    }
    std::optional<double> test_acc;
    if (!data.test.empty()) test_acc = evaluate(state.model, data.test, cfg.batch).accuracy;
    emit({epoch, step, epoch_loss / static_cast<double>(epoch_seen),
          static_cast<double>(epoch_correct) / static_cast<double>(epoch_seen), test_acc, elapsed()});
  }
  result.model = std::move(state.model);
  return result;
}

}  // namespace gamma_rnn
