// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gamma_rnn/errors.hpp"
#include "gamma_rnn/tensor.hpp"

namespace gamma_rnn {

/// Classic gamma memory: a cascade of first-order leaky integrators
///
///   c_0(t) = x(t)
///   c_k(t) = (1 - mu) c_k(t-1) + mu c_{k-1}(t-1),   k = 1..K
///   c(t)   = sum_i W_i * c_i(t)
///
/// with a fixed leak mu shared by all levels and channels. mu = 1 turns the
/// cascade into a K-tap delay line; mu = 0 freezes levels 1..K.
struct GammaMemoryConfig {
  std::size_t order = 1;  // K
  double mu = 0.5;
  std::size_t dim = 1;

  void validate() const {
    if (order < 1) throw ConfigError("gamma memory order must be >= 1");
    if (!(mu >= 0.0 && mu <= 1.0)) {
      throw ConfigError("gamma memory mu must lie in [0, 1], got " + std::to_string(mu));
    }
    if (dim < 1) throw ConfigError("gamma memory width must be >= 1");
  }
};

/// Levels c_0..c_K, each a rank-1 tensor of width dim.
struct GammaMemoryState {
  std::vector<Tensor> levels;

  static GammaMemoryState zeros(const GammaMemoryConfig& cfg) {
    cfg.validate();
    return GammaMemoryState{std::vector<Tensor>(cfg.order + 1, Tensor({cfg.dim}))};
  }

  std::size_t order() const { return levels.empty() ? 0 : levels.size() - 1; }
};

/// Per-level elementwise readout weights W_0..W_K.
struct GammaReadoutWeights {
  std::vector<Tensor> weights;
};

inline void check_state(const GammaMemoryState& state, const GammaMemoryConfig& cfg) {
  if (state.levels.size() != cfg.order + 1) {
    throw DimensionError("gamma memory state has " + std::to_string(state.levels.size()) +
                         " levels, expected " + std::to_string(cfg.order + 1));
  }
  for (const Tensor& level : state.levels) {
    if (level.shape() != Shape{cfg.dim}) {
      throw DimensionError("gamma memory level shape " + shape_string(level.shape()) +
                           " does not match width " + std::to_string(cfg.dim));
    }
  }
}

/// Advances the cascade one step. Every level reads the previous state.
inline GammaMemoryState gamma_step(const GammaMemoryState& state, const Tensor& x,
                                   const GammaMemoryConfig& cfg) {
  cfg.validate();
  check_state(state, cfg);
  if (x.shape() != Shape{cfg.dim}) {
    throw DimensionError("gamma_step: input shape " + shape_string(x.shape()) +
                         " does not match width " + std::to_string(cfg.dim));
  }
  GammaMemoryState next;
  next.levels.reserve(cfg.order + 1);
  next.levels.push_back(x);
  const double keep = 1.0 - cfg.mu;
  for (std::size_t k = 1; k <= cfg.order; ++k) {
    const Tensor& own = state.levels[k];
    const Tensor& below = state.levels[k - 1];
    Tensor level({cfg.dim});
    for (std::size_t j = 0; j < cfg.dim; ++j) level[j] = keep * own[j] + cfg.mu * below[j];
    next.levels.push_back(std::move(level));
  }
  return next;
}

inline Tensor gamma_readout(const GammaMemoryState& state, const GammaReadoutWeights& w) {
  if (state.levels.empty()) throw DimensionError("gamma_readout: state has no levels");
  if (w.weights.size() != state.levels.size()) {
    throw DimensionError("gamma_readout: " + std::to_string(w.weights.size()) + " weights for " +
                         std::to_string(state.levels.size()) + " levels");
  }
  Tensor out(state.levels.front().shape());
  for (std::size_t i = 0; i < state.levels.size(); ++i) {
    require_same_shape(state.levels[i], w.weights[i], "gamma_readout");
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w.weights[i][j] * state.levels[i][j];
  }
  return out;
}

}  // namespace gamma_rnn
