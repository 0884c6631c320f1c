// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gamma_rnn/data.hpp"
#include "gamma_rnn/train.hpp"

namespace gamma_rnn {
namespace {

double ce_value(const Tensor& logits, const std::vector<std::size_t>& labels) {
  Tape tape;
  return cross_entropy(tape.leaf(logits), labels).value().item();
}

TEST(CrossEntropy, EqualLogitsGiveLogOfClassCount) {
  EXPECT_NEAR(ce_value(Tensor({2, 10}, 0.3), {4, 9}), std::log(10.0), 1e-12);
  EXPECT_NEAR(std::log(10.0), 2.302585, 1e-6);
}

TEST(CrossEntropy, SaturatedCorrectLogitIsNearlyFree) {
  Tensor logits({1, 10});
  logits[3] = 50.0;
  EXPECT_LT(ce_value(logits, {3}), 1e-9);
}

TEST(CrossEntropy, MatchesDirectPerSampleSummation) {
  Rng rng(31);
  const Tensor logits = Tensor::uniform({3, 4}, -3, 3, rng);
  const std::vector<std::size_t> labels{2, 0, 3};
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < 4; ++j) denom += std::exp(logits.at(i, j));
    expected += -std::log(std::exp(logits.at(i, labels[i])) / denom);
  }
  EXPECT_NEAR(ce_value(logits, labels), expected / 3.0, 1e-14);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(32);
  const std::vector<std::size_t> labels{1, 0, 2, 2};
  const double err =
      grad_check([&](Tape&, Var z) { return cross_entropy(z, labels); }, Tensor::uniform({4, 3}, -2, 2, rng), 1e-5);
  EXPECT_LT(err, 1e-6);
}

TEST(CrossEntropy, StableForLargeLogits) {
  EXPECT_TRUE(std::isfinite(ce_value(Tensor::matrix(1, 2, {1000, -1000}), {1})));
  EXPECT_NEAR(ce_value(Tensor::matrix(1, 2, {1000, -1000}), {1}), 2000.0, 1e-9);
}

TEST(CrossEntropy, BadLabels) {
  Tape tape;
  const Var z = tape.leaf(Tensor({2, 3}));
  EXPECT_THROW(cross_entropy(z, std::vector<std::size_t>{0, 3}), ContractError);
  EXPECT_THROW(cross_entropy(z, std::vector<std::size_t>{0}), DimensionError);
}

TEST(Sgd, HandArithmetic) {
  Tensor p = Tensor::vector({1.0});
  std::vector<Tensor*> params{&p};
  const std::vector<Tensor> grads{Tensor::vector({0.5})};
  sgd_step(params, grads, 0.1);
  EXPECT_DOUBLE_EQ(p[0], 0.95);
}

TEST(Sgd, ZeroGradientLeavesParamsUnchanged) {
  Rng rng(1);
  Tensor p = Tensor::uniform({3, 2}, -1, 1, rng);
  const Tensor before = p;
  std::vector<Tensor*> params{&p};
  sgd_step(params, std::vector<Tensor>{Tensor({3, 2})}, 0.1);
  EXPECT_EQ(p, before);
  EXPECT_THROW(sgd_step(params, std::vector<Tensor>{Tensor({2, 3})}, 0.1), DimensionError);
}

TEST(Adam, ZeroGradientsOnlyDecayMoments) {
  Tensor p = Tensor::vector({1.0, -2.0});
  std::vector<Tensor*> params{&p};
  OptimizerState state;
  const OptimizerConfig cfg;
  adam_step(params, std::vector<Tensor>{Tensor({2})}, state, cfg);
  EXPECT_EQ(p, Tensor::vector({1.0, -2.0}));

  adam_step(params, std::vector<Tensor>{Tensor::vector({0.3, -0.1})}, state, cfg);
  const Tensor m = state.first_moment[0], v = state.second_moment[0];
  adam_step(params, std::vector<Tensor>{Tensor({2})}, state, cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(state.first_moment[0][i], cfg.beta1 * m[i]);
    EXPECT_DOUBLE_EQ(state.second_moment[0][i], cfg.beta2 * v[i]);
  }
  EXPECT_EQ(state.step, 3u);
}

TEST(Adam, MatchesScalarRecurrence) {
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const std::vector<double> grads{0.5, -0.2, 0.05, 1.5};
  double p = 0.7, m = 0.0, v = 0.0;
  Tensor t = Tensor::vector({0.7});
  std::vector<Tensor*> params{&t};
  OptimizerState state;
  OptimizerConfig cfg;
  cfg.lr = lr;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const double g = grads[k];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, static_cast<double>(k + 1)));
    const double vhat = v / (1 - std::pow(b2, static_cast<double>(k + 1)));
    p -= lr * mhat / (std::sqrt(vhat) + eps);
    adam_step(params, std::vector<Tensor>{Tensor::vector({g})}, state, cfg);
    EXPECT_NEAR(t[0], p, 1e-15) << "step " << k + 1;
  }
}

TEST(Adam, FirstStepMovesByLearningRateAgainstTheGradientSign) {
  Tensor p = Tensor::vector({0.0, 0.0});
  std::vector<Tensor*> params{&p};
  OptimizerState state;
  OptimizerConfig cfg;
  cfg.lr = 0.1;
  adam_step(params, std::vector<Tensor>{Tensor::vector({3.0, -0.002})}, state, cfg);
  EXPECT_NEAR(p[0], -0.1, 1e-8);
  EXPECT_NEAR(p[1], 0.1, 1e-5);
}

TEST(Clip, LongVectorIsHalved) {
  std::vector<Tensor> grads{Tensor::vector({6.0}), Tensor::vector({8.0})};  // norm 10
  EXPECT_DOUBLE_EQ(clip_grad_norm(grads, 5.0), 10.0);
  EXPECT_DOUBLE_EQ(grads[0][0], 3.0);
  EXPECT_DOUBLE_EQ(grads[1][0], 4.0);
}

TEST(Clip, ShortVectorIsUntouched) {
  std::vector<Tensor> grads{Tensor::vector({0.6, 0.8})};  // norm 1
  const std::vector<Tensor> before = grads;
  EXPECT_DOUBLE_EQ(clip_grad_norm(grads, 5.0), 1.0);
  EXPECT_EQ(grads, before);
  EXPECT_THROW(clip_grad_norm(grads, 0.0), ContractError);
}

TEST(Clip, NormIsCappedAndDirectionPreserved) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    const double scale = rng.uniform(0.01, 20.0);
    std::vector<Tensor> grads{Tensor::uniform({3, 4}, -scale, scale, rng), Tensor::uniform({5}, -scale, scale, rng)};
    const std::vector<Tensor> before = grads;
    const double max_norm = rng.uniform(0.5, 10.0);
    const double pre = clip_grad_norm(grads, max_norm);
    EXPECT_NEAR(global_norm(grads), std::min(pre, max_norm), 1e-12);
    double dot = 0.0;
    for (std::size_t k = 0; k < grads.size(); ++k) {
      for (std::size_t i = 0; i < grads[k].size(); ++i) dot += grads[k][i] * before[k][i];
    }
    EXPECT_NEAR(dot / (global_norm(grads) * global_norm(before)), 1.0, 1e-12);
  }
}

TEST(Batching, MakeBatchStacksStepsRowWise) {
  std::vector<SequenceExample> ex{{Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}), 1}, {Tensor::matrix(3, 2, {7, 8, 9, 10, 11, 12}), 0}};
  const std::vector<std::size_t> idx{1, 0};
  const Batch b = make_batch(ex, idx);
  ASSERT_EQ(b.steps.size(), 3u);
  EXPECT_EQ(b.steps[1], Tensor::matrix(2, 2, {9, 10, 3, 4}));
  EXPECT_EQ(b.labels, (std::vector<std::size_t>{0, 1}));
  ex[0].inputs = Tensor({2, 2});
  EXPECT_THROW(make_batch(ex, idx), DimensionError);
}

TEST(Batching, CountCorrectUsesArgmax) {
  const Tensor logits = Tensor::matrix(3, 3, {0.1, 0.9, 0.0, 2.0, -1.0, 1.0, 0.0, 0.0, 5.0});
  EXPECT_EQ(count_correct(logits, std::vector<std::size_t>{1, 2, 2}), 2u);
}

TEST(Evaluate, IndependentOfBatchSize) {
  const DataSource data = make_delay_task(37, 0, 8, 2, 5);
  ModelSpec spec{CellKind::gamma_lstm, 1, 4, 1, 2, 2, false, false};
  const Classifier<Tensor> model = init_classifier(spec, 9);
  const Evaluation a = evaluate(model, data.train, 1), b = evaluate(model, data.train, 10);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_NEAR(a.loss, b.loss, 1e-14);
  EXPECT_EQ(a.n, 37u);
}

TrainConfig small_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.batch = 8;
  cfg.epochs = epochs;
  cfg.optimizer.lr = 0.01;
  cfg.seed = 3;
  return cfg;
}

TEST(TrainLoop, IdenticalConfigsGiveIdenticalRecords) {
  const DataSource data = make_delay_task(64, 32, 10, 2, 11);
  const ModelSpec spec{CellKind::gamma_lstm, 1, 6, 1, 3, 2, false, false};
  TrainConfig cfg = small_config(2);
  cfg.log_every = 3;
  const TrainResult a = train_loop(spec, cfg, data), b = train_loop(spec, cfg, data);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].epoch, b.records[i].epoch);
    EXPECT_EQ(a.records[i].step, b.records[i].step);
    EXPECT_EQ(a.records[i].train_loss, b.records[i].train_loss);
    EXPECT_EQ(a.records[i].train_accuracy, b.records[i].train_accuracy);
    EXPECT_EQ(a.records[i].test_accuracy, b.records[i].test_accuracy);
    EXPECT_FALSE(a.records[i].wall_seconds.has_value());
  }
  EXPECT_EQ(named_params(a.model).front().value, named_params(b.model).front().value);
}

TEST(TrainLoop, RecordScheduleAndRanges) {
  const DataSource data = make_delay_task(40, 16, 6, 1, 2);
  const ModelSpec spec{CellKind::lstm, 1, 4, 1, 0, 2, false, false};
  TrainConfig cfg = small_config(3);
  cfg.log_every = 2;
  std::vector<MetricRecord> streamed;
  const TrainResult r = train_loop(spec, cfg, data, [&](const MetricRecord& m) { streamed.push_back(m); }, true);
  ASSERT_EQ(streamed.size(), r.records.size());
  // 5 steps per epoch: records at steps 2 and 4 plus the epoch end, after the epoch-0 record.
  ASSERT_EQ(r.records.size(), 1u + 3 * 3);
  EXPECT_EQ(r.records[0].epoch, 0u);
  EXPECT_EQ(r.records[0].step, 0u);
  EXPECT_EQ(r.records.back().step, 15u);
  std::size_t last_step = 0;
  for (const MetricRecord& m : r.records) {
    EXPECT_GE(m.train_loss, 0.0);
    EXPECT_GE(m.train_accuracy, 0.0);
    EXPECT_LE(m.train_accuracy, 1.0);
    EXPECT_GE(m.step, last_step);
    last_step = m.step;
    ASSERT_TRUE(m.wall_seconds.has_value());
    if (m.test_accuracy) {
      EXPECT_GE(*m.test_accuracy, 0.0);
      EXPECT_LE(*m.test_accuracy, 1.0);
    }
  }
  for (std::size_t e = 0; e <= 3; ++e) EXPECT_TRUE(r.records[e * 3].test_accuracy.has_value()) << e;
}

TEST(TrainLoop, DivergenceNamesTheStep) {
  DataSource data = make_delay_task(32, 0, 6, 1, 2);
  data.train[5].inputs[0] = std::nan("");
  const ModelSpec spec{CellKind::lstm, 1, 4, 1, 0, 2, false, false};
  TrainConfig cfg = small_config(2);
  cfg.batch = 32;
  try {
    train_loop(spec, cfg, data);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
  }
}

TEST(TrainLoop, RejectsMismatchedData) {
  const DataSource data = make_delay_task(8, 0, 4, 1, 2);
  EXPECT_THROW(train_loop(ModelSpec{CellKind::lstm, 3, 4, 1, 0, 2, false, false}, small_config(1), data), ConfigError);
  EXPECT_THROW(train_loop(ModelSpec{CellKind::lstm, 1, 4, 1, 0, 1, false, false}, small_config(1), data), ConfigError);
  TrainConfig bad = small_config(1);
  bad.optimizer.name = "rmsprop";
  EXPECT_THROW(train_loop(ModelSpec{CellKind::lstm, 1, 4, 1, 0, 2, false, false}, bad, data), ConfigError);
}

TEST(TrainLoop, MomentShapesMirrorParameters) {
  const DataSource data = make_delay_task(16, 0, 4, 1, 2);
  const ModelSpec spec{CellKind::gamma_lstm, 1, 3, 1, 2, 2, false, false};
  TrainState state{init_classifier(spec, 1), {}, 1};
  std::vector<Tensor> grads;
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  run_batch(state.model, make_batch(data.train, idx), &grads);
  apply_update(state, grads, small_config(1));
  const auto params = named_params(state.model);
  ASSERT_EQ(state.optimizer.first_moment.size(), params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    EXPECT_EQ(state.optimizer.first_moment[k].shape(), params[k].value.shape());
    EXPECT_EQ(state.optimizer.second_moment[k].shape(), params[k].value.shape());
  }
}

// 400 sequences in batches of 8 for 4 epochs is 200 optimizer steps.
TEST(TrainLoopProperty, DelayTaskLossDropsWithinTwoHundredSteps) {
  const DataSource data = make_delay_task(400, 0, 12, 2, 21);
  for (CellKind kind : {CellKind::lstm, CellKind::stacked_lstm, CellKind::gamma_lstm}) {
    ModelSpec spec{kind, 1, 8, kind == CellKind::stacked_lstm ? 2u : 1u, kind == CellKind::gamma_lstm ? 3u : 0u, 2, false, false};
    TrainConfig cfg = small_config(4);
    const TrainResult r = train_loop(spec, cfg, data);
    ASSERT_EQ(r.records.back().step, 200u);
    const double initial = r.records.front().train_loss;
    const double after = evaluate(r.model, data.train, 64).loss;
    EXPECT_LT(after, initial) << to_string(kind);
  }
}

}  // namespace
}  // namespace gamma_rnn
