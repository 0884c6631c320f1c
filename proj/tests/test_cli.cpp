// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"

namespace gamma_rnn {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gamma_rnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string config(const std::string& name) { return std::string(GAMMA_RNN_CONFIG_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Checkpoints embed the output directory, so runs are compared by weights.
bool same_weights(const fs::path& a, const fs::path& b) {
  const Checkpoint x = load_checkpoint(a), y = load_checkpoint(b);
  if (x.tensors.size() != y.tensors.size()) return false;
  for (std::size_t i = 0; i < x.tensors.size(); ++i) {
    if (x.tensors[i].name != y.tensors[i].name || x.tensors[i].value != y.tensors[i].value) return false;
  }
  return true;
}

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("gamma_rnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // A small delay-task run that finishes in well under a second.
  Outcome train(const fs::path& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"train",         "--config",          config("delay_task.json"),
                                     "--set",         "data.n_train=64",   "--set",
                                     "data.n_test=32", "--set",            "train.epochs=2",
                                     "--set",         "model.hidden=6",    "--out",
                                     out.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  }

  fs::path dir_;
};

TEST(CountParams, PublishedConfigurations) {
  EXPECT_EQ(run_cli({"count-params", "--config", config("lstm_mnist.json")}).out, "71434\n");
  EXPECT_EQ(run_cli({"count-params", "--config", config("gamma_lstm_mnist.json")}).out, "123018\n");
  const Outcome stacked = run_cli({"count-params", "--config", config("stacked_lstm_mnist.json")});
  EXPECT_EQ(stacked.code, cli::kOk);
  EXPECT_EQ(stacked.out, "203530\n");
  EXPECT_EQ(run_cli({"count-params", "--config", config("stacked_lstm_mnist.json"), "--set", "model.layers=3"}).out,
            "335626\n");
}

TEST(CountParams, SmallestLstmByHand) {
  const Outcome r = run_cli({"count-params", "--config", config("delay_task.json"), "--set", "model.kind=lstm", "--set",
                             "model.memory_order=0", "--set", "model.hidden=1", "--set", "model.classes=1"});
  EXPECT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(r.out, "18\n");
}

TEST(ExitCodes, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"eval"}).code, cli::kUsage);
  const Outcome bad_key = run_cli({"count-params", "--config", config("lstm_mnist.json"), "--set", "model.hiden=3"});
  EXPECT_EQ(bad_key.code, cli::kUsage);
  EXPECT_FALSE(bad_key.err.empty());
  EXPECT_EQ(run_cli({"count-params", "--config", config("lstm_mnist.json"), "--set", "model.memory_order=3"}).code,
            cli::kUsage);
  EXPECT_EQ(run_cli({"count-params", "--config", config("gamma_lstm_mnist.json"), "--set", "model.memory_order=0"}).code,
            cli::kUsage);
}

TEST_F(CliRun, DataErrors) {
  const Outcome missing = run_cli({"train", "--config", config("lstm_mnist.json"), "--data", (dir_ / "nowhere").string(),
                                   "--out", (dir_ / "run").string()});
  EXPECT_EQ(missing.code, cli::kData);
  fs::create_directories(dir_);
  std::ofstream(dir_ / "junk.bin") << "not a checkpoint";
  EXPECT_EQ(run_cli({"eval", "--checkpoint", (dir_ / "junk.bin").string()}).code, cli::kData);
}

TEST_F(CliRun, DivergenceIsANumericalFailure) {
  const Outcome r = train(dir_ / "run", {"--set", "train.optimizer=sgd", "--set", "train.lr=1e308", "--set",
                                         "train.clip=0"});
  if (r.code == cli::kOk) GTEST_SKIP() << "run stayed finite";
  EXPECT_EQ(r.code, cli::kNumerical) << r.err;
  EXPECT_NE(r.err.find("step"), std::string::npos) << r.err;
}

TEST_F(CliRun, TrainWritesItsOutputs) {
  const Outcome r = train(dir_ / "run");
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  for (const char* name : {"metrics.csv", "metrics.jsonl", "config.echo.json", "checkpoint.bin"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / name)) << name;
  }
  std::istringstream csv(slurp(dir_ / "run" / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "epoch,step,train_loss,train_acc,test_acc,wall_seconds");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  std::istringstream jsonl(slurp(dir_ / "run" / "metrics.jsonl"));
  std::size_t json_rows = 0;
  while (std::getline(jsonl, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("train_loss"));
    ++json_rows;
  }
  EXPECT_GE(rows, 3u);
  EXPECT_EQ(rows, json_rows);
  const auto summary = nlohmann::json::parse(r.out);
  EXPECT_EQ(summary["model"], "gamma_lstm");
  EXPECT_TRUE(summary["test_accuracy"].is_number());
}

TEST_F(CliRun, RerunsAreByteIdentical) {
  ASSERT_EQ(train(dir_ / "a").code, cli::kOk);
  ASSERT_EQ(train(dir_ / "b").code, cli::kOk);
  for (const char* name : {"metrics.csv", "metrics.jsonl"}) {
    EXPECT_EQ(slurp(dir_ / "a" / name), slurp(dir_ / "b" / name)) << name;
  }
  EXPECT_TRUE(same_weights(dir_ / "a" / "checkpoint.bin", dir_ / "b" / "checkpoint.bin"));
  ASSERT_EQ(train(dir_ / "c", {"--seed", "8"}).code, cli::kOk);
  EXPECT_NE(slurp(dir_ / "a" / "metrics.csv"), slurp(dir_ / "c" / "metrics.csv"));
}

TEST_F(CliRun, EchoedConfigReproducesTheRun) {
  ASSERT_EQ(train(dir_ / "first").code, cli::kOk);
  const std::string echo = (dir_ / "first" / "config.echo.json").string();
  const Outcome again = run_cli({"train", "--config", echo, "--out", (dir_ / "second").string()});
  ASSERT_EQ(again.code, cli::kOk) << again.err;
  EXPECT_EQ(slurp(dir_ / "first" / "metrics.csv"), slurp(dir_ / "second" / "metrics.csv"));
  EXPECT_TRUE(same_weights(dir_ / "first" / "checkpoint.bin", dir_ / "second" / "checkpoint.bin"));
  auto a = nlohmann::json::parse(slurp(dir_ / "first" / "config.echo.json"));
  auto b = nlohmann::json::parse(slurp(dir_ / "second" / "config.echo.json"));
  a["output"].erase("dir");
  b["output"].erase("dir");
  EXPECT_EQ(a, b);
}

TEST_F(CliRun, EvalMatchesTheTrainingSummary) {
  const Outcome r = train(dir_ / "run");
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const Outcome ev = run_cli({"eval", "--checkpoint", (dir_ / "run" / "checkpoint.bin").string()});
  ASSERT_EQ(ev.code, cli::kOk) << ev.err;
  const auto j = nlohmann::json::parse(ev.out);
  EXPECT_EQ(j["n"], 32);
  EXPECT_EQ(j["model"], "gamma_lstm");
  EXPECT_EQ(j["accuracy"].get<double>(), nlohmann::json::parse(r.out)["test_accuracy"].get<double>());
  EXPECT_EQ(run_cli({"eval", "--checkpoint", (dir_ / "run" / "checkpoint.bin").string(), "--config",
                     config("delay_task.json")})
                .code,
            cli::kUsage);
}

TEST_F(CliRun, CheckpointRestoresEveryParameter) {
  ASSERT_EQ(train(dir_ / "run").code, cli::kOk);
  const Checkpoint ckpt = load_checkpoint(dir_ / "run" / "checkpoint.bin");
  const RunConfig cfg = from_json(ckpt.config);
  Classifier<Tensor> model = init_classifier(cfg.model, 0);
  assign_params(model, ckpt.tensors);
  const auto restored = named_params(model);
  ASSERT_EQ(restored.size(), ckpt.tensors.size());
  for (std::size_t i = 0; i < restored.size(); ++i) {
    EXPECT_EQ(restored[i].name, ckpt.tensors[i].name);
    EXPECT_EQ(restored[i].value, ckpt.tensors[i].value);
  }
  EXPECT_EQ(count_params(model), count_params(cfg.model));
}

TEST_F(CliRun, AttentionTraceIsAProbabilityPerStep) {
  ASSERT_EQ(train(dir_ / "run").code, cli::kOk);
  const Outcome r = run_cli({"trace-attention", "--checkpoint", (dir_ / "run" / "checkpoint.bin").string(), "--index",
                             "3", "--out", (dir_ / "trace").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::istringstream csv(slurp(dir_ / "trace" / "attention.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "t,a0,a1,a2,a3,a4");
  std::size_t steps = 0;
  while (std::getline(csv, line)) {
    std::istringstream fields(line);
    std::string cell;
    std::getline(fields, cell, ',');
    EXPECT_EQ(std::stoul(cell), steps);
    double total = 0.0;
    while (std::getline(fields, cell, ',')) {
      const double a = std::stod(cell);
      EXPECT_GT(a, 0.0);
      total += a;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    ++steps;
  }
  EXPECT_EQ(steps, 20u);
  EXPECT_EQ(run_cli({"trace-attention", "--checkpoint", (dir_ / "run" / "checkpoint.bin").string(), "--index", "999",
                     "--out", (dir_ / "trace").string()})
                .code,
            cli::kUsage);
}

TEST_F(CliRun, AttentionTraceNeedsAGammaModel) {
  ASSERT_EQ(train(dir_ / "run", {"--set", "model.kind=lstm", "--set", "model.memory_order=0"}).code, cli::kOk);
  EXPECT_EQ(run_cli({"trace-attention", "--checkpoint", (dir_ / "run" / "checkpoint.bin").string()}).code, cli::kUsage);
}

TEST(GradCheck, EveryBuiltInCasePasses) {
  const Outcome r = run_cli({"grad-check"});
  EXPECT_EQ(r.code, cli::kOk) << r.out;
  std::istringstream lines(r.out);
  std::string line;
  std::size_t cases = 0;
  while (std::getline(lines, line)) {
    EXPECT_NE(line.find(" ok"), std::string::npos) << line;
    ++cases;
  }
  EXPECT_GE(cases, 6u);
}

TEST(GradCheck, ImpossibleToleranceFailsWithExitThree) {
  const Outcome r = run_cli({"grad-check", "--config", config("delay_task.json"), "--set", "model.hidden=3", "--tol",
                             "1e-30"});
  EXPECT_EQ(r.code, cli::kNumerical) << r.out << r.err;
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

}  // namespace
}  // namespace gamma_rnn
