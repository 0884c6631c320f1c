// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gamma_rnn/gamma_rnn.hpp"

namespace gamma_rnn::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Thrown for command-level usage problems that are not config errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
};

inline void add_common(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("--config", f.config, "JSON run configuration");
  cmd.add_option("--set", f.overrides, "Override a config field, e.g. --set train.lr=0.001 (repeatable)")
      ->allow_extra_args(false);
  cmd.add_option("--data", f.data, "MNIST directory (default: $GAMMA_RNN_DATA)");
  cmd.add_option("--out", f.out, "Output directory");
  cmd.add_option("--seed", f.seed, "Random seed");
}

/// Effective config: file (or defaults), then --set overrides, then the
/// dedicated flags.
inline RunConfig resolve_config(const CommonFlags& f, nlohmann::json base = nlohmann::json::object()) {
  nlohmann::json doc = f.config.empty() ? std::move(base) : read_json_file(f.config);
  for (const auto& o : f.overrides) apply_override(doc, o);
  if (!f.data.empty()) doc["data"]["dir"] = f.data;
  if (!f.out.empty()) doc["output"]["dir"] = f.out;
  if (f.seed) doc["seed"] = *f.seed;
  return from_json(doc);
}

inline DataSource load_data(const RunConfig& c) {
  const std::uint64_t data_seed = c.train.seed ^ 0xda7a5eedULL;
  switch (c.data.source) {
    case DataKind::mnist:
      return load_mnist(resolve_data_dir(c.data.dir), c.data.mode, c.data.train_limit, c.data.test_limit);
    case DataKind::delay:
      return make_delay_task(c.data.n_train, c.data.n_test, c.data.length, c.data.lag, data_seed);
    case DataKind::adding:
      return make_adding_task(c.data.n_train, c.data.n_test, c.data.length, data_seed);
  }
  throw ConfigError("unknown data source");
}

inline std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_header() { return "epoch,step,train_loss,train_acc,test_acc,wall_seconds"; }

inline std::string csv_row(const MetricRecord& r) {
  return std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + fmt_real(r.train_loss) + "," +
         fmt_real(r.train_accuracy) + "," + (r.test_accuracy ? fmt_real(*r.test_accuracy) : "") + "," +
         (r.wall_seconds ? fmt_real(*r.wall_seconds) : "");
}

inline nlohmann::json json_row(const MetricRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch}, {"step", r.step}, {"train_loss", r.train_loss}, {"train_acc", r.train_accuracy}};
  j["test_acc"] = r.test_accuracy ? nlohmann::json(*r.test_accuracy) : nlohmann::json(nullptr);
  j["wall_seconds"] = r.wall_seconds ? nlohmann::json(*r.wall_seconds) : nlohmann::json(nullptr);
  return j;
}

inline Classifier<Tensor> model_from_checkpoint(const Checkpoint& ckpt, const RunConfig& cfg) {
  Classifier<Tensor> model = init_classifier(cfg.model, 0);
  assign_params(model, ckpt.tensors);
  return model;
}

// ---------------------------------------------------------------------------

inline int cmd_train(const CommonFlags& flags, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(flags);
  const std::filesystem::path dir = cfg.out_dir;
  std::filesystem::create_directories(dir);
  {
    std::ofstream echo(dir / "config.echo.json");
    echo << to_json(cfg).dump(2) << '\n';
  }
  const DataSource data = load_data(cfg);

  std::ofstream csv(dir / "metrics.csv", std::ios::trunc);
  std::ofstream jsonl(dir / "metrics.jsonl", std::ios::trunc);
  csv << csv_header() << '\n';
  const auto started = std::chrono::steady_clock::now();
  auto on_record = [&](const MetricRecord& r) {
    csv << csv_row(r) << '\n' << std::flush;
    jsonl << json_row(r).dump() << '\n' << std::flush;
    err << "epoch " << r.epoch << " step " << r.step << " loss " << fmt_real(r.train_loss) << " acc "
        << fmt_real(r.train_accuracy);
    if (r.test_accuracy) err << " test_acc " << fmt_real(*r.test_accuracy);
    err << " (" << fmt_real(std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count())
        << " s)\n";
  };
  const TrainResult result = train_loop(cfg.model, cfg.train, data, on_record, cfg.record_wall_time);
  save_checkpoint(dir / "checkpoint.bin", Checkpoint{to_json(cfg), named_params(result.model)});

  const MetricRecord& first = result.records.front();
  const MetricRecord& last = result.records.back();
  nlohmann::json summary = {{"model", to_string(cfg.model.kind)},
                            {"params", count_params(result.model)},
                            {"initial_train_loss", first.train_loss},
                            {"final_train_loss", last.train_loss},
                            {"test_accuracy", last.test_accuracy ? nlohmann::json(*last.test_accuracy) : nlohmann::json(nullptr)},
                            {"out_dir", dir.string()}};
  out << summary.dump() << '\n';
  return kOk;
}

inline int cmd_eval(const CommonFlags& flags, const std::string& checkpoint, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  CommonFlags f = flags;
  if (!f.config.empty()) throw UsageError("eval takes its configuration from the checkpoint; use --set to adjust it");
  const RunConfig cfg = resolve_config(f, ckpt.config);
  const Classifier<Tensor> model = model_from_checkpoint(ckpt, cfg);
  const DataSource data = load_data(cfg);
  const Evaluation ev = evaluate(model, data.test, cfg.train.batch);
  out << nlohmann::json{{"accuracy", ev.accuracy}, {"n", ev.n}, {"model", to_string(cfg.model.kind)}}.dump() << '\n';
  return kOk;
}

inline int cmd_count_params(const CommonFlags& flags, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags);
  out << count_params(cfg.model) << '\n';
  return kOk;
}

struct GradCheckFlags {
  std::size_t input = 3;
  std::size_t hidden = 5;
  std::size_t length = 6;
  std::size_t batch = 8;
  double eps = 1e-5;
  double tolerance = 1e-5;
};

/// With --config, checks that one model; otherwise every cell variant at the
/// small default size.
inline int cmd_grad_check(const CommonFlags& flags, const GradCheckFlags& g, std::ostream& out) {
  std::vector<GradCheckCase> cases;
  std::uint64_t seed = flags.seed.value_or(1);
  if (!flags.config.empty() || !flags.overrides.empty()) {
    const RunConfig cfg = resolve_config(flags);
    cases.push_back({std::string(to_string(cfg.model.kind)), cfg.model});
    seed = cfg.train.seed;
  } else {
    cases = standard_grad_check_cases(g.input, g.hidden);
  }
  bool ok = true;
  for (const auto& c : cases) {
    const GradCheckResult r = check_model_gradients(c.spec, g.length, g.batch, seed, g.eps);
    const bool pass = r.max_rel_error < g.tolerance;
    ok = ok && pass;
    out << c.label << " max_rel_err=" << fmt_real(r.max_rel_error) << (pass ? " ok" : " FAIL") << '\n';
  }
  return ok ? kOk : kNumerical;
}

inline int cmd_trace_attention(const CommonFlags& flags, const std::string& checkpoint, std::size_t index,
                               const std::string& split, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const RunConfig cfg = resolve_config(flags, ckpt.config);
  if (cfg.model.kind != CellKind::gamma_lstm) throw UsageError("trace-attention needs a gamma_lstm checkpoint");
  const Classifier<Tensor> model = model_from_checkpoint(ckpt, cfg);
  const DataSource data = load_data(cfg);
  if (split != "train" && split != "test") throw UsageError("--split must be train or test");
  const auto& examples = split == "train" ? data.train : data.test;
  if (index >= examples.size()) {
    throw UsageError("example index " + std::to_string(index) + " out of range (" + std::to_string(examples.size()) +
                     " examples)");
  }
  const std::size_t idx[] = {index};
  const Batch b = make_batch(examples, idx);
  Tape tape;
  const Classifier<Var> bound = bind(tape, model);
  std::vector<Var> xs;
  for (const Tensor& s : b.steps) xs.push_back(tape.leaf(s));
  const ForwardResult fwd = forward(tape, bound, xs);

  const std::filesystem::path dir = flags.out.empty() ? std::filesystem::path(".") : std::filesystem::path(flags.out);
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "attention.csv", std::ios::trunc);
  csv << "t";
  for (std::size_t k = 0; k <= cfg.model.order; ++k) csv << ",a" << k;
  csv << '\n';
  const auto& steps = fwd.attention.front();
  for (std::size_t t = 0; t < steps.size(); ++t) {
    csv << t;
    for (double a : steps[t].value().data()) csv << ',' << fmt_real(a);
    csv << '\n';
  }
  out << (dir / "attention.csv").string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gamma-LSTM recurrent network laboratory", "gamma_rnn"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, count_f, grad_f, trace_f;
  std::string checkpoint;
  std::size_t index = 0;
  std::string split = "test";
  GradCheckFlags gc;

  auto* train = app.add_subcommand("train", "Train a model; writes metrics.csv, metrics.jsonl, config.echo.json, checkpoint.bin");
  add_common(*train, train_f);
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on its test split");
  add_common(*eval, eval_f);
  eval->add_option("--checkpoint", checkpoint, "checkpoint.bin from a training run")->required();
  auto* count = app.add_subcommand("count-params", "Print the learnable parameter count of a configuration");
  add_common(*count, count_f);
  auto* grad = app.add_subcommand("grad-check", "Compare BPTT gradients with central differences");
  add_common(*grad, grad_f);
  grad->add_option("--input", gc.input, "Input width for the built-in cases");
  grad->add_option("--hidden", gc.hidden, "Hidden width for the built-in cases");
  grad->add_option("--length", gc.length, "Sequence length");
  grad->add_option("--batch", gc.batch, "Sequences per instance");
  grad->add_option("--eps", gc.eps, "Finite-difference step");
  grad->add_option("--tol", gc.tolerance, "Maximum accepted relative error");
  auto* trace = app.add_subcommand("trace-attention", "Write per-step attention coefficients a[0..K] as CSV");
  add_common(*trace, trace_f);
  trace->add_option("--checkpoint", checkpoint, "checkpoint.bin of a gamma_lstm run")->required();
  trace->add_option("--index", index, "Example index within the split");
  trace->add_option("--split", split, "train or test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(train_f, out, err);
    if (*eval) return cmd_eval(eval_f, checkpoint, out);
    if (*count) return cmd_count_params(count_f, out);
    if (*grad) return cmd_grad_check(grad_f, gc, out);
    if (*trace) return cmd_trace_attention(trace_f, checkpoint, index, split, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace gamma_rnn::cli
