// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gamma_rnn/data.hpp"
#include "gamma_rnn/errors.hpp"
#include "gamma_rnn/model.hpp"
#include "gamma_rnn/train.hpp"

namespace gamma_rnn {

enum class DataKind { mnist, delay, adding };

inline std::string_view to_string(DataKind kind) {
  switch (kind) {
    case DataKind::mnist: return "mnist";
    case DataKind::delay: return "delay";
    case DataKind::adding: return "adding";
  }
  return "?";
}

inline DataKind parse_data_kind(std::string_view name) {
  if (name == "mnist") return DataKind::mnist;
  if (name == "delay") return DataKind::delay;
  if (name == "adding") return DataKind::adding;
  throw ConfigError("unknown data source '" + std::string(name) + "' (expected mnist, delay or adding)");
}

struct DataConfig {
  DataKind source = DataKind::mnist;
  PixelMode mode = PixelMode::seq112x7;
  std::string dir;              // MNIST directory; falls back to GAMMA_RNN_DATA
  std::size_t train_limit = 0;  // 0 = whole split
  std::size_t test_limit = 0;
  // Synthetic tasks.
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  std::size_t length = 20;
  std::size_t lag = 3;
};

/// Everything needed to reproduce a run.
struct RunConfig {
  ModelSpec model;
  DataConfig data;
  TrainConfig train;
  std::string out_dir = "run";
  bool record_wall_time = false;

  std::uint64_t seed() const { return train.seed; }

  void validate() const {
    model.validate();
    if (train.batch == 0) throw ConfigError("train.batch must be positive");
    if (!(train.optimizer.lr > 0.0)) throw ConfigError("train.lr must be positive");
    if (train.optimizer.name != "adam" && train.optimizer.name != "sgd") {
      throw ConfigError("train.optimizer must be adam or sgd");
    }
    if (train.clip < 0.0) throw ConfigError("train.clip must be >= 0");
    if (data.source == DataKind::mnist) {
      const PixelLayout l = layout(data.mode);
      if (model.input != l.width) {
        throw ConfigError("model.input " + std::to_string(model.input) + " does not match " +
                          std::string(to_string(data.mode)) + " step width " + std::to_string(l.width));
      }
    }
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json model = {{"kind", to_string(c.model.kind)},
                          {"input", c.model.input},
                          {"hidden", c.model.hidden},
                          {"layers", c.model.layers},
                          {"classes", c.model.classes}};
  if (c.model.kind == CellKind::gamma_lstm) {
    model["memory_order"] = c.model.order;
    model["readout_lag"] = c.model.readout_lag;
    model["shared_forget"] = c.model.shared_forget;
  }
  return {{"model", model},
          {"data",
           {{"source", to_string(c.data.source)},
            {"mode", to_string(c.data.mode)},
            {"dir", c.data.dir},
            {"train_limit", c.data.train_limit},
            {"test_limit", c.data.test_limit},
            {"n_train", c.data.n_train},
            {"n_test", c.data.n_test},
            {"length", c.data.length},
            {"lag", c.data.lag}}},
          {"train",
           {{"optimizer", c.train.optimizer.name},
            {"lr", c.train.optimizer.lr},
            {"beta1", c.train.optimizer.beta1},
            {"beta2", c.train.optimizer.beta2},
            {"eps", c.train.optimizer.eps},
            {"batch", c.train.batch},
            {"clip", c.train.clip},
            {"epochs", c.train.epochs},
            {"log_every", c.train.log_every}}},
          {"seed", c.train.seed},
          {"output", {{"dir", c.out_dir}, {"wall_time", c.record_wall_time}}}};
}

namespace detail {

template <typename T>
void read_field(const nlohmann::json& obj, const char* key, T& out, const std::string& path) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field " + path + "." + key + " has the wrong type: " + obj.at(key).dump());
  }
}

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<std::string_view> known,
                           const std::string& path) {
  if (!obj.is_object()) throw ConfigError("config section " + path + " must be an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (std::string_view k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError("unknown config key " + (path.empty() ? "" : path + ".") + item.key());
  }
}

}  // namespace detail

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::reject_unknown(j, {"model", "data", "train", "seed", "output"}, "");
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::reject_unknown(m, {"kind", "input", "hidden", "layers", "memory_order", "classes", "readout_lag", "shared_forget"},
                           "model");
    std::string kind = std::string(to_string(c.model.kind));
    detail::read_field(m, "kind", kind, "model");
    c.model.kind = parse_cell_kind(kind);
    detail::read_field(m, "input", c.model.input, "model");
    detail::read_field(m, "hidden", c.model.hidden, "model");
    detail::read_field(m, "layers", c.model.layers, "model");
    detail::read_field(m, "classes", c.model.classes, "model");
    c.model.order = c.model.kind == CellKind::gamma_lstm ? 3 : 0;
    detail::read_field(m, "memory_order", c.model.order, "model");
    detail::read_field(m, "readout_lag", c.model.readout_lag, "model");
    detail::read_field(m, "shared_forget", c.model.shared_forget, "model");
    if (c.model.kind != CellKind::gamma_lstm && c.model.order != 0) {
      throw ConfigError("model.memory_order applies only to gamma_lstm");
    }
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::reject_unknown(d, {"source", "mode", "dir", "train_limit", "test_limit", "n_train", "n_test", "length", "lag"},
                           "data");
    std::string source = std::string(to_string(c.data.source));
    std::string mode = std::string(to_string(c.data.mode));
    detail::read_field(d, "source", source, "data");
    detail::read_field(d, "mode", mode, "data");
    c.data.source = parse_data_kind(source);
    c.data.mode = parse_pixel_mode(mode);
    detail::read_field(d, "dir", c.data.dir, "data");
    detail::read_field(d, "train_limit", c.data.train_limit, "data");
    detail::read_field(d, "test_limit", c.data.test_limit, "data");
    detail::read_field(d, "n_train", c.data.n_train, "data");
    detail::read_field(d, "n_test", c.data.n_test, "data");
    detail::read_field(d, "length", c.data.length, "data");
    detail::read_field(d, "lag", c.data.lag, "data");
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown(t, {"optimizer", "lr", "beta1", "beta2", "eps", "batch", "clip", "epochs", "log_every"}, "train");
    detail::read_field(t, "optimizer", c.train.optimizer.name, "train");
    detail::read_field(t, "lr", c.train.optimizer.lr, "train");
    detail::read_field(t, "beta1", c.train.optimizer.beta1, "train");
    detail::read_field(t, "beta2", c.train.optimizer.beta2, "train");
    detail::read_field(t, "eps", c.train.optimizer.eps, "train");
    detail::read_field(t, "batch", c.train.batch, "train");
    detail::read_field(t, "clip", c.train.clip, "train");
    detail::read_field(t, "epochs", c.train.epochs, "train");
    detail::read_field(t, "log_every", c.train.log_every, "train");
  }
  detail::read_field(j, "seed", c.train.seed, "");
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::reject_unknown(o, {"dir", "wall_time"}, "output");
    detail::read_field(o, "dir", c.out_dir, "output");
    detail::read_field(o, "wall_time", c.record_wall_time, "output");
  }
  c.validate();
  return c;
}

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
/// possible (numbers, booleans, quoted strings) and taken as a bare string
/// otherwise.
inline void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not KEY=VALUE");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace gamma_rnn
