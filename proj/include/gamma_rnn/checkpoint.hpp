// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gamma_rnn/errors.hpp"
#include "gamma_rnn/model.hpp"
#include "gamma_rnn/tensor.hpp"

namespace gamma_rnn {

// Checkpoint layout:
//
//   bytes 0..7    magic "GRNNCKPT"
//   bytes 8..15   header length N, unsigned 64-bit little-endian
//   next N bytes  UTF-8 JSON header
//   remainder     tensor data, IEEE-754 binary64 little-endian, row-major
//
// Header:
//   {"format": "gamma_rnn.checkpoint", "version": 1, "dtype": "float64",
//    "byte_order": "little", "config": {...},
//    "tensors": [{"name": ..., "shape": [...], "offset": ..., "nbytes": ...}, ...]}
//
// Offsets are relative to the first byte after the header.

inline constexpr char kCheckpointMagic[8] = {'G', 'R', 'N', 'N', 'C', 'K', 'P', 'T'};

struct Checkpoint {
  nlohmann::json config;
  std::vector<NamedTensor> tensors;
};

namespace detail {

inline void put_u64_le(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header = {{"format", "gamma_rnn.checkpoint"},
                           {"version", 1},
                           {"dtype", "float64"},
                           {"byte_order", "little"},
                           {"config", ckpt.config},
                           {"tensors", nlohmann::json::array()}};
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    const std::uint64_t nbytes = 8 * t.value.size();
    header["tensors"].push_back({{"name", t.name}, {"shape", t.value.shape()}, {"offset", offset}, {"nbytes", nbytes}});
    offset += nbytes;
  }
  const std::string text = header.dump();
  std::vector<unsigned char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  detail::put_u64_le(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : ckpt.tensors) {
    for (double v : t.value.data()) detail::put_u64_le(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw FormatError("checkpoint: bad magic at offset 0");
  }
  const std::uint64_t header_len = detail::get_u64_le(bytes.data() + 8);
  if (header_len > bytes.size() - 16) throw FormatError("checkpoint: header truncated at offset 16");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (header.value("format", "") != "gamma_rnn.checkpoint" || header.value("version", 0) != 1) {
    throw FormatError("checkpoint: unsupported format or version");
  }
  const std::size_t blob = 16 + header_len;
  Checkpoint ckpt{header.value("config", nlohmann::json::object()), {}};
  for (const auto& entry : header.at("tensors")) {
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
    const std::string name = entry.at("name").get<std::string>();
    if (shape.empty() || nbytes != 8 * shape_size(shape)) {
      throw FormatError("checkpoint: tensor '" + name + "' byte count does not match its shape");
    }
    if (offset > bytes.size() - blob || nbytes > bytes.size() - blob - offset) {
      throw FormatError("checkpoint: tensor '" + name + "' truncated at offset " + std::to_string(blob + offset));
    }
    std::vector<double> data(nbytes / 8);
    for (std::size_t i = 0; i < data.size(); ++i) {
      data[i] = std::bit_cast<double>(detail::get_u64_le(bytes.data() + blob + offset + 8 * i));
    }
    ckpt.tensors.push_back({name, Tensor(shape, std::move(data))});
  }
  return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace gamma_rnn
