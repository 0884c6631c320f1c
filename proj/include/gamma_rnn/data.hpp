// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "gamma_rnn/errors.hpp"
#include "gamma_rnn/rng.hpp"
#include "gamma_rnn/tensor.hpp"

namespace gamma_rnn {

/// One labelled sequence; inputs is [T x input_size], row t being step t.
struct SequenceExample {
  Tensor inputs;
  std::size_t label = 0;

  std::size_t length() const { return inputs.rows(); }
  std::size_t width() const { return inputs.cols(); }
};

struct DataSource {
  std::vector<SequenceExample> train;
  std::vector<SequenceExample> test;
  std::size_t length = 0;
  std::size_t input_size = 0;
  std::size_t classes = 0;
};

// ---------------------------------------------------------------------------
// IDX files (MNIST).

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major

  std::span<const std::uint8_t> image(std::size_t i) const {
    return std::span<const std::uint8_t>(pixels).subspan(i * rows * cols, rows * cols);
  }
};

struct MnistSplit {
  IdxImages images;
  std::vector<std::uint8_t> labels;
};

namespace detail {

inline std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& packed, const std::string& what) {
  z_stream zs{};
  // 16 + MAX_WBITS: expect a gzip wrapper.
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw FormatError(what + ": zlib init failed");
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  zs.next_in = const_cast<Bytef*>(packed.data());
  zs.avail_in = static_cast<uInt>(packed.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      const auto at = zs.total_in;
      inflateEnd(&zs);
      throw FormatError(what + ": corrupt gzip stream near compressed offset " + std::to_string(at));
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc != Z_STREAM_END && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw FormatError(what + ": truncated gzip stream at decompressed offset " + std::to_string(out.size()));
    }
  }
  inflateEnd(&zs);
  return out;
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::string& what) {
  if (bytes.size() < offset + 4) {
    throw FormatError(what + ": truncated header at offset " + std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace detail

/// Reads a file, inflating it when it starts with the gzip signature 1f 8b.
inline std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return detail::gunzip(bytes, path.string());
  return bytes;
}

inline IdxImages parse_idx_images(const std::vector<std::uint8_t>& bytes, const std::string& what = "images") {
  const std::uint32_t magic = detail::read_be32(bytes, 0, what);
  if (magic != kIdxImagesMagic) {
    throw FormatError(what + ": bad magic at offset 0 (expected 0x00000803)");
  }
  IdxImages img;
  img.count = detail::read_be32(bytes, 4, what);
  img.rows = detail::read_be32(bytes, 8, what);
  img.cols = detail::read_be32(bytes, 12, what);
  const std::size_t need = img.count * img.rows * img.cols;
  if (bytes.size() - 16 < need) {
    throw FormatError(what + ": truncated pixel data at offset " + std::to_string(bytes.size()) + ", expected " +
                      std::to_string(16 + need) + " bytes");
  }
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return img;
}

inline std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes,
                                                  const std::string& what = "labels") {
  const std::uint32_t magic = detail::read_be32(bytes, 0, what);
  if (magic != kIdxLabelsMagic) {
    throw FormatError(what + ": bad magic at offset 0 (expected 0x00000801)");
  }
  const std::size_t count = detail::read_be32(bytes, 4, what);
  if (bytes.size() - 8 < count) {
    throw FormatError(what + ": truncated label data at offset " + std::to_string(bytes.size()) + ", expected " +
                      std::to_string(8 + count) + " bytes");
  }
  return std::vector<std::uint8_t>(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count));
}

inline MnistSplit load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  MnistSplit split{parse_idx_images(read_maybe_gzip(images_path), images_path.string()),
                   parse_idx_labels(read_maybe_gzip(labels_path), labels_path.string())};
  if (split.images.count != split.labels.size()) {
    throw FormatError("image count " + std::to_string(split.images.count) + " in " + images_path.string() +
                      " does not match label count " + std::to_string(split.labels.size()) + " in " +
                      labels_path.string() + " (header offset 4)");
  }
  return split;
}

// ---------------------------------------------------------------------------
// Pixel sequences.

enum class PixelMode { seq784x1, seq112x7, seq28x28 };

struct PixelLayout {
  std::size_t steps, width;
};

inline PixelLayout layout(PixelMode mode) {
  switch (mode) {
    case PixelMode::seq784x1: return {784, 1};
    case PixelMode::seq112x7: return {112, 7};
    case PixelMode::seq28x28: return {28, 28};
  }
  throw ConfigError("invalid pixel mode");
}

inline std::string_view to_string(PixelMode mode) {
  switch (mode) {
    case PixelMode::seq784x1: return "seq784x1";
    case PixelMode::seq112x7: return "seq112x7";
    case PixelMode::seq28x28: return "seq28x28";
  }
  return "?";
}

inline PixelMode parse_pixel_mode(std::string_view name) {
  if (name == "seq784x1") return PixelMode::seq784x1;
  if (name == "seq112x7") return PixelMode::seq112x7;
  if (name == "seq28x28") return PixelMode::seq28x28;
  throw ConfigError("unknown pixel mode '" + std::string(name) + "' (expected seq784x1, seq112x7 or seq28x28)");
}

/// Scales a 28x28 image to [0, 1] by /255 and chunks the row-major flat
/// vector into steps: step t holds flat pixels [t*width, (t+1)*width).
inline Tensor reshape_pixels(std::span<const std::uint8_t> image, PixelMode mode) {
  if (image.size() != 784) {
    throw DimensionError("reshape_pixels: expected 784 pixels, got " + std::to_string(image.size()));
  }
  const PixelLayout l = layout(mode);
  Tensor out({l.steps, l.width});
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = static_cast<double>(image[i]) / 255.0;
  return out;
}

inline std::vector<SequenceExample> to_examples(const MnistSplit& split, PixelMode mode, std::size_t limit) {
  if (split.images.rows != 28 || split.images.cols != 28) {
    throw FormatError("expected 28x28 images, got " + std::to_string(split.images.rows) + "x" +
                      std::to_string(split.images.cols));
  }
  const std::size_t n = limit == 0 ? split.images.count : std::min(limit, split.images.count);
  std::vector<SequenceExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (split.labels[i] > 9) throw FormatError("label " + std::to_string(split.labels[i]) + " at index " + std::to_string(i) + " is not a digit");
    out.push_back({reshape_pixels(split.images.image(i), mode), split.labels[i]});
  }
  return out;
}

/// Finds the IDX file for `stem` (e.g. "train-images-idx3-ubyte") with or without ".gz".
inline std::filesystem::path find_idx(const std::filesystem::path& dir, const std::string& stem) {
  for (const char* suffix : {"", ".gz"}) {
    auto p = dir / (stem + suffix);
    if (std::filesystem::exists(p)) return p;
  }
  throw FormatError("no " + stem + "[.gz] in " + dir.string());
}

/// Data directory from an explicit flag, else $GAMMA_RNN_DATA, else empty.
inline std::filesystem::path resolve_data_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("GAMMA_RNN_DATA"); env != nullptr && *env != '\0') return env;
  return {};
}

/// First train_limit / test_limit examples of each split (0 = all).
inline DataSource load_mnist(const std::filesystem::path& dir, PixelMode mode, std::size_t train_limit,
                             std::size_t test_limit) {
  if (dir.empty()) throw FormatError("no MNIST directory given (use --data or GAMMA_RNN_DATA)");
  const PixelLayout l = layout(mode);
  DataSource ds;
  ds.length = l.steps;
  ds.input_size = l.width;
  ds.classes = 10;
  ds.train = to_examples(load_idx(find_idx(dir, "train-images-idx3-ubyte"), find_idx(dir, "train-labels-idx1-ubyte")),
                         mode, train_limit);
  ds.test = to_examples(load_idx(find_idx(dir, "t10k-images-idx3-ubyte"), find_idx(dir, "t10k-labels-idx1-ubyte")),
                        mode, test_limit);
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic tasks. Train and test come from one stream with duplicate inputs
// rejected, so the splits never share a sequence.

namespace detail {

template <typename Gen>
DataSource generate_disjoint(std::size_t n_train, std::size_t n_test, Gen&& gen) {
  DataSource ds;
  std::set<std::vector<double>> seen;
  const std::size_t total = n_train + n_test;
  std::size_t attempts = 0;
  while (ds.train.size() + ds.test.size() < total) {
    if (++attempts > 64 * total + 1024) {
      throw ConfigError("synthetic task: cannot draw " + std::to_string(total) + " distinct sequences");
    }
    SequenceExample ex = gen();
    if (!seen.insert(ex.inputs.values()).second) continue;
    (ds.train.size() < n_train ? ds.train : ds.test).push_back(std::move(ex));
  }
  return ds;
}

}  // namespace detail

/// Streams of +-1; the label is 1 when the value `lag` steps before the last
/// step (0-based index T-1-lag) is positive, else 0.
inline DataSource make_delay_task(std::size_t n_train, std::size_t n_test, std::size_t length, std::size_t lag,
                                  std::uint64_t seed) {
  if (length == 0 || lag >= length) throw ConfigError("delay task needs 0 <= lag < length");
  Rng rng(seed);
  DataSource ds = detail::generate_disjoint(n_train, n_test, [&] {
    SequenceExample ex{Tensor({length, 1}), 0};
    for (std::size_t t = 0; t < length; ++t) ex.inputs[t] = rng.sign();
    ex.label = ex.inputs[length - 1 - lag] > 0.0 ? 1 : 0;
    return ex;
  });
  ds.length = length;
  ds.input_size = 1;
  ds.classes = 2;
  return ds;
}

/// Adding problem: channel 0 is uniform [0, 1), channel 1 marks one step in
/// each half of the sequence. The label is 1 when the two marked values sum
/// above 1.
inline DataSource make_adding_task(std::size_t n_train, std::size_t n_test, std::size_t length, std::uint64_t seed) {
  if (length < 2) throw ConfigError("adding task needs length >= 2");
  Rng rng(seed);
  DataSource ds = detail::generate_disjoint(n_train, n_test, [&] {
    SequenceExample ex{Tensor({length, 2}), 0};
    for (std::size_t t = 0; t < length; ++t) ex.inputs.at(t, 0) = rng.uniform01();
    const std::size_t half = length / 2;
    const std::size_t first = rng.index(half);
    const std::size_t second = half + rng.index(length - half);
    ex.inputs.at(first, 1) = 1.0;
    ex.inputs.at(second, 1) = 1.0;
    ex.label = ex.inputs.at(first, 0) + ex.inputs.at(second, 0) > 1.0 ? 1 : 0;
    return ex;
  });
  ds.length = length;
  ds.input_size = 2;
  ds.classes = 2;
  return ds;
}

}  // namespace gamma_rnn
