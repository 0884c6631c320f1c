// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace gamma_rnn {

/// Operand shapes do not fit the operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid model or run configuration (e.g. memory order 0).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an API precondition that is not about shapes.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed or truncated input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or a failed numerical check.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gamma_rnn
