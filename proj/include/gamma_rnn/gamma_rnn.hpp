// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gamma_rnn/autodiff.hpp"
#include "gamma_rnn/cells.hpp"
#include "gamma_rnn/checkpoint.hpp"
#include "gamma_rnn/config.hpp"
#include "gamma_rnn/data.hpp"
#include "gamma_rnn/errors.hpp"
#include "gamma_rnn/gamma_memory.hpp"
#include "gamma_rnn/gradcheck.hpp"
#include "gamma_rnn/model.hpp"
#include "gamma_rnn/rng.hpp"
#include "gamma_rnn/tensor.hpp"
#include "gamma_rnn/train.hpp"
