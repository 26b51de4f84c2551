// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "qrnn/builder.hpp"

namespace qrnn {

// Direct-loop LSTM oracles, no graph machinery. h0 = C0 = 0.

// 64-bit float gate/state equations. x_seq: (seq, input) row-major; returns
// h_seq (seq, hidden).
std::vector<std::vector<double>> reference_lstm_float(
    const LSTMWeights& w, const std::vector<std::vector<double>>& x_seq);

// Quantized oracle: applies quant_fused at each of the 11 slots in the same
// order and with the same operand layout as the built graph, so it matches
// execute(build_qcdq_lstm(...)) bit-exactly. x_seq holds io-grid integer
// codes; the returned h_seq holds dequantized hidden values.
std::vector<std::vector<double>> reference_quantized_lstm(
    const LSTMQuantConfig& cfg, const LSTMWeights& w,
    const std::vector<std::vector<double>>& x_seq);

}  // namespace qrnn
