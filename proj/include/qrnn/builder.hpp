// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qrnn/graph.hpp"
#include "qrnn/quant.hpp"

namespace qrnn {

// The 11 internal activation-quantizer slots of the quantized LSTM layer:
// four pre-activation gate accumulators, four gate activations, the cell
// state, tanh of the cell state, and the hidden state. The hidden-state
// quantizer doubles as the io quantizer: the input sequence is expected as
// integer codes on the same grid, and the recurrent feedback stays
// dtype-stable.
inline const std::array<const char*, 11>& lstm_quant_slots() {
  static const std::array<const char*, 11> slots = {
      "acc_f",      "acc_i", "acc_c",     "acc_o",     "sig_f", "sig_i",
      "sig_o",      "tanh_c", "cell_state", "cell_tanh", "hidden_state"};
  return slots;
}

struct LSTMQuantConfig {
  int input_size = 0;
  int hidden_size = 0;
  int seq_len = 0;
  QuantParams weight_qp;
  std::map<std::string, QuantParams> act_qps;

  const QuantParams& qp(const std::string& slot) const;
};

// Throws ConfigError on missing slots or invalid dimensions.
void check_lstm_config(const LSTMQuantConfig& cfg);

// W8A6 preset: 8-bit weights, 6-bit activations, power-of-two scales chosen
// so the two branches of the cell-state update carry equal scale products
// (the condition under which the elementwise add streamlines to integers).
LSTMQuantConfig lstm_w8a6_config(int input_size, int hidden_size, int seq_len);

struct LSTMWeights {
  // Gate order f, i, c, o. W_*: hidden x input; U_*: hidden x hidden;
  // b_*: hidden.
  Tensor W_f, W_i, W_c, W_o;
  Tensor U_f, U_i, U_c, U_o;
  Tensor b_f, b_i, b_c, b_o;
};

LSTMWeights random_lstm_weights(int input_size, int hidden_size,
                                std::uint64_t seed);

// Projects every matrix/vector onto the weight quantization grid via
// quant_fused. W and U of each gate share one symmetric per-gate scale
// (max|w| / qmax over the stacked pair), matching the combined-matmul layout
// of the built graph; biases get their own per-tensor scale. All-zero tensors
// keep their values, set scale 1 and emit a DegenerateTensor diagnostic.
LSTMWeights quantize_weights(const LSTMWeights& w, const QuantParams& qp,
                             std::vector<std::string>* diagnostics = nullptr);

// Per-gate combined matrix [W^T over U^T] as integer codes with one symmetric
// scale, plus the float bias. Shared by the graph builder and the direct-loop
// oracle so both sides run identical arithmetic. Gate order f, i, c, o.
struct GateQuant {
  Tensor codes;  // (input+hidden) x hidden, weight dtype
  double scale;
  Tensor bias;  // 1 x hidden, float
};
std::array<GateQuant, 4> lstm_gate_quant(const LSTMQuantConfig& cfg,
                                         const LSTMWeights& weights);

// Builds the Scan-based QCDQ LSTM graph. The body implements the gate and
// state equations with a QCDQ triple at each of the 11 quantization points;
// the state-boundary quantizers are split across the recurrence (quantize at
// body exit, dequantize at body entry). Graph input: integer codes of shape
// (seq_len, input_size) on the io grid; graph output: the dequantized hidden
// state sequence (seq_len, hidden_size).
Graph build_qcdq_lstm(const LSTMQuantConfig& cfg, const LSTMWeights& weights);

// Float LSTM graph with the same Scan structure and no quantizers.
Graph build_float_lstm(int input_size, int hidden_size, int seq_len,
                       const LSTMWeights& weights);

// Unrolls a Scan graph into seq_len chained copies of the body. Used as an
// oracle for the Scan interpreter.
Graph unroll_scan(const Graph& g);

struct ConvLSTMConfig {
  int in_rows = 100, in_cols = 40;
  std::array<int, 3> block1_filters = {64, 32, 32};
  std::array<int, 3> block2_filters = {64, 16, 4};
  int kernel = 3;
  int block_stride = 2;  // first layer of each block
  int lstm_input = 40, lstm_hidden = 64, lstm_seq = 25;
  int dense1 = 256, dense2 = 3;
  QuantParams weight_qp;
  QuantParams act_qp;    // conv/dense activation quantizer
  QuantParams input_qp;  // quantized model input
};

ConvLSTMConfig convlstm_w8a6_config();

// Conv blocks -> LSTM -> dense head, W8A6 throughout. Weights generated from
// the seed. Throws ShapeChainError when configured shapes do not chain.
Graph build_convlstm(const ConvLSTMConfig& cfg, std::uint64_t seed);

// Each BatchNorm becomes per-channel Mul(s) + Add(b), s = gamma/sqrt(var+eps),
// b = beta - mean*s. Exact equivalence.
PassResult fold_batchnorm(const Graph& g);

// JSON config loading for the CLI ("model": "lstm" | "convlstm").
LSTMQuantConfig lstm_config_from_json(const std::string& text);
ConvLSTMConfig convlstm_config_from_json(const std::string& text);

}  // namespace qrnn
