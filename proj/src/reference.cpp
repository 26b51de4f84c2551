// SPDX-License-Identifier: Apache-2.0
#include "qrnn/reference.hpp"

#include <cmath>

namespace qrnn {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<std::vector<double>> reference_lstm_float(
    const LSTMWeights& w, const std::vector<std::vector<double>>& x_seq) {
  std::int64_t H = w.W_f.shape[0];
  std::int64_t I = w.W_f.shape[1];
  for (const auto& x : x_seq)
    if (std::int64_t(x.size()) != I)
      throw ShapeMismatch("reference_lstm_float: x row width != input size");

  const Tensor* Ws[4] = {&w.W_f, &w.W_i, &w.W_c, &w.W_o};
  const Tensor* Us[4] = {&w.U_f, &w.U_i, &w.U_c, &w.U_o};
  const Tensor* bs[4] = {&w.b_f, &w.b_i, &w.b_c, &w.b_o};

  std::vector<double> h(H, 0.0), c(H, 0.0);
  std::vector<std::vector<double>> h_seq;
  std::vector<double> gate[4];
  for (auto& gv : gate) gv.resize(H);

  for (const auto& x : x_seq) {
    for (int gi = 0; gi < 4; ++gi) {
      for (std::int64_t j = 0; j < H; ++j) {
        double acc = 0.0;
        for (std::int64_t k = 0; k < I; ++k)
          acc += x[k] * Ws[gi]->values[j * I + k];
        for (std::int64_t k = 0; k < H; ++k)
          acc += h[k] * Us[gi]->values[j * H + k];
        acc += bs[gi]->values[j];
        gate[gi][j] = gi == 2 ? std::tanh(acc) : sigmoid(acc);
      }
    }
    std::vector<double> h_t(H);
    for (std::int64_t j = 0; j < H; ++j) {
      c[j] = gate[0][j] * c[j] + gate[1][j] * gate[2][j];
      h_t[j] = gate[3][j] * std::tanh(c[j]);
    }
    h = h_t;
    h_seq.push_back(std::move(h_t));
  }
  return h_seq;
}

std::vector<std::vector<double>> reference_quantized_lstm(
    const LSTMQuantConfig& cfg, const LSTMWeights& w,
    const std::vector<std::vector<double>>& x_seq) {
  check_lstm_config(cfg);
  std::int64_t H = cfg.hidden_size, I = cfg.input_size;
  for (const auto& x : x_seq)
    if (std::int64_t(x.size()) != I)
      throw ShapeMismatch("reference_quantized_lstm: x row width != input size");

  auto gates = lstm_gate_quant(cfg, w);
  const QuantParams& io = cfg.qp("hidden_state");
  const QuantParams& cell = cfg.qp("cell_state");
  const QuantParams* acc_qp[4] = {&cfg.qp("acc_f"), &cfg.qp("acc_i"),
                                  &cfg.qp("acc_c"), &cfg.qp("acc_o")};
  const QuantParams* act_qp[4] = {&cfg.qp("sig_f"), &cfg.qp("sig_i"),
                                  &cfg.qp("tanh_c"), &cfg.qp("sig_o")};
  const QuantParams& ct_qp = cfg.qp("cell_tanh");

  // States are integer codes, as in the built Scan body; every float step
  // mirrors the graph's node-by-node arithmetic.
  std::vector<double> h_q(H, 0.0), c_q(H, 0.0);
  std::vector<std::vector<double>> h_seq;
  std::vector<double> xh_f(I + H);
  std::vector<double> gate[4];
  for (auto& gv : gate) gv.resize(H);

  for (const auto& x : x_seq) {
    for (std::int64_t k = 0; k < I; ++k)
      xh_f[k] = dequantize_value(x[k], io);
    for (std::int64_t k = 0; k < H; ++k)
      xh_f[I + k] = dequantize_value(h_q[k], io);

    for (int gi = 0; gi < 4; ++gi) {
      const GateQuant& gw = gates[gi];
      for (std::int64_t j = 0; j < H; ++j) {
        double dot = 0.0;
        for (std::int64_t k = 0; k < I + H; ++k)
          dot += xh_f[k] * gw.codes.values[k * H + j];
        double pre = dot * gw.scale + gw.bias.values[j];
        double acc = quant_fused_value(pre, *acc_qp[gi]);
        double a = gi == 2 ? std::tanh(acc) : sigmoid(acc);
        gate[gi][j] = quant_fused_value(a, *act_qp[gi]);
      }
    }

    std::vector<double> h_row(H);
    for (std::int64_t j = 0; j < H; ++j) {
      double c_prev_f = dequantize_value(c_q[j], cell);
      double c_raw = gate[0][j] * c_prev_f + gate[1][j] * gate[2][j];
      c_q[j] = quantize_value(c_raw, cell);
      double ct = quant_fused_value(std::tanh(dequantize_value(c_q[j], cell)),
                                    ct_qp);
      double h_raw = gate[3][j] * ct;
      h_q[j] = quantize_value(h_raw, io);
      h_row[j] = dequantize_value(h_q[j], io);
    }
    h_seq.push_back(std::move(h_row));
  }
  return h_seq;
}

}  // namespace qrnn
