// SPDX-License-Identifier: Apache-2.0
#include "qrnn/builder.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "json.hpp"
#include "qrnn/infer.hpp"

namespace qrnn {

using nlohmann::json;

const QuantParams& LSTMQuantConfig::qp(const std::string& slot) const {
  auto it = act_qps.find(slot);
  if (it == act_qps.end()) throw ConfigError("missing quantizer slot " + slot);
  return it->second;
}

void check_lstm_config(const LSTMQuantConfig& cfg) {
  if (cfg.input_size < 1 || cfg.hidden_size < 1 || cfg.seq_len < 1)
    throw ConfigError("input_size, hidden_size and seq_len must be >= 1");
  for (const char* slot : lstm_quant_slots()) {
    auto it = cfg.act_qps.find(slot);
    if (it == cfg.act_qps.end())
      throw ConfigError(std::string("missing quantizer slot ") + slot);
    check_quant_params(it->second);
  }
  check_quant_params(cfg.weight_qp);
}

LSTMQuantConfig lstm_w8a6_config(int input_size, int hidden_size, int seq_len) {
  LSTMQuantConfig cfg;
  cfg.input_size = input_size;
  cfg.hidden_size = hidden_size;
  cfg.seq_len = seq_len;
  cfg.weight_qp = QuantParams{1.0, 0, 8, true, false};

  auto sym = [](double scale, int bits) {
    return QuantParams{scale, 0, bits, true, false};
  };
  auto uns = [](double scale, int bits) {
    return QuantParams{scale, 0, bits, false, false};
  };
  // Gate accumulators span roughly +-8; sigmoid outputs live in [0,1], tanh
  // in (-1,1). The cell state gets 8 bits over +-4 with the same step as the
  // tanh quantizers, which keeps the scale products of the two cell-update
  // branches equal -- the condition for the elementwise add to streamline to
  // integer form. The sigmoid step 1/63 maps 1.0 onto the top code and, with
  // the odd denominator, keeps rescaled cell thresholds off exact integers,
  // so integer products never land on a rounding tie.
  for (const char* g : {"acc_f", "acc_i", "acc_c", "acc_o"})
    cfg.act_qps[g] = sym(0.25, 6);
  for (const char* g : {"sig_f", "sig_i", "sig_o"})
    cfg.act_qps[g] = uns(1.0 / 63.0, 6);
  cfg.act_qps["tanh_c"] = sym(1.0 / 32.0, 6);
  cfg.act_qps["cell_tanh"] = sym(1.0 / 32.0, 6);
  cfg.act_qps["cell_state"] = sym(1.0 / 32.0, 8);
  cfg.act_qps["hidden_state"] = sym(1.0 / 32.0, 6);
  return cfg;
}

LSTMWeights random_lstm_weights(int input_size, int hidden_size,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double r = 1.0 / std::sqrt(double(input_size + hidden_size));
  std::uniform_real_distribution<double> wd(-r, r);
  std::uniform_real_distribution<double> bd(-0.1, 0.1);
  auto mat = [&](int rows, int cols) {
    Tensor t({rows, cols}, DataType::f64());
    for (auto& v : t.values) v = wd(rng);
    return t;
  };
  auto vec = [&](int n) {
    Tensor t({1, n}, DataType::f64());
    for (auto& v : t.values) v = bd(rng);
    return t;
  };
  LSTMWeights w;
  w.W_f = mat(hidden_size, input_size);
  w.W_i = mat(hidden_size, input_size);
  w.W_c = mat(hidden_size, input_size);
  w.W_o = mat(hidden_size, input_size);
  w.U_f = mat(hidden_size, hidden_size);
  w.U_i = mat(hidden_size, hidden_size);
  w.U_c = mat(hidden_size, hidden_size);
  w.U_o = mat(hidden_size, hidden_size);
  w.b_f = vec(hidden_size);
  w.b_i = vec(hidden_size);
  w.b_c = vec(hidden_size);
  w.b_o = vec(hidden_size);
  return w;
}

namespace {

double max_abs(std::initializer_list<const Tensor*> ts) {
  double m = 0.0;
  for (const Tensor* t : ts)
    for (double v : t->values) m = std::max(m, std::fabs(v));
  return m;
}

GateQuant prepare_gate(const Tensor& W, const Tensor& U, const Tensor& b,
                         const QuantParams& qp,
                         std::vector<std::string>* diagnostics,
                         const std::string& gate) {
  std::int64_t H = W.shape[0], I = W.shape[1];
  double m = max_abs({&W, &U});
  double scale = m == 0.0 ? 1.0 : m / double(qp.qmax());
  if (m == 0.0 && diagnostics)
    diagnostics->push_back("DegenerateTensor: gate " + gate +
                           " weights are all zero; scale set to 1");
  QuantParams wqp = qp;
  wqp.scale = scale;

  Tensor codes({I + H, H}, wqp.dtype());
  for (std::int64_t r = 0; r < I; ++r)
    for (std::int64_t c = 0; c < H; ++c)
      codes.values[r * H + c] = quantize_value(W.values[c * I + r], wqp);
  for (std::int64_t r = 0; r < H; ++r)
    for (std::int64_t c = 0; c < H; ++c)
      codes.values[(I + r) * H + c] = quantize_value(U.values[c * H + r], wqp);
  return {std::move(codes), scale, b};
}

struct BodyNames {
  std::string h_in = "h_prev";
  std::string c_in = "c_prev";
  std::string x_in = "x_t";
};

Node simple_node(std::string op, std::string name,
                 std::vector<std::string> inputs,
                 std::vector<std::string> outputs) {
  Node n;
  n.op_type = std::move(op);
  n.name = std::move(name);
  n.inputs = std::move(inputs);
  n.outputs = std::move(outputs);
  return n;
}

void emit_qcdq(Graph& g, const std::string& base, const std::string& in,
               const std::string& out, const QuantParams& qp) {
  Node q = simple_node("QuantizeLinear", base + "_q", {in}, {base + "_qi"});
  set_quant_attrs(q, qp);
  Node c = simple_node("Clip", base + "_clip", {base + "_qi"}, {base + "_ci"});
  c.attributes["min"] = double(qp.qmin());
  c.attributes["max"] = double(qp.qmax());
  Node d = simple_node("DequantizeLinear", base + "_dq", {base + "_ci"}, {out});
  set_quant_attrs(d, qp);
  g.nodes.push_back(std::move(q));
  g.nodes.push_back(std::move(c));
  g.nodes.push_back(std::move(d));
}

// Quantize-to-codes half of a state-boundary quantizer (the dequantize half
// runs at the consumers).
void emit_quantize_clip(Graph& g, const std::string& base, const std::string& in,
                        const std::string& out, const QuantParams& qp) {
  Node q = simple_node("QuantizeLinear", base + "_q", {in}, {base + "_qi"});
  set_quant_attrs(q, qp);
  Node c = simple_node("Clip", base + "_clip", {base + "_qi"}, {out});
  c.attributes["min"] = double(qp.qmin());
  c.attributes["max"] = double(qp.qmax());
  g.nodes.push_back(std::move(q));
  g.nodes.push_back(std::move(c));
}

Graph build_lstm_body(const LSTMQuantConfig& cfg,
                      const std::array<GateQuant, 4>& gates) {
  std::int64_t I = cfg.input_size, H = cfg.hidden_size;
  const QuantParams& io = cfg.qp("hidden_state");
  const QuantParams& cell = cfg.qp("cell_state");

  Graph body;
  body.name = "lstm_step";
  BodyNames nm;
  body.inputs = {{nm.h_in, {1, H}, io.dtype()},
                 {nm.c_in, {1, H}, cell.dtype()},
                 {nm.x_in, {1, I}, io.dtype()}};

  Node concat = simple_node("Concat", "xh_concat", {nm.x_in, nm.h_in}, {"xh"});
  concat.attributes["axis"] = 1.0;
  body.nodes.push_back(std::move(concat));

  const char* gate_names[4] = {"f", "i", "c", "o"};
  const char* acc_slots[4] = {"acc_f", "acc_i", "acc_c", "acc_o"};
  const char* act_slots[4] = {"sig_f", "sig_i", "tanh_c", "sig_o"};
  // gate order in `gates`: f, i, c, o
  for (int gi = 0; gi < 4; ++gi) {
    std::string g = gate_names[gi];
    const GateQuant& gw = gates[gi];
    body.initializers["W_" + g] = gw.codes;
    body.initializers["ws_" + g] = Tensor::scalar(gw.scale);
    body.initializers["b_" + g] = gw.bias;

    Node dq = simple_node("DequantizeLinear", g + "_xh_dq", {"xh"},
                          {g + "_xh"});
    set_quant_attrs(dq, io);
    body.nodes.push_back(std::move(dq));
    body.nodes.push_back(
        simple_node("MatMul", g + "_mm", {g + "_xh", "W_" + g}, {g + "_mm_o"}));
    body.nodes.push_back(
        simple_node("Mul", g + "_ws", {g + "_mm_o", "ws_" + g}, {g + "_sc"}));
    body.nodes.push_back(
        simple_node("Add", g + "_bias", {g + "_sc", "b_" + g}, {g + "_pre"}));
    emit_qcdq(body, g + "_acc", g + "_pre", g + "_acc", cfg.qp(acc_slots[gi]));
    body.nodes.push_back(simple_node(gi == 2 ? "Tanh" : "Sigmoid", g + "_act",
                                     {g + "_acc"}, {g + "_act_o"}));
    emit_qcdq(body, g + "_gate", g + "_act_o", g + "_val",
              cfg.qp(act_slots[gi]));
  }

  // cell update: C_t = f . C_{t-1} + i . c~
  Node cdq = simple_node("DequantizeLinear", "cprev_dq", {nm.c_in},
                         {"c_prev_f"});
  set_quant_attrs(cdq, cell);
  body.nodes.push_back(std::move(cdq));
  body.nodes.push_back(
      simple_node("Mul", "mul_fc", {"f_val", "c_prev_f"}, {"fc"}));
  body.nodes.push_back(simple_node("Mul", "mul_ic", {"i_val", "c_val"}, {"ic"}));
  body.nodes.push_back(simple_node("Add", "cell_sum", {"fc", "ic"}, {"c_raw"}));
  emit_quantize_clip(body, "cell", "c_raw", "c_new", cell);

  Node ctdq = simple_node("DequantizeLinear", "cnew_dq", {"c_new"}, {"c_new_f"});
  set_quant_attrs(ctdq, cell);
  body.nodes.push_back(std::move(ctdq));
  body.nodes.push_back(simple_node("Tanh", "ct_tanh", {"c_new_f"}, {"ct_act"}));
  emit_qcdq(body, "ct", "ct_act", "ct_val", cfg.qp("cell_tanh"));
  body.nodes.push_back(
      simple_node("Mul", "mul_h", {"o_val", "ct_val"}, {"h_raw"}));
  emit_quantize_clip(body, "hidden", "h_raw", "h_new", io);

  body.outputs = {"h_new", "c_new", "h_new"};
  return body;
}



void check_weight_shapes(const LSTMQuantConfig& cfg, const LSTMWeights& w) {
  std::int64_t H = cfg.hidden_size, I = cfg.input_size;
  auto expect = [](const Tensor& t, std::int64_t r, std::int64_t c,
                   const char* what) {
    if (t.shape != std::vector<std::int64_t>{r, c})
      throw ConfigError(std::string("weight tensor ") + what +
                        " has the wrong shape");
  };
  expect(w.W_f, H, I, "W_f");
  expect(w.W_i, H, I, "W_i");
  expect(w.W_c, H, I, "W_c");
  expect(w.W_o, H, I, "W_o");
  expect(w.U_f, H, H, "U_f");
  expect(w.U_i, H, H, "U_i");
  expect(w.U_c, H, H, "U_c");
  expect(w.U_o, H, H, "U_o");
  expect(w.b_f, 1, H, "b_f");
  expect(w.b_i, 1, H, "b_i");
  expect(w.b_c, 1, H, "b_c");
  expect(w.b_o, 1, H, "b_o");
}

}  // namespace

std::array<GateQuant, 4> lstm_gate_quant(const LSTMQuantConfig& cfg,
                                         const LSTMWeights& w) {
  return {prepare_gate(w.W_f, w.U_f, w.b_f, cfg.weight_qp, nullptr, "f"),
          prepare_gate(w.W_i, w.U_i, w.b_i, cfg.weight_qp, nullptr, "i"),
          prepare_gate(w.W_c, w.U_c, w.b_c, cfg.weight_qp, nullptr, "c"),
          prepare_gate(w.W_o, w.U_o, w.b_o, cfg.weight_qp, nullptr, "o")};
}

Graph build_qcdq_lstm(const LSTMQuantConfig& cfg, const LSTMWeights& weights) {
  check_lstm_config(cfg);
  check_weight_shapes(cfg, weights);
  const QuantParams& io = cfg.qp("hidden_state");
  const QuantParams& cell = cfg.qp("cell_state");
  std::int64_t H = cfg.hidden_size, I = cfg.input_size, T = cfg.seq_len;

  auto gates = lstm_gate_quant(cfg, weights);
  Graph body = build_lstm_body(cfg, gates);

  Graph g;
  g.name = "qcdq_lstm";
  g.inputs = {{"x_seq", {T, I}, io.dtype()}};
  g.initializers["h0"] = Tensor({1, H}, io.dtype());
  g.initializers["c0"] = Tensor({1, H}, cell.dtype());

  Node scan = simple_node("Scan", "lstm_scan", {"h0", "c0", "x_seq"},
                          {"h_final", "c_final", "h_seq_q"});
  scan.attributes["body"] = std::make_shared<Graph>(std::move(body));
  scan.attributes["scan_input_count"] = 1.0;
  g.nodes.push_back(std::move(scan));

  Node dq = simple_node("DequantizeLinear", "out_dq", {"h_seq_q"}, {"h_seq"});
  set_quant_attrs(dq, io);
  g.nodes.push_back(std::move(dq));
  g.outputs = {"h_seq"};
  return g;
}

Graph build_float_lstm(int input_size, int hidden_size, int seq_len,
                       const LSTMWeights& weights) {
  std::int64_t I = input_size, H = hidden_size, T = seq_len;

  Graph body;
  body.name = "lstm_step_float";
  body.inputs = {{"h_prev", {1, H}, DataType::f64()},
                 {"c_prev", {1, H}, DataType::f64()},
                 {"x_t", {1, I}, DataType::f64()}};
  Node concat = simple_node("Concat", "xh_concat", {"x_t", "h_prev"}, {"xh"});
  concat.attributes["axis"] = 1.0;
  body.nodes.push_back(std::move(concat));

  const char* gate_names[4] = {"f", "i", "c", "o"};
  const Tensor* Ws[4] = {&weights.W_f, &weights.W_i, &weights.W_c, &weights.W_o};
  const Tensor* Us[4] = {&weights.U_f, &weights.U_i, &weights.U_c, &weights.U_o};
  const Tensor* bs[4] = {&weights.b_f, &weights.b_i, &weights.b_c, &weights.b_o};
  for (int gi = 0; gi < 4; ++gi) {
    std::string g = gate_names[gi];
    Tensor Wc({I + H, H}, DataType::f64());
    for (std::int64_t r = 0; r < I; ++r)
      for (std::int64_t c = 0; c < H; ++c)
        Wc.values[r * H + c] = Ws[gi]->values[c * I + r];
    for (std::int64_t r = 0; r < H; ++r)
      for (std::int64_t c = 0; c < H; ++c)
        Wc.values[(I + r) * H + c] = Us[gi]->values[c * H + r];
    body.initializers["W_" + g] = std::move(Wc);
    body.initializers["b_" + g] = *bs[gi];
    body.nodes.push_back(
        simple_node("MatMul", g + "_mm", {"xh", "W_" + g}, {g + "_mm_o"}));
    body.nodes.push_back(
        simple_node("Add", g + "_bias", {g + "_mm_o", "b_" + g}, {g + "_pre"}));
    body.nodes.push_back(simple_node(gi == 2 ? "Tanh" : "Sigmoid", g + "_act",
                                     {g + "_pre"}, {g + "_val"}));
  }
  body.nodes.push_back(
      simple_node("Mul", "mul_fc", {"f_val", "c_prev"}, {"fc"}));
  body.nodes.push_back(simple_node("Mul", "mul_ic", {"i_val", "c_val"}, {"ic"}));
  body.nodes.push_back(simple_node("Add", "cell_sum", {"fc", "ic"}, {"c_new"}));
  body.nodes.push_back(simple_node("Tanh", "ct_tanh", {"c_new"}, {"ct"}));
  body.nodes.push_back(simple_node("Mul", "mul_h", {"o_val", "ct"}, {"h_new"}));
  body.outputs = {"h_new", "c_new", "h_new"};

  Graph g;
  g.name = "float_lstm";
  g.inputs = {{"x_seq", {T, I}, DataType::f64()}};
  g.initializers["h0"] = Tensor({1, H}, DataType::f64());
  g.initializers["c0"] = Tensor({1, H}, DataType::f64());
  Node scan = simple_node("Scan", "lstm_scan", {"h0", "c0", "x_seq"},
                          {"h_final", "c_final", "h_seq"});
  scan.attributes["body"] = std::make_shared<Graph>(std::move(body));
  scan.attributes["scan_input_count"] = 1.0;
  g.nodes.push_back(std::move(scan));
  g.outputs = {"h_seq"};
  return g;
}

LSTMWeights quantize_weights(const LSTMWeights& w, const QuantParams& qp,
                             std::vector<std::string>* diagnostics) {
  check_quant_params(qp);
  LSTMWeights out = w;
  struct GateRef {
    Tensor* W;
    Tensor* U;
    Tensor* b;
    const char* name;
  };
  GateRef gates[4] = {{&out.W_f, &out.U_f, &out.b_f, "f"},
                      {&out.W_i, &out.U_i, &out.b_i, "i"},
                      {&out.W_c, &out.U_c, &out.b_c, "c"},
                      {&out.W_o, &out.U_o, &out.b_o, "o"}};
  for (auto& g : gates) {
    double m = max_abs({g.W, g.U});
    double scale = m == 0.0 ? 1.0 : m / double(qp.qmax());
    if (m == 0.0 && diagnostics)
      diagnostics->push_back(std::string("DegenerateTensor: gate ") + g.name +
                             " weights are all zero; scale set to 1");
    QuantParams wqp = qp;
    wqp.scale = scale;
    for (Tensor* t : {g.W, g.U})
      for (double& v : t->values) v = quant_fused_value(v, wqp);
    double mb = max_abs({g.b});
    QuantParams bqp = qp;
    bqp.scale = mb == 0.0 ? 1.0 : mb / double(qp.qmax());
    if (mb == 0.0 && diagnostics)
      diagnostics->push_back(std::string("DegenerateTensor: gate ") + g.name +
                             " bias is all zero; scale set to 1");
    for (double& v : g.b->values) v = quant_fused_value(v, bqp);
  }
  return out;
}

// ---------------------------------------------------------------------------
// unroll

Graph unroll_scan(const Graph& g) {
  Graph out;
  out.name = g.name + "_unrolled";
  out.outputs = g.outputs;
  out.initializers = g.initializers;
  out.value_info = {};

  const Node* scan = nullptr;
  for (const auto& n : g.nodes)
    if (n.op_type == "Scan") scan = &n;
  if (!scan) return g.clone();

  const Graph& body = *std::get<GraphPtr>(scan->attributes.at("body"));
  std::int64_t n_scan = std::llround(scan->attr_f("scan_input_count"));
  std::int64_t n_state = std::int64_t(body.inputs.size()) - n_scan;
  std::int64_t n_y = std::int64_t(body.outputs.size()) - n_state;

  // Sequence length from the scan input declaration.
  std::int64_t seq = -1;
  std::vector<std::int64_t> step_shape;
  DataType step_dtype = DataType::f64();
  for (const auto& gi : g.inputs) {
    if (gi.name == scan->inputs[n_state]) {
      seq = gi.shape.at(0);
      step_shape = gi.shape;
      step_shape[0] = 1;
      step_dtype = gi.dtype;
    }
  }
  if (seq < 1) throw ShapeChainError("cannot determine scan sequence length");
  if (n_scan != 1)
    throw ShapeChainError("unroll supports exactly one scan input");

  // Keep non-scan top-level inputs; the sequence becomes per-step inputs.
  for (const auto& gi : g.inputs)
    if (gi.name != scan->inputs[n_state]) out.inputs.push_back(gi);
  for (std::int64_t t = 0; t < seq; ++t)
    out.inputs.push_back(
        {"x_step_" + std::to_string(t), step_shape, step_dtype});

  for (const auto& [name, tv] : body.initializers) {
    if (out.initializers.count(name) && !(out.initializers.at(name) == tv))
      throw ShapeChainError("initializer name clash while unrolling: " + name);
    out.initializers[name] = tv;
  }

  std::vector<std::string> state_srcs(scan->inputs.begin(),
                                      scan->inputs.begin() + n_state);
  std::vector<std::vector<std::string>> per_step_y(n_y);
  std::set<std::string> init_names;
  for (const auto& [name, tv] : out.initializers) init_names.insert(name);

  for (std::int64_t t = 0; t < seq; ++t) {
    std::string pre = "s" + std::to_string(t) + "_";
    std::map<std::string, std::string> rename;
    for (std::int64_t i = 0; i < n_state; ++i)
      rename[body.inputs[i].name] = state_srcs[i];
    rename[body.inputs[n_state].name] = "x_step_" + std::to_string(t);
    auto mapped = [&](const std::string& name) {
      auto it = rename.find(name);
      if (it != rename.end()) return it->second;
      if (init_names.count(name)) return name;
      return pre + name;
    };
    for (const auto& n : body.nodes) {
      Node copy = n;
      copy.name = pre + n.name;
      for (auto& in : copy.inputs) in = mapped(in);
      for (auto& o : copy.outputs) o = mapped(o);
      out.nodes.push_back(std::move(copy));
    }
    for (std::int64_t i = 0; i < n_state; ++i)
      state_srcs[i] = mapped(body.outputs[i]);
    for (std::int64_t i = 0; i < n_y; ++i)
      per_step_y[i].push_back(mapped(body.outputs[n_state + i]));
  }

  for (std::int64_t i = 0; i < n_y; ++i) {
    Node cat = simple_node("Concat", "stack_y" + std::to_string(i),
                           per_step_y[i], {scan->outputs[n_state + i]});
    cat.attributes["axis"] = 0.0;
    out.nodes.push_back(std::move(cat));
  }

  // Copy the remaining top-level nodes.
  auto consumers = consumer_map(g);
  for (const auto& n : g.nodes) {
    if (n.op_type == "Scan") continue;
    out.nodes.push_back(n);
  }
  // Final-state outputs of the Scan must be unused for a pure unroll.
  for (std::int64_t i = 0; i < n_state; ++i) {
    const std::string& fs = scan->outputs[i];
    if (consumers.count(fs) && !consumers[fs].empty())
      throw ShapeChainError("final state " + fs +
                            " is consumed; unroll does not alias it");
    for (const auto& o : g.outputs)
      if (o == fs)
        throw ShapeChainError("final state " + fs + " is a graph output");
  }
  return out;
}

// ---------------------------------------------------------------------------
// batchnorm folding

PassResult fold_batchnorm(const Graph& g) {
  PassReport report;
  report.pass = "fold_batchnorm";

  std::function<Graph(const Graph&)> process = [&](const Graph& graph) {
    Graph cur = graph.clone();
    for (;;) {
      bool changed = false;
      for (int i = 0; i < int(cur.nodes.size()); ++i) {
        if (cur.nodes[i].op_type != "BatchNorm") continue;
        const Node& bn = cur.nodes[i];
        const Tensor& gamma = cur.initializers.at(bn.inputs[1]);
        const Tensor& beta = cur.initializers.at(bn.inputs[2]);
        const Tensor& mean = cur.initializers.at(bn.inputs[3]);
        const Tensor& var = cur.initializers.at(bn.inputs[4]);
        double eps = bn.has_attr("epsilon") ? bn.attr_f("epsilon") : 1e-5;
        std::int64_t C = gamma.numel();
        Tensor s({C}, DataType::f64()), b({C}, DataType::f64());
        for (std::int64_t c = 0; c < C; ++c) {
          s.values[c] = gamma.values[c] / std::sqrt(var.values[c] + eps);
          b.values[c] = beta.values[c] - mean.values[c] * s.values[c];
        }
        std::string mid = bn.name + "_scaled";
        std::vector<Node> repl = {
            simple_node("Mul", bn.name + "_mul", {bn.inputs[0], bn.name + "_s"},
                        {mid}),
            simple_node("Add", bn.name + "_add", {mid, bn.name + "_b"},
                        {bn.outputs[0]})};
        cur = replace_chain(cur, {i}, repl,
                            {{bn.name + "_s", s}, {bn.name + "_b", b}});
        report.applications += 1;
        report.nodes_removed += 1;
        report.nodes_added += 2;
        changed = true;
        break;
      }
      if (!changed) break;
    }
    for (auto& n : cur.nodes) {
      if (n.op_type == "Scan" && n.has_attr("body")) {
        auto body = std::get<GraphPtr>(n.attributes.at("body"));
        n.attributes["body"] = std::make_shared<Graph>(process(*body));
      }
    }
    return cur;
  };

  Graph out = process(g);
  return {std::move(out), std::move(report)};
}

// ---------------------------------------------------------------------------
// ConvLSTM case study

ConvLSTMConfig convlstm_w8a6_config() {
  ConvLSTMConfig cfg;
  cfg.weight_qp = QuantParams{1.0, 0, 8, true, false};
  cfg.act_qp = QuantParams{1.0 / 8.0, 0, 6, false, false};  // relu outputs
  cfg.input_qp = QuantParams{1.0 / 16.0, 0, 8, true, false};
  return cfg;
}

namespace {

struct QuantizedTensor {
  Tensor codes;
  double scale;
};

QuantizedTensor quantize_tensor(const Tensor& t, const QuantParams& qp) {
  double m = 0.0;
  for (double v : t.values) m = std::max(m, std::fabs(v));
  double scale = m == 0.0 ? 1.0 : m / double(qp.qmax());
  QuantParams wqp = qp;
  wqp.scale = scale;
  Tensor codes(t.shape, wqp.dtype());
  for (size_t i = 0; i < t.values.size(); ++i)
    codes.values[i] = quantize_value(t.values[i], wqp);
  return {std::move(codes), scale};
}

}  // namespace

Graph build_convlstm(const ConvLSTMConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return [&rng, d]() mutable { return d(rng); };
  };

  Graph g;
  g.name = "convlstm";
  g.inputs = {{"x", {1, 1, cfg.in_rows, cfg.in_cols}, cfg.input_qp.dtype()}};

  Node in_dq = simple_node("DequantizeLinear", "in_dq", {"x"}, {"x_f"});
  set_quant_attrs(in_dq, cfg.input_qp);
  g.nodes.push_back(std::move(in_dq));

  std::string cur = "x_f";
  std::int64_t c_in = 1, rows = cfg.in_rows, cols = cfg.in_cols;
  std::vector<int> filters;
  for (int f : cfg.block1_filters) filters.push_back(f);
  for (int f : cfg.block2_filters) filters.push_back(f);

  auto wgen = uniform(-0.25, 0.25);
  for (int li = 0; li < int(filters.size()); ++li) {
    std::string base = "conv" + std::to_string(li);
    std::int64_t c_out = filters[li];
    bool strided = li % 3 == 0;  // first layer of each block
    std::int64_t stride = strided ? cfg.block_stride : 1;

    Tensor w({c_out, c_in, cfg.kernel, cfg.kernel}, DataType::f64());
    for (auto& v : w.values) v = wgen();
    QuantizedTensor qw = quantize_tensor(w, cfg.weight_qp);
    g.initializers[base + "_w"] = std::move(qw.codes);
    g.initializers[base + "_ws"] = Tensor::scalar(qw.scale);

    Node conv = simple_node("Conv2D", base, {cur, base + "_w"}, {base + "_o"});
    conv.attributes["stride"] = double(stride);
    conv.attributes["pad"] = 1.0;
    g.nodes.push_back(std::move(conv));
    g.nodes.push_back(simple_node("Mul", base + "_scale",
                                  {base + "_o", base + "_ws"}, {base + "_sc"}));

    Tensor gamma({c_out}, DataType::f64()), beta({c_out}, DataType::f64());
    Tensor mean({c_out}, DataType::f64()), var({c_out}, DataType::f64());
    auto ggen = uniform(0.5, 1.5);
    auto bgen = uniform(-0.3, 0.3);
    auto mgen = uniform(-0.2, 0.2);
    auto vgen = uniform(0.5, 1.5);
    for (auto& v : gamma.values) v = ggen();
    for (auto& v : beta.values) v = bgen();
    for (auto& v : mean.values) v = mgen();
    for (auto& v : var.values) v = vgen();
    g.initializers[base + "_g"] = std::move(gamma);
    g.initializers[base + "_beta"] = std::move(beta);
    g.initializers[base + "_mu"] = std::move(mean);
    g.initializers[base + "_var"] = std::move(var);
    Node bn = simple_node("BatchNorm", base + "_bn",
                          {base + "_sc", base + "_g", base + "_beta",
                           base + "_mu", base + "_var"},
                          {base + "_bn_o"});
    bn.attributes["epsilon"] = 1e-5;
    g.nodes.push_back(std::move(bn));
    g.nodes.push_back(
        simple_node("ReLU", base + "_relu", {base + "_bn_o"}, {base + "_r"}));
    emit_qcdq(g, base + "_act", base + "_r", base + "_qo", cfg.act_qp);
    cur = base + "_qo";

    rows = (rows + 2 - cfg.kernel) / stride + 1;
    cols = (cols + 2 - cfg.kernel) / stride + 1;
    c_in = c_out;
  }

  if (rows != cfg.lstm_seq || c_in * cols != cfg.lstm_input)
    throw ShapeChainError(
        "conv feature map (" + std::to_string(rows) + " steps x " +
        std::to_string(c_in * cols) +
        " features) does not chain into the LSTM (" +
        std::to_string(cfg.lstm_seq) + " x " + std::to_string(cfg.lstm_input) +
        ")");

  // (1, C, T, W) -> (T, 1, C, W) -> (T, C*W): time outermost, then features.
  Node tr = simple_node("Transpose", "to_seq", {cur}, {"feat_t"});
  tr.attributes["perm"] = Tensor({4}, DataType::f64(), {2.0, 0.0, 1.0, 3.0});
  g.nodes.push_back(std::move(tr));
  Node rs = simple_node("Reshape", "to_rows", {"feat_t"}, {"feat_rows"});
  rs.attributes["shape"] = Tensor(
      {2}, DataType::f64(), {double(cfg.lstm_seq), double(cfg.lstm_input)});
  g.nodes.push_back(std::move(rs));

  LSTMQuantConfig lstm_cfg =
      lstm_w8a6_config(cfg.lstm_input, cfg.lstm_hidden, cfg.lstm_seq);
  const QuantParams& io = lstm_cfg.qp("hidden_state");
  emit_quantize_clip(g, "lstm_in", "feat_rows", "x_codes", io);

  LSTMWeights lw = random_lstm_weights(cfg.lstm_input, cfg.lstm_hidden,
                                       rng());
  auto gates = lstm_gate_quant(lstm_cfg, lw);
  Graph body = build_lstm_body(lstm_cfg, gates);
  g.initializers["h0"] = Tensor({1, cfg.lstm_hidden}, io.dtype());
  g.initializers["c0"] =
      Tensor({1, cfg.lstm_hidden}, lstm_cfg.qp("cell_state").dtype());
  Node scan = simple_node("Scan", "lstm_scan", {"h0", "c0", "x_codes"},
                          {"h_final", "c_final", "h_seq_q"});
  scan.attributes["body"] = std::make_shared<Graph>(std::move(body));
  scan.attributes["scan_input_count"] = 1.0;
  g.nodes.push_back(std::move(scan));

  // Classifier head consumes the final hidden state.
  Node hdq = simple_node("DequantizeLinear", "h_dq", {"h_final"}, {"h_f"});
  set_quant_attrs(hdq, io);
  g.nodes.push_back(std::move(hdq));

  auto dense = [&](const std::string& base, const std::string& in,
                   std::int64_t in_dim, std::int64_t out_dim,
                   const std::string& out) {
    Tensor w({in_dim, out_dim}, DataType::f64());
    for (auto& v : w.values) v = wgen();
    QuantizedTensor qw = quantize_tensor(w, cfg.weight_qp);
    g.initializers[base + "_w"] = std::move(qw.codes);
    g.initializers[base + "_ws"] = Tensor::scalar(qw.scale);
    Tensor b({1, out_dim}, DataType::f64());
    for (auto& v : b.values) v = wgen();
    g.initializers[base + "_b"] = std::move(b);
    g.nodes.push_back(
        simple_node("MatMul", base, {in, base + "_w"}, {base + "_o"}));
    g.nodes.push_back(simple_node("Mul", base + "_scale",
                                  {base + "_o", base + "_ws"}, {base + "_sc"}));
    g.nodes.push_back(simple_node("Add", base + "_bias",
                                  {base + "_sc", base + "_b"}, {out}));
  };

  dense("fc1", "h_f", cfg.lstm_hidden, cfg.dense1, "fc1_pre");
  g.nodes.push_back(simple_node("ReLU", "fc1_relu", {"fc1_pre"}, {"fc1_r"}));
  emit_qcdq(g, "fc1_act", "fc1_r", "fc1_qo", cfg.act_qp);
  dense("fc2", "fc1_qo", cfg.dense1, cfg.dense2, "logits");
  g.outputs = {"logits"};
  return g;
}

// ---------------------------------------------------------------------------
// JSON configs

namespace {

QuantParams qp_from_json(const json& j) {
  QuantParams qp;
  qp.scale = j.at("scale").get<double>();
  qp.zero_point = j.at("zero_point").get<std::int64_t>();
  qp.bits = j.at("bits").get<int>();
  qp.is_signed = j.at("signed").get<bool>();
  qp.narrow_range = j.value("narrow_range", false);
  return qp;
}

}  // namespace

LSTMQuantConfig lstm_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    LSTMQuantConfig cfg;
    int input = j.at("input_size").get<int>();
    int hidden = j.at("hidden_size").get<int>();
    int seq = j.at("seq_len").get<int>();
    if (j.value("preset", "") == "w8a6")
      cfg = lstm_w8a6_config(input, hidden, seq);
    else {
      cfg.input_size = input;
      cfg.hidden_size = hidden;
      cfg.seq_len = seq;
    }
    if (j.contains("weight_qp")) cfg.weight_qp = qp_from_json(j["weight_qp"]);
    if (j.contains("act_qps"))
      for (auto it = j["act_qps"].begin(); it != j["act_qps"].end(); ++it)
        cfg.act_qps[it.key()] = qp_from_json(it.value());
    check_lstm_config(cfg);
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad LSTM config: ") + e.what());
  }
}

ConvLSTMConfig convlstm_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    ConvLSTMConfig cfg = convlstm_w8a6_config();
    cfg.in_rows = j.value("in_rows", cfg.in_rows);
    cfg.in_cols = j.value("in_cols", cfg.in_cols);
    cfg.lstm_input = j.value("lstm_input", cfg.lstm_input);
    cfg.lstm_hidden = j.value("lstm_hidden", cfg.lstm_hidden);
    cfg.lstm_seq = j.value("lstm_seq", cfg.lstm_seq);
    cfg.dense1 = j.value("dense1", cfg.dense1);
    cfg.dense2 = j.value("dense2", cfg.dense2);
    if (j.contains("weight_qp")) cfg.weight_qp = qp_from_json(j["weight_qp"]);
    if (j.contains("act_qp")) cfg.act_qp = qp_from_json(j["act_qp"]);
    if (j.contains("input_qp")) cfg.input_qp = qp_from_json(j["input_qp"]);
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad ConvLSTM config: ") + e.what());
  }
}

}  // namespace qrnn
