// SPDX-License-Identifier: Apache-2.0
#include "qrnn/executor.hpp"

#include <cmath>
#include <iostream>

#include "qrnn/infer.hpp"
#include "qrnn/kernels.hpp"
#include "qrnn/quant.hpp"
#include "qrnn/threshold.hpp"

namespace qrnn {

namespace {

struct Evaluator {
  const Graph& typed;  // graph with value_info populated
  const ExecutionContext& ctx;
  TensorMap env;
  std::int64_t steps = 0;

  Evaluator(const Graph& g, const ExecutionContext& c) : typed(g), ctx(c) {}

  const Tensor& get(const std::string& name) {
    auto it = env.find(name);
    if (it == env.end()) throw MissingFeed("tensor " + name + " not bound");
    return it->second;
  }

  void bind(const std::string& name, Tensor t) { env[name] = std::move(t); }

  void check_int_result(const Node& n, const Tensor& t) {
    if (!t.dtype.is_int()) return;
    double lo = double(t.dtype.min()), hi = double(t.dtype.max());
    for (double v : t.values) {
      if (v < lo || v > hi || v != std::floor(v))
        throw RangeError("node " + n.name + ": value " + std::to_string(v) +
                         " violates " + t.dtype.str());
    }
  }

  Tensor eltwise(const Node& n, kern::BinaryOp op) {
    const Tensor& a0 = get(n.inputs[0]);
    const Tensor& b0 = get(n.inputs[1]);
    // Larger operand drives the output; scalar, same-shape, or NCHW
    // per-channel broadcast on the smaller one.
    bool swap = b0.numel() > a0.numel();
    if (swap && op == kern::BinaryOp::SUB)
      throw ShapeMismatch("node " + n.name + ": Sub broadcast on the minuend");
    const Tensor& a = swap ? b0 : a0;
    const Tensor& b = swap ? a0 : b0;
    std::int64_t inner = 1, mod = 1;
    if (b.numel() == 1) {
      inner = 1;
      mod = 1;
    } else if (a.shape == b.shape) {
      inner = 1;
      mod = a.numel();
    } else if (a.shape.size() == 4 && b.numel() == a.shape[1]) {
      inner = a.shape[2] * a.shape[3];
      mod = a.shape[1];
    } else {
      throw ShapeMismatch("node " + n.name + ": unsupported broadcast");
    }
    ValueInfo info = tensor_info(typed, n.outputs[0]);
    Tensor out(a.shape, info.dtype);
    if (ctx.parallel)
      kern::eltwise_omp(op, a.values.data(), b.values.data(), out.values.data(),
                        a.numel(), inner, mod);
    else
      kern::eltwise_serial(op, a.values.data(), b.values.data(),
                           out.values.data(), a.numel(), inner, mod);
    check_int_result(n, out);
    return out;
  }

  Tensor matmul(const Node& n) {
    const Tensor& a = get(n.inputs[0]);
    const Tensor& b = get(n.inputs[1]);
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
      throw ShapeMismatch("node " + n.name + ": MatMul shapes");
    std::int64_t m = a.shape[0], k = a.shape[1], nn = b.shape[1];
    ValueInfo info = tensor_info(typed, n.outputs[0]);
    Tensor out({m, nn}, info.dtype);
    if (info.dtype.is_int()) {
      bool ok = ctx.parallel
                    ? kern::matmul_i64_omp(a.values.data(), b.values.data(),
                                           out.values.data(), m, k, nn,
                                           info.dtype.min(), info.dtype.max())
                    : kern::matmul_i64_serial(a.values.data(), b.values.data(),
                                              out.values.data(), m, k, nn,
                                              info.dtype.min(),
                                              info.dtype.max());
      if (!ok)
        throw RangeError("node " + n.name +
                         ": integer accumulator out of inferred range " +
                         info.dtype.str());
    } else {
      if (ctx.parallel)
        kern::matmul_f64_omp(a.values.data(), b.values.data(),
                             out.values.data(), m, k, nn);
      else
        kern::matmul_f64_serial(a.values.data(), b.values.data(),
                                out.values.data(), m, k, nn);
    }
    return out;
  }

  Tensor conv2d(const Node& n) {
    const Tensor& x = get(n.inputs[0]);
    const Tensor& w = get(n.inputs[1]);
    const Tensor* bias = nullptr;
    if (n.inputs.size() > 2) bias = &get(n.inputs[2]);
    if (x.shape.size() != 4 || w.shape.size() != 4 || x.shape[1] != w.shape[1])
      throw ShapeMismatch("node " + n.name + ": Conv2D shapes");
    kern::Conv2DDims d{x.shape[0], x.shape[1], x.shape[2], x.shape[3],
                       w.shape[0], w.shape[2], w.shape[3],
                       std::llround(n.attr_f("stride")),
                       std::llround(n.attr_f("pad"))};
    ValueInfo info = tensor_info(typed, n.outputs[0]);
    Tensor out({d.batch, d.c_out, d.h_out(), d.w_out()}, info.dtype);
    if (ctx.parallel)
      kern::conv2d_omp(x.values.data(), w.values.data(),
                       bias ? bias->values.data() : nullptr, out.values.data(),
                       d);
    else
      kern::conv2d_serial(x.values.data(), w.values.data(),
                          bias ? bias->values.data() : nullptr,
                          out.values.data(), d);
    check_int_result(n, out);
    return out;
  }

  Tensor unary(const Node& n, kern::UnaryOp op) {
    const Tensor& x = get(n.inputs[0]);
    ValueInfo info = tensor_info(typed, n.outputs[0]);
    Tensor out(x.shape, info.dtype);
    if (ctx.parallel)
      kern::unary_omp(op, x.values.data(), out.values.data(), x.numel());
    else
      kern::unary_serial(op, x.values.data(), out.values.data(), x.numel());
    return out;
  }

  Tensor scan(const Node& n) {
    const auto& body = std::get<GraphPtr>(n.attributes.at("body"));
    std::int64_t n_scan = std::llround(n.attr_f("scan_input_count"));
    std::int64_t n_state = std::int64_t(body->inputs.size()) - n_scan;
    if (n_state < 0 || n.inputs.size() != body->inputs.size())
      throw BodySignatureMismatch("node " + n.name +
                                  ": Scan arity does not match body");
    std::vector<Tensor> states, seqs;
    for (std::int64_t i = 0; i < n_state; ++i) states.push_back(get(n.inputs[i]));
    for (std::int64_t i = n_state; i < std::int64_t(n.inputs.size()); ++i)
      seqs.push_back(get(n.inputs[i]));
    ScanResult r = run_scan(*body, states, seqs);
    for (size_t i = 0; i < n.outputs.size(); ++i) {
      if (std::int64_t(i) < n_state)
        bind(n.outputs[i], r.final_states[i]);
      else
        bind(n.outputs[i], r.stacked_outputs[i - n_state]);
    }
    return Tensor{};  // outputs already bound
  }

  ScanResult run_scan(const Graph& body, const std::vector<Tensor>& init_states,
                      const std::vector<Tensor>& scan_inputs) {
    std::int64_t n_state = std::int64_t(init_states.size());
    std::int64_t n_scan = std::int64_t(scan_inputs.size());
    if (body.inputs.size() != size_t(n_state + n_scan))
      throw BodySignatureMismatch("scan body expects " +
                                  std::to_string(body.inputs.size()) +
                                  " inputs");
    if (body.outputs.size() < size_t(n_state))
      throw BodySignatureMismatch("scan body yields fewer outputs than states");
    std::int64_t seq = scan_inputs.empty() ? 0 : scan_inputs[0].shape.at(0);
    for (const auto& s : scan_inputs)
      if (s.shape.at(0) != seq)
        throw ShapeMismatch("scan inputs disagree on sequence length");

    // Body graphs are typed per step against the actual state dtypes.
    Graph body_decl = body;
    for (std::int64_t i = 0; i < n_state; ++i) {
      body_decl.inputs[i].shape = init_states[i].shape;
      body_decl.inputs[i].dtype = init_states[i].dtype;
    }
    for (std::int64_t i = 0; i < n_scan; ++i) {
      auto sl = scan_inputs[i].shape;
      sl[0] = 1;
      body_decl.inputs[n_state + i].shape = sl;
      body_decl.inputs[n_state + i].dtype = scan_inputs[i].dtype;
    }
    Graph body_typed = infer_types(body_decl);

    std::vector<Tensor> states = init_states;
    std::int64_t n_y = std::int64_t(body.outputs.size()) - n_state;
    std::vector<Tensor> stacked(n_y);

    for (std::int64_t t = 0; t < seq; ++t) {
      Evaluator ev(body_typed, ctx);
      ev.steps = steps;
      for (const auto& [nm, tv] : body_typed.initializers) ev.bind(nm, tv);
      for (std::int64_t i = 0; i < n_state; ++i)
        ev.bind(body_typed.inputs[i].name, states[i]);
      for (std::int64_t i = 0; i < n_scan; ++i) {
        const Tensor& s = scan_inputs[i];
        std::int64_t row = s.numel() / seq;
        auto shape = s.shape;
        shape[0] = 1;
        Tensor slice(shape, s.dtype);
        std::copy(s.values.begin() + t * row, s.values.begin() + (t + 1) * row,
                  slice.values.begin());
        ev.bind(body_typed.inputs[n_state + i].name, std::move(slice));
      }
      ev.run_nodes(body_typed);
      steps = ev.steps;

      for (std::int64_t i = 0; i < n_state; ++i) {
        Tensor next = ev.get(body_typed.outputs[i]);
        if (next.shape != states[i].shape || next.dtype != states[i].dtype)
          throw BodySignatureMismatch("state " + body_typed.inputs[i].name +
                                      " changed shape or dtype at step " +
                                      std::to_string(t));
        states[i] = std::move(next);
      }
      for (std::int64_t i = 0; i < n_y; ++i) {
        const Tensor& y = ev.get(body_typed.outputs[n_state + i]);
        if (t == 0) {
          auto shape = y.shape;
          if (!shape.empty() && shape[0] == 1)
            shape[0] = seq;
          else
            shape.insert(shape.begin(), seq);
          stacked[i] = Tensor(shape, y.dtype);
        }
        std::copy(y.values.begin(), y.values.end(),
                  stacked[i].values.begin() + t * y.numel());
      }
    }
    return {std::move(states), std::move(stacked)};
  }

  void run_nodes(const Graph& g) {
    auto order = topo_sort(g);
    for (const Node* np : order) {
      const Node& n = *np;
      if (++steps > ctx.step_budget)
        throw Error("step budget exceeded; malformed recursive structure?");
      for (const auto& in : n.inputs) get(in);  // MissingFeed before dispatch

      if (n.op_type == "Add") {
        bind(n.outputs[0], eltwise(n, kern::BinaryOp::ADD));
      } else if (n.op_type == "Sub") {
        bind(n.outputs[0], eltwise(n, kern::BinaryOp::SUB));
      } else if (n.op_type == "Mul") {
        bind(n.outputs[0], eltwise(n, kern::BinaryOp::MUL));
      } else if (n.op_type == "MatMul") {
        bind(n.outputs[0], matmul(n));
      } else if (n.op_type == "Conv2D") {
        bind(n.outputs[0], conv2d(n));
      } else if (n.op_type == "Tanh") {
        bind(n.outputs[0], unary(n, kern::UnaryOp::TANH));
      } else if (n.op_type == "Sigmoid") {
        bind(n.outputs[0], unary(n, kern::UnaryOp::SIGMOID));
      } else if (n.op_type == "ReLU") {
        bind(n.outputs[0], unary(n, kern::UnaryOp::RELU));
      } else if (n.op_type == "QuantizeLinear") {
        bind(n.outputs[0], quantize(get(n.inputs[0]), quant_attrs(n)));
      } else if (n.op_type == "DequantizeLinear") {
        bind(n.outputs[0], dequantize(get(n.inputs[0]), quant_attrs(n)));
      } else if (n.op_type == "Quant") {
        bind(n.outputs[0], quant_fused(get(n.inputs[0]), quant_attrs(n)));
      } else if (n.op_type == "Clip") {
        const Tensor& x = get(n.inputs[0]);
        double lo = n.attr_f("min"), hi = n.attr_f("max");
        Tensor out = x;
        for (double& v : out.values) v = std::min(std::max(v, lo), hi);
        bind(n.outputs[0], std::move(out));
      } else if (n.op_type == "MultiThreshold") {
        bind(n.outputs[0],
             multithreshold(get(n.inputs[0]), multithreshold_attrs(n)));
      } else if (n.op_type == "BatchNorm") {
        bind(n.outputs[0], batchnorm(n));
      } else if (n.op_type == "Concat") {
        bind(n.outputs[0], concat(n));
      } else if (n.op_type == "Reshape") {
        const Tensor& x = get(n.inputs[0]);
        const auto& target = std::get<Tensor>(n.attributes.at("shape"));
        std::vector<std::int64_t> shape;
        for (double v : target.values) shape.push_back(std::llround(v));
        if (Tensor::numel_of(shape) != x.numel())
          throw ShapeMismatch("node " + n.name + ": Reshape element count");
        Tensor out = x;
        out.shape = shape;
        bind(n.outputs[0], std::move(out));
      } else if (n.op_type == "Transpose") {
        bind(n.outputs[0], transpose(n));
      } else if (n.op_type == "Scan") {
        scan(n);
      } else {
        throw UnsupportedOp("node " + n.name + ": op " + n.op_type);
      }

      if (ctx.trace) {
        const Tensor& t = get(n.outputs[0]);
        std::cerr << "[trace] " << n.name << " (" << n.op_type << ") -> "
                  << n.outputs[0] << " " << t.dtype.str() << " [";
        for (std::int64_t i = 0; i < std::min<std::int64_t>(t.numel(), 8); ++i)
          std::cerr << (i ? ", " : "") << t.values[i];
        if (t.numel() > 8) std::cerr << ", ...";
        std::cerr << "]\n";
      }
    }
  }

  Tensor batchnorm(const Node& n) {
    const Tensor& x = get(n.inputs[0]);
    const Tensor& gamma = get(n.inputs[1]);
    const Tensor& beta = get(n.inputs[2]);
    const Tensor& mean = get(n.inputs[3]);
    const Tensor& var = get(n.inputs[4]);
    double eps = n.has_attr("epsilon") ? n.attr_f("epsilon") : 1e-5;
    if (x.shape.size() != 4 || gamma.numel() != x.shape[1])
      throw ShapeMismatch("node " + n.name + ": BatchNorm expects NCHW");
    Tensor out(x.shape, DataType::f64());
    std::int64_t hw = x.shape[2] * x.shape[3];
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      std::int64_t c = (i / hw) % x.shape[1];
      double s = gamma.values[c] / std::sqrt(var.values[c] + eps);
      out.values[i] = (x.values[i] - mean.values[c]) * s + beta.values[c];
    }
    return out;
  }

  Tensor concat(const Node& n) {
    std::vector<const Tensor*> parts;
    for (const auto& in : n.inputs) parts.push_back(&get(in));
    const Tensor& first = *parts[0];
    std::int64_t axis =
        n.has_attr("axis") ? std::llround(n.attr_f("axis"))
                           : std::int64_t(first.shape.size()) - 1;
    auto shape = first.shape;
    for (size_t p = 1; p < parts.size(); ++p) {
      if (parts[p]->shape.size() != shape.size() ||
          parts[p]->dtype != first.dtype)
        throw ShapeMismatch("node " + n.name + ": Concat ranks/dtypes");
      shape[axis] += parts[p]->shape[axis];
    }
    Tensor out(shape, first.dtype);
    std::int64_t outer = 1, inner = 1;
    for (std::int64_t i = 0; i < axis; ++i) outer *= shape[i];
    for (size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    std::int64_t pos = 0;
    for (std::int64_t o = 0; o < outer; ++o) {
      for (const Tensor* p : parts) {
        std::int64_t chunk = p->shape[axis] * inner;
        std::copy(p->values.begin() + o * chunk,
                  p->values.begin() + (o + 1) * chunk,
                  out.values.begin() + pos);
        pos += chunk;
      }
    }
    return out;
  }

  Tensor transpose(const Node& n) {
    const Tensor& x = get(n.inputs[0]);
    const auto& pt = std::get<Tensor>(n.attributes.at("perm"));
    std::vector<std::int64_t> perm;
    for (double v : pt.values) perm.push_back(std::llround(v));
    if (perm.size() != x.shape.size())
      throw ShapeMismatch("node " + n.name + ": Transpose perm rank");
    std::vector<std::int64_t> oshape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) oshape[i] = x.shape[perm[i]];
    std::vector<std::int64_t> istride(x.shape.size(), 1);
    for (int i = int(x.shape.size()) - 2; i >= 0; --i)
      istride[i] = istride[i + 1] * x.shape[i + 1];
    Tensor out(oshape, x.dtype);
    std::vector<std::int64_t> idx(oshape.size(), 0);
    for (std::int64_t o = 0; o < out.numel(); ++o) {
      std::int64_t src = 0;
      for (size_t i = 0; i < perm.size(); ++i) src += idx[i] * istride[perm[i]];
      out.values[o] = x.values[src];
      for (int i = int(idx.size()) - 1; i >= 0; --i) {
        if (++idx[i] < oshape[i]) break;
        idx[i] = 0;
      }
    }
    return out;
  }
};

}  // namespace

TensorMap execute(const Graph& g, const TensorMap& feeds,
                  const ExecutionContext& ctx) {
  Graph typed = g;
  // Feeds may carry runtime shapes; redeclare inputs from them, then type.
  for (auto& in : typed.inputs) {
    auto it = feeds.find(in.name);
    if (it == feeds.end())
      throw MissingFeed("graph input " + in.name + " not supplied");
    if (it->second.dtype != in.dtype)
      throw ShapeMismatch("feed " + in.name + " dtype " +
                          it->second.dtype.str() + " != declared " +
                          in.dtype.str());
    if (!in.shape.empty() && it->second.shape != in.shape)
      throw ShapeMismatch("feed " + in.name + " shape mismatch");
  }
  typed = infer_types(typed);

  Evaluator ev(typed, ctx);
  for (const auto& [name, t] : typed.initializers) ev.bind(name, t);
  for (const auto& in : typed.inputs) ev.bind(in.name, feeds.at(in.name));
  ev.run_nodes(typed);

  TensorMap out;
  for (const auto& o : typed.outputs) out[o] = ev.get(o);
  return out;
}

ScanResult execute_scan(const Graph& body, const std::vector<Tensor>& init_states,
                        const std::vector<Tensor>& scan_inputs,
                        const ExecutionContext& ctx) {
  Graph typed = body;
  Evaluator ev(typed, ctx);
  return ev.run_scan(body, init_states, scan_inputs);
}

}  // namespace qrnn
