// SPDX-License-Identifier: Apache-2.0
#include "qrnn/quant.hpp"

#include <cmath>

namespace qrnn {

void check_quant_params(const QuantParams& qp) {
  if (!(qp.scale > 0.0))
    throw InvalidQuantParams("scale must be positive, got " +
                             std::to_string(qp.scale));
  if (qp.bits < 1 || qp.bits > 32)
    throw InvalidQuantParams("bits must be in 1..32");
  if (qp.zero_point < qp.qmin() || qp.zero_point > qp.qmax())
    throw InvalidQuantParams("zero_point " + std::to_string(qp.zero_point) +
                             " outside quantizer range");
}

double round_half_even(double x) {
  double fl = std::floor(x);
  double diff = x - fl;
  if (diff > 0.5) return fl + 1.0;
  if (diff < 0.5) return fl;
  return std::fmod(fl, 2.0) == 0.0 ? fl : fl + 1.0;
}

double quantize_value(double x, const QuantParams& qp) {
  double q = round_half_even(x / qp.scale) + double(qp.zero_point);
  double lo = double(qp.qmin()), hi = double(qp.qmax());
  return q < lo ? lo : (q > hi ? hi : q);
}

double dequantize_value(double q, const QuantParams& qp) {
  return (q - double(qp.zero_point)) * qp.scale;
}

double quant_fused_value(double x, const QuantParams& qp) {
  return dequantize_value(quantize_value(x, qp), qp);
}

Tensor quantize(const Tensor& x, const QuantParams& qp) {
  check_quant_params(qp);
  Tensor out(x.shape, qp.dtype());
  for (size_t i = 0; i < x.values.size(); ++i)
    out.values[i] = quantize_value(x.values[i], qp);
  return out;
}

Tensor dequantize(const Tensor& q, const QuantParams& qp) {
  check_quant_params(qp);
  double lo = double(qp.qmin()), hi = double(qp.qmax());
  Tensor out(q.shape, DataType::f64());
  for (size_t i = 0; i < q.values.size(); ++i) {
    if (q.values[i] < lo || q.values[i] > hi)
      throw RangeError("dequantize: value " + std::to_string(q.values[i]) +
                       " outside quantizer range");
    out.values[i] = dequantize_value(q.values[i], qp);
  }
  return out;
}

Tensor quant_fused(const Tensor& x, const QuantParams& qp) {
  check_quant_params(qp);
  Tensor out(x.shape, DataType::f64());
  for (size_t i = 0; i < x.values.size(); ++i)
    out.values[i] = quant_fused_value(x.values[i], qp);
  return out;
}

void set_quant_attrs(Node& n, const QuantParams& qp) {
  n.attributes["scale"] = qp.scale;
  n.attributes["zero_point"] = double(qp.zero_point);
  n.attributes["bits"] = double(qp.bits);
  n.attributes["signed"] = qp.is_signed;
  n.attributes["narrow_range"] = qp.narrow_range;
}

QuantParams quant_attrs(const Node& n) {
  QuantParams qp;
  qp.scale = n.attr_f("scale");
  qp.zero_point = std::llround(n.attr_f("zero_point"));
  qp.bits = int(std::llround(n.attr_f("bits")));
  qp.is_signed = n.attr_b("signed");
  qp.narrow_range = n.has_attr("narrow_range") && n.attr_b("narrow_range");
  return qp;
}

// ---------------------------------------------------------------------------
// fuse_qcdq_pass

namespace {

// Applies `fn` to the graph and every Scan body, accumulating reports.
Graph map_over_bodies(const Graph& g,
                      const std::function<Graph(const Graph&)>& fn) {
  Graph top = fn(g);
  for (auto& n : top.nodes) {
    if (n.op_type == "Scan" && n.has_attr("body")) {
      auto body = std::get<GraphPtr>(n.attributes.at("body"));
      n.attributes["body"] = std::make_shared<Graph>(map_over_bodies(*body, fn));
    }
  }
  return top;
}

}  // namespace

PassResult fuse_qcdq_pass(const Graph& g) {
  PassReport report;
  report.pass = "fuse_qcdq";

  auto fuse_one_graph = [&report](const Graph& graph) {
    Graph cur = graph;
    for (;;) {
      auto chains = find_pattern(cur, {op_is("QuantizeLinear"), op_is("Clip"),
                                       op_is("DequantizeLinear")});
      bool changed = false;
      for (const auto& chain : chains) {
        const Node& q = cur.nodes[chain[0]];
        const Node& c = cur.nodes[chain[1]];
        const Node& d = cur.nodes[chain[2]];
        QuantParams qqp = quant_attrs(q);
        QuantParams dqp = quant_attrs(d);
        bool consistent = qqp == dqp &&
                          std::llround(c.attr_f("min")) == qqp.qmin() &&
                          std::llround(c.attr_f("max")) == qqp.qmax();
        if (!consistent) continue;
        Node fused;
        fused.op_type = "Quant";
        fused.name = q.name + "_fused";
        fused.inputs = {q.inputs[0]};
        fused.outputs = {d.outputs[0]};
        set_quant_attrs(fused, qqp);
        cur = replace_chain(cur, chain, {fused});
        report.applications += 1;
        report.nodes_removed += 3;
        report.nodes_added += 1;
        changed = true;
        break;  // chain indices are stale after a rewrite
      }
      if (!changed) {
        // Surviving chains are the inconsistent ones.
        for (const auto& chain : chains)
          report.diagnostics.push_back("InconsistentQCDQ: chain at node " +
                                       cur.nodes[chain[0]].name +
                                       " left unfused");
        break;
      }
    }
    return cur;
  };

  Graph out = map_over_bodies(g, fuse_one_graph);
  return {std::move(out), std::move(report)};
}

}  // namespace qrnn
