// SPDX-License-Identifier: Apache-2.0
#include "qrnn/threshold.hpp"

#include <cmath>
#include <limits>

#include "qrnn/kernels.hpp"

namespace qrnn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inverse_at_boundary(ActivationKind kind, double bnd) {
  switch (kind) {
    case ActivationKind::IDENTITY:
      return bnd;
    case ActivationKind::TANH:
      if (bnd <= -1.0) return -kInf;
      if (bnd >= 1.0) return kInf;
      return std::atanh(bnd);
    case ActivationKind::SIGMOID:
      if (bnd <= 0.0) return -kInf;
      if (bnd >= 1.0) return kInf;
      return std::log(bnd / (1.0 - bnd));  // logit
    case ActivationKind::RELU:
      // relu(x) >= b holds for every x when b <= 0
      return bnd > 0.0 ? bnd : -kInf;
  }
  throw UnsupportedActivation("unknown activation kind");
}

}  // namespace

Tensor multithreshold(const Tensor& x, const MultiThresholdAttrs& attrs) {
  std::int64_t channels = x.shape.empty() ? 1 : x.shape.back();
  std::int64_t c_rows = attrs.channels();
  if (c_rows != 1 && c_rows != channels)
    throw ShapeMismatch("multithreshold: " + std::to_string(c_rows) +
                        " threshold rows vs " + std::to_string(channels) +
                        " channels");
  std::int64_t channel_mod = c_rows == 1 ? 1 : channels;

  Tensor out(x.shape, attrs.out_dtype);
  if (kern::parallel_enabled())
    kern::multithreshold_omp(x.values.data(), out.values.data(), x.numel(),
                             channel_mod, attrs.thresholds, attrs.out_scale,
                             attrs.out_bias);
  else
    kern::multithreshold_serial(x.values.data(), out.values.data(), x.numel(),
                                channel_mod, attrs.thresholds, attrs.out_scale,
                                attrs.out_bias);
  if (attrs.out_dtype.is_int()) {
    double lo = double(attrs.out_dtype.min()), hi = double(attrs.out_dtype.max());
    for (double v : out.values)
      if (v < lo || v > hi)
        throw RangeError("multithreshold: output " + std::to_string(v) +
                         " outside declared " + attrs.out_dtype.str());
  }
  return out;
}

MultiThresholdAttrs gen_thresholds(ActivationKind kind,
                                   const QuantParams& qp,
                                   std::vector<std::string>* diagnostics) {
  check_quant_params(qp);
  std::int64_t L = qp.levels();
  MultiThresholdAttrs attrs;
  attrs.thresholds.assign(1, std::vector<double>(L));
  int unreachable = 0;
  for (std::int64_t k = 1; k <= L; ++k) {
    // Decision boundary between levels qmin+k-1 and qmin+k.
    double bnd = qp.scale * (double(qp.qmin()) + double(k) - 0.5 -
                             double(qp.zero_point));
    double t = inverse_at_boundary(kind, bnd);
    if (std::isinf(t)) ++unreachable;
    attrs.thresholds[0][k - 1] = t;
  }
  if (unreachable > 0 && diagnostics)
    diagnostics->push_back("UnreachableLevels: " + std::to_string(unreachable) +
                           " of " + std::to_string(L) +
                           " boundaries outside the activation range");
  attrs.out_scale = qp.scale;
  attrs.out_bias = qp.scale * double(qp.qmin() - qp.zero_point);
  attrs.out_dtype = DataType::f64();
  return attrs;
}

void set_multithreshold_attrs(Node& n, const MultiThresholdAttrs& attrs) {
  n.attributes["thresholds"] = attrs.thresholds;
  n.attributes["out_scale"] = attrs.out_scale;
  n.attributes["out_bias"] = attrs.out_bias;
  n.attributes["out_dtype"] = attrs.out_dtype;
}

MultiThresholdAttrs multithreshold_attrs(const Node& n) {
  MultiThresholdAttrs attrs;
  attrs.thresholds = std::get<Matrix>(n.attributes.at("thresholds"));
  attrs.out_scale = n.attr_f("out_scale");
  attrs.out_bias = n.attr_f("out_bias");
  attrs.out_dtype = std::get<DataType>(n.attributes.at("out_dtype"));
  return attrs;
}

// ---------------------------------------------------------------------------
// convert_quant_to_thresholds_pass

namespace {

ActivationKind kind_of_op(const std::string& op) {
  if (op == "Tanh") return ActivationKind::TANH;
  if (op == "Sigmoid") return ActivationKind::SIGMOID;
  if (op == "ReLU") return ActivationKind::RELU;
  throw UnsupportedActivation("no threshold lowering for op " + op);
}

bool is_activation_op(const std::string& op) {
  return op == "Tanh" || op == "Sigmoid" || op == "ReLU";
}

std::string fresh_name(const Graph& g, std::string base) {
  if (!g.has_tensor(base)) return base;
  for (int i = 2;; ++i) {
    std::string cand = base + "_" + std::to_string(i);
    if (!g.has_tensor(cand)) return cand;
  }
}

// MultiThreshold(raw count) [+ Add(qmin - zp)] [+ Mul(scale)] producing
// `final_out` from `input`. `emit_scale` is false at integer state
// boundaries, where the consumer side dequantizes.
struct LoweredSite {
  std::vector<Node> nodes;
  std::map<std::string, Tensor> inits;
};

LoweredSite lower_quantizer(const Graph& g, const std::string& base,
                            ActivationKind kind, const QuantParams& qp,
                            const std::string& input,
                            const std::string& final_out, bool emit_scale,
                            PassReport& report) {
  LoweredSite site;
  std::vector<std::string> diags;
  MultiThresholdAttrs gen = gen_thresholds(kind, qp, &diags);
  for (auto& d : diags) report.diagnostics.push_back(base + ": " + d);

  std::int64_t L = qp.levels();
  std::int64_t offset = qp.qmin() - qp.zero_point;
  bool emit_off = offset != 0;
  bool emit_mul = emit_scale && qp.scale != 1.0;

  MultiThresholdAttrs raw;
  raw.thresholds = gen.thresholds;
  raw.out_scale = 1.0;
  raw.out_bias = 0.0;
  raw.out_dtype = fit_int_range(0, L);

  Node mt;
  mt.op_type = "MultiThreshold";
  mt.name = base + "_mt";
  mt.inputs = {input};
  std::string cur = (emit_off || emit_mul) ? fresh_name(g, base + "_cnt")
                                           : final_out;
  mt.outputs = {cur};
  set_multithreshold_attrs(mt, raw);
  site.nodes.push_back(std::move(mt));

  if (emit_off) {
    std::string cname = fresh_name(g, base + "_off");
    site.inits[cname] =
        Tensor::scalar(double(offset), fit_int_range(offset, offset));
    Node add;
    add.op_type = "Add";
    add.name = base + "_code";
    add.inputs = {cur, cname};
    cur = emit_mul ? fresh_name(g, base + "_codet") : final_out;
    add.outputs = {cur};
    site.nodes.push_back(std::move(add));
  }
  if (emit_mul) {
    std::string cname = fresh_name(g, base + "_scale");
    site.inits[cname] = Tensor::scalar(qp.scale);
    Node mul;
    mul.op_type = "Mul";
    mul.name = base + "_deq";
    mul.inputs = {cur, cname};
    mul.outputs = {final_out};
    site.nodes.push_back(std::move(mul));
  }
  return site;
}

Graph convert_one_graph(const Graph& graph, PassReport& report) {
  Graph cur = graph;
  for (;;) {
    bool changed = false;

    // (Tanh|Sigmoid|ReLU) -> Quant pairs
    auto act_pred = [](const Graph&, const Node& n) {
      return is_activation_op(n.op_type);
    };
    for (const auto& chain :
         find_pattern(cur, {act_pred, op_is("Quant")})) {
      const Node& act = cur.nodes[chain[0]];
      const Node& q = cur.nodes[chain[1]];
      QuantParams qp = quant_attrs(q);
      auto site = lower_quantizer(cur, q.name, kind_of_op(act.op_type), qp,
                                  act.inputs[0], q.outputs[0], true, report);
      cur = replace_chain(cur, chain, site.nodes, site.inits);
      report.applications += 1;
      report.nodes_removed += 2;
      report.nodes_added += int(site.nodes.size());
      changed = true;
      break;
    }
    if (changed) continue;

    // standalone Quant (identity thresholds)
    for (int i = 0; i < int(cur.nodes.size()); ++i) {
      if (cur.nodes[i].op_type != "Quant") continue;
      const Node& q = cur.nodes[i];
      QuantParams qp = quant_attrs(q);
      auto site = lower_quantizer(cur, q.name, ActivationKind::IDENTITY, qp,
                                  q.inputs[0], q.outputs[0], true, report);
      cur = replace_chain(cur, {i}, site.nodes, site.inits);
      report.applications += 1;
      report.nodes_removed += 1;
      report.nodes_added += int(site.nodes.size());
      changed = true;
      break;
    }
    if (changed) continue;

    // QuantizeLinear [-> Clip]: integer codes out (Scan state boundaries).
    for (int i = 0; i < int(cur.nodes.size()); ++i) {
      if (cur.nodes[i].op_type != "QuantizeLinear") continue;
      const Node& q = cur.nodes[i];
      QuantParams qp = quant_attrs(q);
      NodeChain chain = {i};
      std::string out_name = q.outputs[0];
      auto pairs = find_pattern(cur, {op_is("QuantizeLinear"), op_is("Clip")});
      for (const auto& p : pairs) {
        if (p[0] != i) continue;
        const Node& clip = cur.nodes[p[1]];
        if (std::llround(clip.attr_f("min")) == qp.qmin() &&
            std::llround(clip.attr_f("max")) == qp.qmax()) {
          chain = p;
          out_name = clip.outputs[0];
        } else {
          report.diagnostics.push_back(
              "InconsistentQCDQ: Clip after " + q.name +
              " does not match the quantizer range; Clip kept");
        }
        break;
      }
      auto site = lower_quantizer(cur, q.name, ActivationKind::IDENTITY, qp,
                                  q.inputs[0], out_name, false, report);
      cur = replace_chain(cur, chain, site.nodes, site.inits);
      report.applications += 1;
      report.nodes_removed += int(chain.size());
      report.nodes_added += int(site.nodes.size());
      changed = true;
      break;
    }
    if (changed) continue;

    // standalone DequantizeLinear: [Add(-zp) ->] Mul(scale)
    for (int i = 0; i < int(cur.nodes.size()); ++i) {
      if (cur.nodes[i].op_type != "DequantizeLinear") continue;
      const Node& d = cur.nodes[i];
      QuantParams qp = quant_attrs(d);
      std::vector<Node> repl;
      std::map<std::string, Tensor> inits;
      std::string in_name = d.inputs[0];
      if (qp.zero_point != 0) {
        std::string cname = fresh_name(cur, d.name + "_negzp");
        inits[cname] = Tensor::scalar(
            double(-qp.zero_point), fit_int_range(-qp.zero_point, -qp.zero_point));
        Node add;
        add.op_type = "Add";
        add.name = d.name + "_shift";
        add.inputs = {in_name, cname};
        add.outputs = {fresh_name(cur, d.name + "_shifted")};
        in_name = add.outputs[0];
        repl.push_back(std::move(add));
      }
      std::string cname = fresh_name(cur, d.name + "_scale");
      inits[cname] = Tensor::scalar(qp.scale);
      Node mul;
      mul.op_type = "Mul";
      mul.name = d.name + "_scl";
      mul.inputs = {in_name, cname};
      mul.outputs = {d.outputs[0]};
      repl.push_back(std::move(mul));
      cur = replace_chain(cur, {i}, repl, inits);
      report.applications += 1;
      report.nodes_removed += 1;
      report.nodes_added += int(repl.size());
      changed = true;
      break;
    }

    if (!changed) break;
  }
  return cur;
}

Graph convert_over_bodies(const Graph& g, PassReport& report) {
  Graph top = convert_one_graph(g, report);
  for (auto& n : top.nodes) {
    if (n.op_type == "Scan" && n.has_attr("body")) {
      auto body = std::get<GraphPtr>(n.attributes.at("body"));
      n.attributes["body"] =
          std::make_shared<Graph>(convert_over_bodies(*body, report));
    }
  }
  return top;
}

}  // namespace

PassResult convert_quant_to_thresholds_pass(const Graph& g) {
  PassReport report;
  report.pass = "convert_quant_to_thresholds";
  Graph out = convert_over_bodies(g, report);
  return {std::move(out), std::move(report)};
}

}  // namespace qrnn
