// SPDX-License-Identifier: Apache-2.0
#include "qrnn/passes.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "qrnn/infer.hpp"

namespace qrnn {

namespace {

std::string fresh_name(const Graph& g, std::string base) {
  if (!g.has_tensor(base)) return base;
  for (int i = 2;; ++i) {
    std::string cand = base + "_" + std::to_string(i);
    if (!g.has_tensor(cand)) return cand;
  }
}

const Tensor* find_const(const Graph& g, const std::string& name) {
  auto it = g.initializers.find(name);
  return it == g.initializers.end() ? nullptr : &it->second;
}

// Binary node with exactly one constant operand.
struct BinSplit {
  std::string data;
  std::string const_name;
  const Tensor* const_val;
};

std::optional<BinSplit> split_const_binary(const Graph& g, const Node& n) {
  if (n.inputs.size() != 2) return std::nullopt;
  const Tensor* c0 = find_const(g, n.inputs[0]);
  const Tensor* c1 = find_const(g, n.inputs[1]);
  if ((c0 != nullptr) == (c1 != nullptr)) return std::nullopt;
  if (c1) return BinSplit{n.inputs[0], n.inputs[1], c1};
  return BinSplit{n.inputs[1], n.inputs[0], c0};
}

bool all_integral(const std::vector<double>& v) {
  for (double x : v)
    if (x != std::floor(x)) return false;
  return true;
}

Tensor make_const(std::vector<std::int64_t> shape, std::vector<double> values,
                  bool want_int) {
  Tensor t(std::move(shape), DataType::f64(), std::move(values));
  if (want_int && all_integral(t.values)) {
    double lo = *std::min_element(t.values.begin(), t.values.end());
    double hi = *std::max_element(t.values.begin(), t.values.end());
    t.dtype = fit_int_range(std::int64_t(lo), std::int64_t(hi));
  }
  return t;
}

// Elementwise combine of two constants with scalar/tensor broadcast.
Tensor combine_consts(const Tensor& a, const Tensor& b, char op) {
  const Tensor& big = a.numel() >= b.numel() ? a : b;
  if (a.numel() != b.numel() && a.numel() != 1 && b.numel() != 1)
    throw ShapeMismatch("cannot combine constants of unequal size");
  std::vector<double> out(big.numel());
  for (std::int64_t i = 0; i < big.numel(); ++i) {
    double av = a.values[a.numel() == 1 ? 0 : i];
    double bv = b.values[b.numel() == 1 ? 0 : i];
    out[i] = op == '+' ? av + bv : av * bv;
  }
  return make_const(big.shape, std::move(out),
                    a.dtype.is_int() && b.dtype.is_int());
}

Node binary_node(std::string op, std::string name, std::string in0,
                 std::string in1, std::string out) {
  Node n;
  n.op_type = std::move(op);
  n.name = std::move(name);
  n.inputs = {std::move(in0), std::move(in1)};
  n.outputs = {std::move(out)};
  return n;
}

void prune_unused_initializers(Graph& g) {
  std::set<std::string> used(g.outputs.begin(), g.outputs.end());
  for (const auto& n : g.nodes)
    for (const auto& in : n.inputs) used.insert(in);
  for (auto it = g.initializers.begin(); it != g.initializers.end();)
    it = used.count(it->first) ? std::next(it) : g.initializers.erase(it);
}

// One-rewrite step: returns the rewritten graph or nullopt at local fixpoint
// (collecting skip diagnostics only on that last sweep).
using RewriteFn =
    std::function<std::optional<Graph>(const Graph&, PassReport&, bool)>;

Graph run_to_fixpoint(const Graph& g, const RewriteFn& fn, PassReport& rep) {
  Graph cur = g;
  bool local_change = false;
  for (;;) {
    auto next = fn(cur, rep, false);
    if (!next) {
      fn(cur, rep, true);  // diagnostics sweep
      break;
    }
    cur = std::move(*next);
    rep.applications += 1;
    local_change = true;
  }
  for (auto& n : cur.nodes) {
    if (n.op_type == "Scan" && n.has_attr("body")) {
      auto body = std::get<GraphPtr>(n.attributes.at("body"));
      n.attributes["body"] =
          std::make_shared<Graph>(run_to_fixpoint(*body, fn, rep));
    }
  }
  // Rewrites can orphan constants (absorbed scales/biases); drop them.
  if (local_change) prune_unused_initializers(cur);
  return cur;
}

PassResult make_pass(const std::string& name, const Graph& g,
                     const RewriteFn& fn) {
  PassReport rep;
  rep.pass = name;
  Graph out = run_to_fixpoint(g, fn, rep);
  return {std::move(out), std::move(rep)};
}

bool exclusive_link(const Graph& g,
                    const std::map<std::string, std::vector<int>>& consumers,
                    const std::string& tensor) {
  auto it = consumers.find(tensor);
  if (it == consumers.end() || it->second.size() != 1) return false;
  for (const auto& o : g.outputs)
    if (o == tensor) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// moves

PassResult move_add_past_mul(const Graph& g) {
  auto fn = [](const Graph& cur, PassReport&,
               bool diag) -> std::optional<Graph> {
    auto add_pred = [](const Graph& gr, const Node& n) {
      return n.op_type == "Add" && split_const_binary(gr, n).has_value();
    };
    auto mul_pred = [](const Graph& gr, const Node& n) {
      return n.op_type == "Mul" && split_const_binary(gr, n).has_value();
    };
    for (const auto& chain : find_pattern(cur, {add_pred, mul_pred})) {
      if (diag) continue;
      const Node& add = cur.nodes[chain[0]];
      const Node& mul = cur.nodes[chain[1]];
      auto as = *split_const_binary(cur, add);
      auto ms = *split_const_binary(cur, mul);
      Tensor ab = combine_consts(*as.const_val, *ms.const_val, '*');
      std::string mid = fresh_name(cur, mul.name + "_pre");
      std::string ab_name = fresh_name(cur, add.name + "_x_" + ms.const_name);
      std::vector<Node> repl = {
          binary_node("Mul", mul.name, as.data, ms.const_name, mid),
          binary_node("Add", add.name, mid, ab_name, mul.outputs[0])};
      return replace_chain(cur, chain, repl, {{ab_name, ab}});
    }
    return std::nullopt;
  };
  return make_pass("move_add_past_mul", g, fn);
}

PassResult move_scalar_add_past_matmul(const Graph& g) {
  auto fn = [](const Graph& cur, PassReport&,
               bool diag) -> std::optional<Graph> {
    auto add_pred = [](const Graph& gr, const Node& n) {
      auto s = split_const_binary(gr, n);
      return n.op_type == "Add" && s && s->const_val->is_scalar();
    };
    for (const auto& chain : find_pattern(cur, {add_pred, op_is("MatMul")})) {
      const Node& add = cur.nodes[chain[0]];
      const Node& mm = cur.nodes[chain[1]];
      // The moved Add must sit on the data operand; the weights must be
      // constant so the bias row can be computed.
      if (mm.inputs[0] != add.outputs[0]) continue;
      const Tensor* w = find_const(cur, mm.inputs[1]);
      if (!w || w->shape.size() != 2) continue;
      if (diag) continue;
      auto as = *split_const_binary(cur, add);
      double a = as.const_val->values[0];
      std::int64_t k = w->shape[0], n_cols = w->shape[1];
      std::vector<double> bias(n_cols, 0.0);
      for (std::int64_t j = 0; j < n_cols; ++j) {
        double colsum = 0.0;
        for (std::int64_t r = 0; r < k; ++r) colsum += w->values[r * n_cols + j];
        bias[j] = a * colsum;
      }
      std::string mid = fresh_name(cur, mm.name + "_pre");
      std::string bias_name = fresh_name(cur, add.name + "_post");
      std::vector<Node> repl = {
          binary_node("MatMul", mm.name, as.data, mm.inputs[1], mid),
          binary_node("Add", add.name, mid, bias_name, mm.outputs[0])};
      return replace_chain(
          cur, chain, repl,
          {{bias_name, make_const({1, n_cols}, std::move(bias), false)}});
    }
    return std::nullopt;
  };
  return make_pass("move_scalar_add_past_matmul", g, fn);
}

PassResult move_scalar_mul_past_matmul(const Graph& g) {
  auto fn = [](const Graph& cur, PassReport&,
               bool diag) -> std::optional<Graph> {
    auto mul_pred = [](const Graph& gr, const Node& n) {
      auto s = split_const_binary(gr, n);
      return n.op_type == "Mul" && s && s->const_val->is_scalar();
    };
    for (const auto& chain : find_pattern(cur, {mul_pred, op_is("MatMul")})) {
      if (diag) continue;
      const Node& mul = cur.nodes[chain[0]];
      const Node& mm = cur.nodes[chain[1]];
      auto ms = *split_const_binary(cur, mul);
      std::string mid = fresh_name(cur, mm.name + "_pre");
      std::string other = mm.inputs[0] == mul.outputs[0] ? mm.inputs[1]
                                                         : mm.inputs[0];
      std::vector<std::string> mm_inputs =
          mm.inputs[0] == mul.outputs[0]
              ? std::vector<std::string>{ms.data, other}
              : std::vector<std::string>{other, ms.data};
      Node mm2;
      mm2.op_type = "MatMul";
      mm2.name = mm.name;
      mm2.inputs = mm_inputs;
      mm2.outputs = {mid};
      std::vector<Node> repl = {
          mm2, binary_node("Mul", mul.name, mid, ms.const_name, mm.outputs[0])};
      return replace_chain(cur, chain, repl);
    }
    return std::nullopt;
  };
  return make_pass("move_scalar_mul_past_matmul", g, fn);
}

namespace {

// Shared engine for the two eltwise moves. Both operands of an eltwise
// Add/Mul must be produced by exclusive scalar-constant Muls.
PassResult move_linear_past_eltwise(const Graph& g, const std::string& elt_op,
                                    const std::string& pass_name,
                                    bool require_equal_scales) {
  auto fn = [elt_op, require_equal_scales, pass_name](
                const Graph& cur, PassReport& rep,
                bool diag) -> std::optional<Graph> {
    auto consumers = consumer_map(cur);
    std::map<std::string, int> producer;
    for (int i = 0; i < int(cur.nodes.size()); ++i)
      for (const auto& o : cur.nodes[i].outputs) producer[o] = i;

    for (int i = 0; i < int(cur.nodes.size()); ++i) {
      const Node& elt = cur.nodes[i];
      if (elt.op_type != elt_op || elt.inputs.size() != 2) continue;
      if (find_const(cur, elt.inputs[0]) || find_const(cur, elt.inputs[1]))
        continue;  // constant operand: not a two-branch site
      auto p0 = producer.find(elt.inputs[0]);
      auto p1 = producer.find(elt.inputs[1]);
      if (p0 == producer.end() || p1 == producer.end() ||
          p0->second == p1->second)
        continue;
      const Node& b0 = cur.nodes[p0->second];
      const Node& b1 = cur.nodes[p1->second];
      if (!exclusive_link(cur, consumers, elt.inputs[0]) ||
          !exclusive_link(cur, consumers, elt.inputs[1]))
        continue;
      auto s0 = split_const_binary(cur, b0);
      auto s1 = split_const_binary(cur, b1);
      if (b0.op_type == "Add" || b1.op_type == "Add") {
        if (diag && (b0.op_type == "Add" ? s0 : s1))
          rep.diagnostics.push_back(pass_name + ": branch into " + elt.name +
                                    " ends in Add; bias breaks the identity");
        continue;
      }
      if (b0.op_type != "Mul" || b1.op_type != "Mul" || !s0 || !s1 ||
          !s0->const_val->is_scalar() || !s1->const_val->is_scalar())
        continue;
      double c0 = s0->const_val->values[0];
      double c1 = s1->const_val->values[0];
      if (require_equal_scales && c0 != c1) {
        if (diag)
          rep.diagnostics.push_back(pass_name + ": unequal branch scales at " +
                                    elt.name + "; eltwise add kept in place");
        continue;
      }
      if (diag) continue;

      double merged = require_equal_scales ? c0 : c0 * c1;
      std::string mid = fresh_name(cur, elt.name + "_raw");
      std::string cname = fresh_name(cur, elt.name + "_s");
      Node elt2;
      elt2.op_type = elt_op;
      elt2.name = elt.name;
      elt2.inputs = {s0->data, s1->data};
      elt2.outputs = {mid};
      std::vector<Node> repl = {
          elt2, binary_node("Mul", elt.name + "_post", mid, cname,
                            elt.outputs[0])};
      return replace_chain(cur, {p0->second, p1->second, i}, repl,
                           {{cname, Tensor::scalar(merged)}});
    }
    return std::nullopt;
  };
  return make_pass(pass_name, g, fn);
}

}  // namespace

PassResult move_linear_past_eltwise_mul(const Graph& g) {
  return move_linear_past_eltwise(g, "Mul", "move_linear_past_eltwise_mul",
                                  false);
}

PassResult move_linear_past_eltwise_add(const Graph& g) {
  return move_linear_past_eltwise(g, "Add", "move_linear_past_eltwise_add",
                                  true);
}

// ---------------------------------------------------------------------------
// collapses

namespace {

PassResult collapse_repeated(const Graph& g, const std::string& op,
                             const std::string& pass_name) {
  char combine = op == "Add" ? '+' : '*';
  auto fn = [op, combine](const Graph& cur, PassReport&,
                          bool diag) -> std::optional<Graph> {
    auto pred = [op](const Graph& gr, const Node& n) {
      return n.op_type == op && split_const_binary(gr, n).has_value();
    };
    for (const auto& chain : find_pattern(cur, {pred, pred})) {
      if (diag) continue;
      const Node& first = cur.nodes[chain[0]];
      const Node& second = cur.nodes[chain[1]];
      auto fs = *split_const_binary(cur, first);
      auto ss = *split_const_binary(cur, second);
      Tensor combined = combine_consts(*fs.const_val, *ss.const_val, combine);
      std::string cname = fresh_name(cur, first.name + "_" + second.name + "_c");
      std::vector<Node> repl = {binary_node(
          op, second.name, fs.data, cname, second.outputs[0])};
      return replace_chain(cur, chain, repl, {{cname, combined}});
    }
    return std::nullopt;
  };
  return make_pass(pass_name, g, fn);
}

}  // namespace

PassResult collapse_repeated_add(const Graph& g) {
  return collapse_repeated(g, "Add", "collapse_repeated_add");
}

PassResult collapse_repeated_mul(const Graph& g) {
  return collapse_repeated(g, "Mul", "collapse_repeated_mul");
}

// ---------------------------------------------------------------------------
// threshold absorption

namespace {

// Expands a 1-row threshold matrix to `rows` identical rows if needed.
Matrix expand_rows(const Matrix& t, std::int64_t rows) {
  if (std::int64_t(t.size()) == rows) return t;
  if (t.size() != 1)
    throw ShapeMismatch("threshold matrix rows do not match channel count");
  return Matrix(rows, t[0]);
}

PassResult absorb_into_mt(const Graph& g, const std::string& op,
                          const std::string& pass_name) {
  bool is_mul = op == "Mul";
  auto fn = [op, is_mul, pass_name](const Graph& cur, PassReport& rep,
                                    bool diag) -> std::optional<Graph> {
    auto pred = [op](const Graph& gr, const Node& n) {
      return n.op_type == op && split_const_binary(gr, n).has_value();
    };
    std::optional<Graph> typed;  // lazy, for per-channel shape checks
    for (const auto& chain :
         find_pattern(cur, {pred, op_is("MultiThreshold")})) {
      const Node& lin = cur.nodes[chain[0]];
      const Node& mt = cur.nodes[chain[1]];
      auto ls = *split_const_binary(cur, lin);
      const Tensor& c = *ls.const_val;
      if (is_mul) {
        bool positive = true;
        for (double v : c.values) positive = positive && v > 0.0;
        if (!positive) {
          if (diag)
            rep.diagnostics.push_back(
                "NonPositiveScale: Mul before " + mt.name +
                " has a non-positive factor; threshold order would flip");
          continue;
        }
      }
      if (!c.is_scalar()) {
        // A vector constant must broadcast along the last axis (the threshold
        // channel axis); NCHW channel broadcasts stay in front of the node.
        try {
          if (!typed) typed = infer_types(cur);
          ValueInfo data_info = tensor_info(*typed, ls.data);
          if (data_info.shape.size() > 2 ||
              data_info.shape.empty() ||
              data_info.shape.back() != c.numel())
            continue;
        } catch (const Error&) {
          continue;
        }
      }
      if (diag) continue;

      MultiThresholdAttrs attrs = multithreshold_attrs(mt);
      Matrix t = c.is_scalar() ? attrs.thresholds
                               : expand_rows(attrs.thresholds, c.numel());
      for (std::int64_t r = 0; r < std::int64_t(t.size()); ++r) {
        double cv = c.values[c.is_scalar() ? 0 : r];
        for (double& v : t[r]) v = is_mul ? v / cv : v - cv;
      }
      attrs.thresholds = std::move(t);
      Node mt2 = mt;
      mt2.inputs = {ls.data};
      set_multithreshold_attrs(mt2, attrs);
      return replace_chain(cur, chain, {mt2});
    }
    return std::nullopt;
  };
  return make_pass(pass_name, g, fn);
}

}  // namespace

PassResult absorb_add_into_multithreshold(const Graph& g) {
  return absorb_into_mt(g, "Add", "absorb_add_into_multithreshold");
}

PassResult absorb_mul_into_multithreshold(const Graph& g) {
  return absorb_into_mt(g, "Mul", "absorb_mul_into_multithreshold");
}

PassResult absorb_sign_bias_into_multithreshold(const Graph& g) {
  auto fn = [](const Graph& cur, PassReport&,
               bool diag) -> std::optional<Graph> {
    auto lin_pred = [](const Graph& gr, const Node& n) {
      if (n.op_type != "Add" && n.op_type != "Mul") return false;
      auto s = split_const_binary(gr, n);
      // Only integer-valued scalar constants fold back into the producing
      // threshold node; fractional scale/bias keeps moving downstream.
      return s && s->const_val->is_scalar() &&
             s->const_val->values[0] == std::floor(s->const_val->values[0]) &&
             (n.op_type == "Add" || s->const_val->values[0] > 0.0);
    };
    for (const auto& chain :
         find_pattern(cur, {op_is("MultiThreshold"), lin_pred})) {
      if (diag) continue;
      const Node& mt = cur.nodes[chain[0]];
      const Node& lin = cur.nodes[chain[1]];
      auto ls = *split_const_binary(cur, lin);
      double c = ls.const_val->values[0];

      MultiThresholdAttrs attrs = multithreshold_attrs(mt);
      if (lin.op_type == "Add") {
        attrs.out_bias += c;
      } else {
        attrs.out_scale *= c;
        attrs.out_bias *= c;
      }
      std::int64_t L = attrs.levels();
      double lo = std::min(attrs.out_bias, attrs.out_scale * double(L) +
                                               attrs.out_bias);
      double hi = std::max(attrs.out_bias, attrs.out_scale * double(L) +
                                               attrs.out_bias);
      if (attrs.out_scale == std::floor(attrs.out_scale) &&
          attrs.out_bias == std::floor(attrs.out_bias))
        attrs.out_dtype = fit_int_range(std::int64_t(lo), std::int64_t(hi));
      else
        attrs.out_dtype = DataType::f64();

      Node mt2 = mt;
      mt2.outputs = {lin.outputs[0]};
      set_multithreshold_attrs(mt2, attrs);
      return replace_chain(cur, chain, {mt2});
    }
    return std::nullopt;
  };
  return make_pass("absorb_sign_bias_into_multithreshold", g, fn);
}

PassResult round_and_clip_thresholds(const Graph& g) {
  PassReport rep;
  rep.pass = "round_and_clip_thresholds";

  // Dtype lookups run on a typed scratch copy so an all-no-op invocation
  // leaves the graph structurally untouched.
  std::function<Graph(const Graph&)> process = [&](const Graph& graph) {
    Graph cur = graph.clone();
    Graph typed = infer_types(graph);
    for (auto& n : cur.nodes) {
      if (n.op_type == "Scan" && n.has_attr("body")) {
        auto body = std::get<GraphPtr>(n.attributes.at("body"));
        n.attributes["body"] = std::make_shared<Graph>(process(*body));
        continue;
      }
      if (n.op_type != "MultiThreshold") continue;
      ValueInfo in_info = tensor_info(typed, n.inputs[0]);
      if (!in_info.dtype.is_int()) continue;
      double lo = double(in_info.dtype.min());
      double hi = double(in_info.dtype.max()) + 1.0;  // "never satisfied"
      MultiThresholdAttrs attrs = multithreshold_attrs(n);
      bool changed = false;
      for (auto& row : attrs.thresholds) {
        for (double& t : row) {
          double v = std::ceil(t);  // for integer x: x >= t  <=>  x >= ceil(t)
          v = std::min(std::max(v, lo), hi);
          if (v != t) {
            t = v;
            changed = true;
          }
        }
      }
      if (changed) {
        set_multithreshold_attrs(n, attrs);
        rep.applications += 1;
      }
    }
    return cur;
  };

  Graph out = process(g);
  return {std::move(out), std::move(rep)};
}

// ---------------------------------------------------------------------------
// registry / pipeline

const std::vector<std::string>& pass_names() {
  static const std::vector<std::string> names = {
      "absorb_sign_bias_into_multithreshold",
      "move_add_past_mul",
      "move_scalar_add_past_matmul",
      "move_scalar_mul_past_matmul",
      "move_linear_past_eltwise_mul",
      "move_linear_past_eltwise_add",
      "collapse_repeated_add",
      "collapse_repeated_mul",
      "absorb_add_into_multithreshold",
      "absorb_mul_into_multithreshold",
      "round_and_clip_thresholds",
  };
  return names;
}

bool is_pass_name(const std::string& name) {
  const auto& names = pass_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

PassResult run_pass(const std::string& name, const Graph& g) {
  if (name == "absorb_sign_bias_into_multithreshold")
    return absorb_sign_bias_into_multithreshold(g);
  if (name == "move_add_past_mul") return move_add_past_mul(g);
  if (name == "move_scalar_add_past_matmul")
    return move_scalar_add_past_matmul(g);
  if (name == "move_scalar_mul_past_matmul")
    return move_scalar_mul_past_matmul(g);
  if (name == "move_linear_past_eltwise_mul")
    return move_linear_past_eltwise_mul(g);
  if (name == "move_linear_past_eltwise_add")
    return move_linear_past_eltwise_add(g);
  if (name == "collapse_repeated_add") return collapse_repeated_add(g);
  if (name == "collapse_repeated_mul") return collapse_repeated_mul(g);
  if (name == "absorb_add_into_multithreshold")
    return absorb_add_into_multithreshold(g);
  if (name == "absorb_mul_into_multithreshold")
    return absorb_mul_into_multithreshold(g);
  if (name == "round_and_clip_thresholds") return round_and_clip_thresholds(g);
  throw ConfigError("unknown pass: " + name);
}

const std::vector<std::string>& default_schedule() { return pass_names(); }

PipelineResult streamline_pipeline(const Graph& g,
                                   const std::vector<std::string>& schedule,
                                   int max_iterations) {
  for (const auto& name : schedule)
    if (!is_pass_name(name)) throw ConfigError("unknown pass: " + name);

  PipelineResult result;
  result.graph = g.clone();
  for (int iter = 0; iter < max_iterations; ++iter) {
    int fired = 0;
    for (const auto& name : schedule) {
      PassResult pr = run_pass(name, result.graph);
      fired += pr.report.applications;
      result.reports.push_back(pr.report);
      result.graph = std::move(pr.graph);
    }
    result.iterations = iter + 1;
    if (fired == 0) {
      result.fixpoint = true;
      return result;
    }
  }
  throw FixpointNotReached("streamline did not reach a fixpoint within " +
                           std::to_string(max_iterations) + " iterations");
}

Graph drop_terminal_dequant(const Graph& g) {
  Graph cur = g.clone();
  bool changed = true;
  while (changed) {
    changed = false;
    auto consumers = consumer_map(cur);
    for (size_t oi = 0; oi < cur.outputs.size(); ++oi) {
      const std::string& out = cur.outputs[oi];
      if (consumers.count(out)) continue;  // output feeds other nodes: keep
      for (int i = 0; i < int(cur.nodes.size()); ++i) {
        const Node& n = cur.nodes[i];
        if (n.outputs.size() != 1 || n.outputs[0] != out) continue;
        std::string data;
        if (n.op_type == "DequantizeLinear") {
          data = n.inputs[0];
        } else if (n.op_type == "Mul" || n.op_type == "Add") {
          auto s = split_const_binary(cur, n);
          if (!s) break;
          data = s->data;
        } else {
          break;
        }
        cur.outputs[oi] = data;
        cur.value_info.erase(out);
        cur.nodes.erase(cur.nodes.begin() + i);
        changed = true;
        break;
      }
      if (changed) break;
    }
  }
  prune_unused_initializers(cur);
  return cur;
}

}  // namespace qrnn
