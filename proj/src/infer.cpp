// SPDX-License-Identifier: Apache-2.0
#include "qrnn/infer.hpp"

#include <algorithm>
#include <cmath>

#include "qrnn/quant.hpp"
#include "qrnn/threshold.hpp"

namespace qrnn {

namespace {

struct Info {
  std::vector<std::int64_t> shape;
  DataType dtype;
};

std::int64_t int_min_of(const DataType& d) { return d.min(); }
std::int64_t int_max_of(const DataType& d) { return d.max(); }

Info lookup(const std::map<std::string, Info>& env, const std::string& name,
            const std::string& who) {
  auto it = env.find(name);
  if (it != env.end()) return it->second;
  throw TypeConflict("node " + who + ": unknown dtype for input " + name);
}

// Integer range of an elementwise operand. Constants contribute their actual
// values, not the full dtype span, so converted code offsets stay tight.
std::pair<std::int64_t, std::int64_t> int_range(const Graph& g,
                                                const std::string& name,
                                                const Info& info) {
  auto it = g.initializers.find(name);
  if (it != g.initializers.end() && !it->second.values.empty()) {
    double lo = it->second.values[0], hi = it->second.values[0];
    for (double v : it->second.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return {std::int64_t(lo), std::int64_t(hi)};
  }
  return {info.dtype.min(), info.dtype.max()};
}

bool both_int(const Info& a, const Info& b) {
  return a.dtype.is_int() && b.dtype.is_int();
}

std::vector<std::int64_t> broadcast_shape(const Info& a, const Info& b,
                                          const std::string& who) {
  std::int64_t na = Tensor::numel_of(a.shape), nb = Tensor::numel_of(b.shape);
  if (a.shape == b.shape) return a.shape;
  if (nb == 1) return a.shape;
  if (na == 1) return b.shape;
  // per-channel vector against NCHW
  if (a.shape.size() == 4 && b.shape.size() == 1 && b.shape[0] == a.shape[1])
    return a.shape;
  if (b.shape.size() == 4 && a.shape.size() == 1 && a.shape[0] == b.shape[1])
    return b.shape;
  throw TypeConflict("node " + who + ": incompatible elementwise shapes");
}

}  // namespace

DataType matmul_accumulator_dtype(const DataType& a, const DataType& b,
                                  std::int64_t reduction) {
  std::int64_t amin = int_min_of(a), amax = int_max_of(a);
  std::int64_t bmin = int_min_of(b), bmax = int_max_of(b);
  std::int64_t prods[4] = {amin * bmin, amin * bmax, amax * bmin, amax * bmax};
  std::int64_t pmin = *std::min_element(prods, prods + 4);
  std::int64_t pmax = *std::max_element(prods, prods + 4);
  return fit_int_range(reduction * std::min<std::int64_t>(pmin, 0),
                       reduction * std::max<std::int64_t>(pmax, 0));
}

Graph infer_types(const Graph& g) {
  Graph out = g.clone();
  std::map<std::string, Info> env;
  for (const auto& in : out.inputs) env[in.name] = {in.shape, in.dtype};
  for (const auto& [name, t] : out.initializers) env[name] = {t.shape, t.dtype};

  auto order = topo_sort(out);
  for (const Node* np : order) {
    // topo_sort returns pointers into out.nodes; find the mutable node for
    // Scan body replacement.
    Node& n = *const_cast<Node*>(np);
    auto in = [&](size_t i) { return lookup(env, n.inputs.at(i), n.name); };
    std::vector<std::pair<std::string, Info>> results;

    if (n.op_type == "MatMul") {
      Info a = in(0), b = in(1);
      if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
        throw TypeConflict("node " + n.name + ": MatMul shape mismatch");
      DataType dt = DataType::f64();
      if (both_int(a, b))
        dt = matmul_accumulator_dtype(a.dtype, b.dtype, a.shape[1]);
      results.emplace_back(n.outputs[0],
                           Info{{a.shape[0], b.shape[1]}, dt});
    } else if (n.op_type == "Add" || n.op_type == "Sub" || n.op_type == "Mul") {
      Info a = in(0), b = in(1);
      auto shape = broadcast_shape(a, b, n.name);
      DataType dt = DataType::f64();
      if (both_int(a, b)) {
        auto [amin, amax] = int_range(out, n.inputs[0], a);
        auto [bmin, bmax] = int_range(out, n.inputs[1], b);
        if (n.op_type == "Add")
          dt = fit_int_range(amin + bmin, amax + bmax);
        else if (n.op_type == "Sub")
          dt = fit_int_range(amin - bmax, amax - bmin);
        else {
          std::int64_t p[4] = {amin * bmin, amin * bmax, amax * bmin,
                               amax * bmax};
          dt = fit_int_range(*std::min_element(p, p + 4),
                             *std::max_element(p, p + 4));
        }
      }
      results.emplace_back(n.outputs[0], Info{shape, dt});
    } else if (n.op_type == "Tanh" || n.op_type == "Sigmoid") {
      results.emplace_back(n.outputs[0], Info{in(0).shape, DataType::f64()});
    } else if (n.op_type == "ReLU") {
      Info a = in(0);
      results.emplace_back(n.outputs[0], a);
    } else if (n.op_type == "QuantizeLinear") {
      QuantParams qp = quant_attrs(n);
      results.emplace_back(n.outputs[0], Info{in(0).shape, qp.dtype()});
    } else if (n.op_type == "Clip") {
      results.emplace_back(n.outputs[0], in(0));
    } else if (n.op_type == "DequantizeLinear" || n.op_type == "Quant") {
      results.emplace_back(n.outputs[0], Info{in(0).shape, DataType::f64()});
    } else if (n.op_type == "MultiThreshold") {
      MultiThresholdAttrs attrs = multithreshold_attrs(n);
      results.emplace_back(n.outputs[0], Info{in(0).shape, attrs.out_dtype});
    } else if (n.op_type == "Concat") {
      Info a = in(0);
      std::int64_t axis =
          n.has_attr("axis") ? std::llround(n.attr_f("axis"))
                             : static_cast<std::int64_t>(a.shape.size()) - 1;
      auto shape = a.shape;
      for (size_t i = 1; i < n.inputs.size(); ++i) {
        Info b = in(i);
        if (b.dtype != a.dtype)
          throw TypeConflict("node " + n.name + ": Concat dtype mismatch");
        if (b.shape.size() != a.shape.size())
          throw TypeConflict("node " + n.name + ": Concat rank mismatch");
        shape[axis] += b.shape[axis];
      }
      results.emplace_back(n.outputs[0], Info{shape, a.dtype});
    } else if (n.op_type == "Reshape") {
      Info a = in(0);
      const auto& target = std::get<Tensor>(n.attributes.at("shape"));
      std::vector<std::int64_t> shape;
      for (double v : target.values) shape.push_back(std::llround(v));
      if (Tensor::numel_of(shape) != Tensor::numel_of(a.shape))
        throw TypeConflict("node " + n.name + ": Reshape element count changes");
      results.emplace_back(n.outputs[0], Info{shape, a.dtype});
    } else if (n.op_type == "Transpose") {
      Info a = in(0);
      const auto& perm = std::get<Tensor>(n.attributes.at("perm"));
      std::vector<std::int64_t> shape(a.shape.size());
      for (size_t i = 0; i < shape.size(); ++i)
        shape[i] = a.shape[std::llround(perm.values.at(i))];
      results.emplace_back(n.outputs[0], Info{shape, a.dtype});
    } else if (n.op_type == "BatchNorm") {
      Info a = in(0);
      results.emplace_back(n.outputs[0], Info{a.shape, DataType::f64()});
    } else if (n.op_type == "Conv2D") {
      Info x = in(0), w = in(1);
      if (x.shape.size() != 4 || w.shape.size() != 4)
        throw TypeConflict("node " + n.name + ": Conv2D expects rank-4 tensors");
      std::int64_t stride = std::llround(n.attr_f("stride"));
      std::int64_t pad = std::llround(n.attr_f("pad"));
      std::int64_t ho = (x.shape[2] + 2 * pad - w.shape[2]) / stride + 1;
      std::int64_t wo = (x.shape[3] + 2 * pad - w.shape[3]) / stride + 1;
      DataType dt = DataType::f64();
      if (both_int(x, w)) {
        std::int64_t red = w.shape[1] * w.shape[2] * w.shape[3];
        dt = matmul_accumulator_dtype(x.dtype, w.dtype, red);
      }
      results.emplace_back(n.outputs[0],
                           Info{{x.shape[0], w.shape[0], ho, wo}, dt});
    } else if (n.op_type == "Scan") {
      auto body_ptr = std::get<GraphPtr>(n.attributes.at("body"));
      Graph body = *body_ptr;
      std::int64_t n_scan = std::llround(n.attr_f("scan_input_count"));
      std::int64_t n_state =
          static_cast<std::int64_t>(body.inputs.size()) - n_scan;
      if (n_state < 0 ||
          n.inputs.size() != body.inputs.size())
        throw TypeConflict("node " + n.name + ": Scan arity mismatch");
      std::int64_t seq = 0;
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(n.inputs.size());
           ++i) {
        Info outer = in(i);
        if (i < n_state) {
          body.inputs[i].shape = outer.shape;
          body.inputs[i].dtype = outer.dtype;
        } else {
          seq = outer.shape.at(0);
          auto sliced = outer.shape;
          sliced[0] = 1;
          body.inputs[i].shape = sliced;
          body.inputs[i].dtype = outer.dtype;
        }
      }
      Graph inferred_body = infer_types(body);
      auto body_info = [&](const std::string& t) {
        return tensor_info(inferred_body, t);
      };
      // State outputs must stay dtype-stable with the state inputs.
      for (std::int64_t i = 0; i < n_state; ++i) {
        ValueInfo vo = body_info(inferred_body.outputs.at(i));
        if (vo.dtype != body.inputs[i].dtype)
          throw TypeConflict("node " + n.name + ": state " +
                             body.inputs[i].name + " changes dtype across iterations");
      }
      for (std::int64_t i = 0;
           i < static_cast<std::int64_t>(n.outputs.size()); ++i) {
        if (i < n_state) {
          ValueInfo vo = body_info(inferred_body.outputs.at(i));
          results.emplace_back(n.outputs[i], Info{vo.shape, vo.dtype});
        } else {
          ValueInfo vo = body_info(inferred_body.outputs.at(i));
          auto shape = vo.shape;
          if (!shape.empty() && shape[0] == 1)
            shape[0] = seq;
          else
            shape.insert(shape.begin(), seq);
          results.emplace_back(n.outputs[i], Info{shape, vo.dtype});
        }
      }
      n.attributes["body"] = std::make_shared<Graph>(std::move(inferred_body));
    } else {
      throw TypeConflict("node " + n.name + ": no type rule for op " +
                         n.op_type);
    }

    for (auto& [name, info] : results) {
      env[name] = info;
      bool is_graph_input = false;
      for (const auto& gi : out.inputs)
        if (gi.name == name) is_graph_input = true;
      if (!is_graph_input && !out.initializers.count(name))
        out.value_info[name] = ValueInfo{info.shape, info.dtype};
    }
  }
  return out;
}

ValueInfo tensor_info(const Graph& g, const std::string& name) {
  for (const auto& in : g.inputs)
    if (in.name == name) return ValueInfo{in.shape, in.dtype};
  auto it = g.initializers.find(name);
  if (it != g.initializers.end())
    return ValueInfo{it->second.shape, it->second.dtype};
  auto vi = g.value_info.find(name);
  if (vi != g.value_info.end()) return vi->second;
  throw TypeConflict("no type information for tensor " + name);
}

}  // namespace qrnn
