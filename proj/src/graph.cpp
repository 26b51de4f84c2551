// SPDX-License-Identifier: Apache-2.0
#include "qrnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <set>

namespace qrnn {

namespace {

const std::set<std::string>& supported_ops() {
  static const std::set<std::string> ops = {
      "QuantizeLinear", "Clip",   "DequantizeLinear", "Quant",
      "MultiThreshold", "MatMul", "Add",              "Mul",
      "Sub",            "Tanh",   "Sigmoid",          "ReLU",
      "Conv2D",         "BatchNorm", "Scan",          "Concat",
      "Reshape",        "Transpose"};
  return ops;
}

}  // namespace

double Node::attr_f(const std::string& key) const {
  auto it = attributes.find(key);
  if (it == attributes.end())
    throw Error("node " + name + ": missing attribute " + key);
  if (auto* d = std::get_if<double>(&it->second)) return *d;
  if (auto* b = std::get_if<bool>(&it->second)) return *b ? 1.0 : 0.0;
  throw Error("node " + name + ": attribute " + key + " is not numeric");
}

bool Node::attr_b(const std::string& key) const {
  auto it = attributes.find(key);
  if (it == attributes.end())
    throw Error("node " + name + ": missing attribute " + key);
  if (auto* b = std::get_if<bool>(&it->second)) return *b;
  if (auto* d = std::get_if<double>(&it->second)) return *d != 0.0;
  throw Error("node " + name + ": attribute " + key + " is not boolean");
}

std::string Node::attr_s(const std::string& key) const {
  auto it = attributes.find(key);
  if (it == attributes.end())
    throw Error("node " + name + ": missing attribute " + key);
  return std::get<std::string>(it->second);
}

bool is_supported_op(const std::string& op_type) {
  return supported_ops().count(op_type) > 0;
}

Graph Graph::clone() const {
  Graph out = *this;
  for (auto& n : out.nodes) {
    for (auto& [key, value] : n.attributes) {
      if (auto* body = std::get_if<GraphPtr>(&value)) {
        value = std::make_shared<Graph>((*body)->clone());
      }
    }
  }
  return out;
}

const Node* Graph::find_node(const std::string& node_name) const {
  for (const auto& n : nodes)
    if (n.name == node_name) return &n;
  return nullptr;
}

bool Graph::has_tensor(const std::string& tensor_name) const {
  if (initializers.count(tensor_name)) return true;
  for (const auto& in : inputs)
    if (in.name == tensor_name) return true;
  for (const auto& n : nodes)
    for (const auto& out : n.outputs)
      if (out == tensor_name) return true;
  return false;
}

bool attr_equal(const AttrValue& a, const AttrValue& b) {
  if (a.index() != b.index()) return false;
  if (auto* ga = std::get_if<GraphPtr>(&a)) {
    auto* gb = std::get_if<GraphPtr>(&b);
    return **ga == **gb;
  }
  return a == b;
}

bool operator==(const Node& a, const Node& b) {
  if (a.op_type != b.op_type || a.name != b.name || a.inputs != b.inputs ||
      a.outputs != b.outputs)
    return false;
  if (a.attributes.size() != b.attributes.size()) return false;
  for (const auto& [key, value] : a.attributes) {
    auto it = b.attributes.find(key);
    if (it == b.attributes.end() || !attr_equal(value, it->second))
      return false;
  }
  return true;
}

bool operator==(const Graph& a, const Graph& b) {
  if (a.name != b.name || a.outputs != b.outputs) return false;
  if (a.inputs.size() != b.inputs.size()) return false;
  for (size_t i = 0; i < a.inputs.size(); ++i) {
    if (a.inputs[i].name != b.inputs[i].name ||
        a.inputs[i].shape != b.inputs[i].shape ||
        a.inputs[i].dtype != b.inputs[i].dtype)
      return false;
  }
  if (a.initializers != b.initializers) return false;
  if (a.nodes.size() != b.nodes.size()) return false;
  for (size_t i = 0; i < a.nodes.size(); ++i)
    if (!(a.nodes[i] == b.nodes[i])) return false;
  if (a.value_info.size() != b.value_info.size()) return false;
  for (const auto& [name, vi] : a.value_info) {
    auto it = b.value_info.find(name);
    if (it == b.value_info.end() || it->second.shape != vi.shape ||
        it->second.dtype != vi.dtype)
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// validate

namespace {

void validate_into(const Graph& g, const std::string& prefix,
                   std::vector<Violation>& out) {
  std::map<std::string, std::string> producers;  // tensor -> producer desc
  for (const auto& in : g.inputs) {
    if (!producers.emplace(in.name, "graph input").second)
      out.push_back({"DuplicateProducer", prefix + in.name,
                     "tensor declared as graph input more than once"});
  }
  for (const auto& [name, t] : g.initializers) {
    if (!producers.emplace(name, "initializer").second)
      out.push_back({"DuplicateProducer", prefix + name,
                     "initializer shadows a graph input"});
    if (static_cast<std::int64_t>(t.values.size()) != t.numel())
      out.push_back({"BadTensor", prefix + name,
                     "values length does not match shape product"});
    if (t.dtype.is_int()) {
      for (double v : t.values) {
        if (v != std::floor(v) || v < double(t.dtype.min()) ||
            v > double(t.dtype.max())) {
          out.push_back({"BadTensor", prefix + name,
                         "INT tensor holds a non-integral or out-of-range value"});
          break;
        }
      }
    }
  }

  std::set<std::string> node_names;
  for (const auto& n : g.nodes) {
    if (!node_names.insert(n.name).second)
      out.push_back({"DuplicateNodeName", prefix + n.name,
                     "node name used more than once"});
    if (!is_supported_op(n.op_type))
      out.push_back({"UnknownOp", prefix + n.name,
                     "unsupported op_type " + n.op_type});
    for (const auto& o : n.outputs) {
      auto [it, fresh] = producers.emplace(o, "node " + n.name);
      if (!fresh)
        out.push_back({"DuplicateProducer", prefix + o,
                       "produced by both " + it->second + " and node " + n.name});
    }
    if (n.op_type == "Scan") {
      int bodies = 0;
      for (const auto& [key, value] : n.attributes)
        if (std::holds_alternative<GraphPtr>(value)) ++bodies;
      if (bodies != 1 || !n.has_attr("body") ||
          !std::holds_alternative<GraphPtr>(n.attributes.at("body"))) {
        out.push_back({"BadScan", prefix + n.name,
                       "Scan must carry exactly one body subgraph attribute"});
      } else {
        const auto& body = std::get<GraphPtr>(n.attributes.at("body"));
        validate_into(*body, prefix + n.name + "/", out);
      }
    }
  }

  for (const auto& n : g.nodes)
    for (const auto& in : n.inputs)
      if (!producers.count(in))
        out.push_back({"MissingProducer", prefix + in,
                       "input of node " + n.name + " has no producer"});
  for (const auto& o : g.outputs)
    if (!producers.count(o))
      out.push_back({"MissingProducer", prefix + o,
                     "graph output has no producer"});

  // Cycle check over node dependencies.
  std::map<std::string, int> producer_idx;
  for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i)
    for (const auto& o : g.nodes[i].outputs) producer_idx[o] = i;
  std::vector<int> indeg(g.nodes.size(), 0);
  std::vector<std::vector<int>> succ(g.nodes.size());
  for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
    for (const auto& in : g.nodes[i].inputs) {
      auto it = producer_idx.find(in);
      if (it != producer_idx.end() && it->second != i) {
        succ[it->second].push_back(i);
        ++indeg[i];
      }
    }
  }
  std::queue<int> ready;
  for (int i = 0; i < static_cast<int>(indeg.size()); ++i)
    if (indeg[i] == 0) ready.push(i);
  int visited = 0;
  while (!ready.empty()) {
    int i = ready.front();
    ready.pop();
    ++visited;
    for (int s : succ[i])
      if (--indeg[s] == 0) ready.push(s);
  }
  if (visited != static_cast<int>(g.nodes.size()))
    out.push_back({"Cycle", prefix + g.name, "node dependencies form a cycle"});
}

}  // namespace

std::vector<Violation> validate(const Graph& g) {
  std::vector<Violation> out;
  validate_into(g, "", out);
  return out;
}

// ---------------------------------------------------------------------------
// topo_sort

std::vector<const Node*> topo_sort(const Graph& g) {
  std::map<std::string, int> producer_idx;
  for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i)
    for (const auto& o : g.nodes[i].outputs) producer_idx[o] = i;

  std::vector<int> indeg(g.nodes.size(), 0);
  std::vector<std::vector<int>> succ(g.nodes.size());
  for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
    for (const auto& in : g.nodes[i].inputs) {
      auto it = producer_idx.find(in);
      if (it != producer_idx.end() && it->second != i) {
        succ[it->second].push_back(i);
        ++indeg[i];
      }
    }
  }

  auto by_name = [&](int a, int b) { return g.nodes[a].name > g.nodes[b].name; };
  std::priority_queue<int, std::vector<int>, decltype(by_name)> ready(by_name);
  for (int i = 0; i < static_cast<int>(indeg.size()); ++i)
    if (indeg[i] == 0) ready.push(i);

  std::vector<const Node*> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    int i = ready.top();
    ready.pop();
    order.push_back(&g.nodes[i]);
    for (int s : succ[i])
      if (--indeg[s] == 0) ready.push(s);
  }
  if (order.size() != g.nodes.size())
    throw CycleDetected("graph " + g.name + ": dependencies are cyclic");
  return order;
}

// ---------------------------------------------------------------------------
// pattern matching / rewriting

NodePredicate op_is(const std::string& op_type) {
  return [op_type](const Graph&, const Node& n) { return n.op_type == op_type; };
}

std::map<std::string, std::vector<int>> consumer_map(const Graph& g) {
  std::map<std::string, std::vector<int>> consumers;
  for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i)
    for (const auto& in : g.nodes[i].inputs) consumers[in].push_back(i);
  return consumers;
}

std::vector<NodeChain> find_pattern(const Graph& g,
                                    const std::vector<NodePredicate>& pattern) {
  std::vector<NodeChain> matches;
  if (pattern.empty()) return matches;
  auto consumers = consumer_map(g);
  std::set<std::string> graph_outputs(g.outputs.begin(), g.outputs.end());

  for (int start = 0; start < static_cast<int>(g.nodes.size()); ++start) {
    if (!pattern[0](g, g.nodes[start])) continue;
    NodeChain chain = {start};
    bool ok = true;
    for (size_t step = 1; step < pattern.size(); ++step) {
      const Node& cur = g.nodes[chain.back()];
      // The link tensor must be the sole use of the producer's outputs.
      if (cur.outputs.size() != 1) {
        ok = false;
        break;
      }
      const std::string& link = cur.outputs[0];
      auto it = consumers.find(link);
      if (it == consumers.end() || it->second.size() != 1 ||
          graph_outputs.count(link)) {
        ok = false;
        break;
      }
      int next = it->second[0];
      if (!pattern[step](g, g.nodes[next])) {
        ok = false;
        break;
      }
      chain.push_back(next);
    }
    if (ok) matches.push_back(std::move(chain));
  }
  return matches;
}

Graph replace_chain(const Graph& g, const NodeChain& chain,
                    const std::vector<Node>& replacement,
                    const std::map<std::string, Tensor>& new_initializers) {
  if (chain.empty()) throw RewireMismatch("empty chain");
  std::set<int> chain_set(chain.begin(), chain.end());
  std::set<std::string> internal;  // tensors produced within the chain
  for (int idx : chain)
    for (const auto& o : g.nodes[idx].outputs) internal.insert(o);

  // External inputs: consumed by the chain, produced outside it.
  std::set<std::string> ext_inputs;
  for (int idx : chain)
    for (const auto& in : g.nodes[idx].inputs)
      if (!internal.count(in)) ext_inputs.insert(in);

  // External outputs: chain products visible outside the chain.
  auto consumers = consumer_map(g);
  std::set<std::string> graph_outputs(g.outputs.begin(), g.outputs.end());
  std::set<std::string> ext_outputs;
  for (int idx : chain) {
    for (const auto& o : g.nodes[idx].outputs) {
      bool external = graph_outputs.count(o) > 0;
      for (int c : consumers[o])
        if (!chain_set.count(c)) external = true;
      if (external) ext_outputs.insert(o);
    }
  }

  std::set<std::string> repl_products;
  for (const auto& n : replacement)
    for (const auto& o : n.outputs) repl_products.insert(o);
  for (const auto& o : ext_outputs)
    if (!repl_products.count(o))
      throw RewireMismatch("replacement does not produce chain output " + o);
  for (const auto& o : repl_products)
    if (!ext_outputs.count(o) && internal.count(o))
      throw RewireMismatch("replacement reuses internal tensor name " + o);
  for (const auto& n : replacement) {
    for (const auto& in : n.inputs) {
      if (repl_products.count(in) || ext_inputs.count(in) ||
          new_initializers.count(in) || g.initializers.count(in))
        continue;
      throw RewireMismatch("replacement input " + in +
                           " is not a chain input or constant");
    }
  }

  Graph out = g.clone();
  for (const auto& [name, t] : new_initializers) {
    if (out.has_tensor(name))
      throw RewireMismatch("new initializer " + name + " clashes");
    out.initializers[name] = t;
  }
  std::vector<Node> nodes;
  nodes.reserve(out.nodes.size());
  int first = *std::min_element(chain.begin(), chain.end());
  for (int i = 0; i < static_cast<int>(out.nodes.size()); ++i) {
    if (i == first)
      for (const auto& r : replacement) nodes.push_back(r);
    if (!chain_set.count(i)) nodes.push_back(std::move(out.nodes[i]));
  }
  if (first == static_cast<int>(out.nodes.size()))
    for (const auto& r : replacement) nodes.push_back(r);
  out.nodes = std::move(nodes);
  // Stale declared types of removed internals.
  for (const auto& t : internal)
    if (!ext_outputs.count(t)) out.value_info.erase(t);
  return out;
}

// ---------------------------------------------------------------------------
// stats

namespace {

std::optional<DataType> tensor_dtype(const Graph& g, const std::string& name) {
  for (const auto& in : g.inputs)
    if (in.name == name) return in.dtype;
  auto it = g.initializers.find(name);
  if (it != g.initializers.end()) return it->second.dtype;
  auto vi = g.value_info.find(name);
  if (vi != g.value_info.end()) return vi->second.dtype;
  return std::nullopt;
}

}  // namespace

GraphStats stats(const Graph& g) {
  GraphStats s;
  std::set<std::string> graph_io;
  for (const auto& in : g.inputs) graph_io.insert(in.name);

  std::set<std::string> float_intermediates;
  for (const auto& n : g.nodes) {
    s.op_counts[n.op_type] += 1;
    bool touches_float = false;
    for (const auto& t : n.inputs) {
      auto dt = tensor_dtype(g, t);
      if (dt && dt->is_float() && !g.initializers.count(t)) touches_float = true;
    }
    for (const auto& t : n.outputs) {
      auto dt = tensor_dtype(g, t);
      if (dt && dt->is_float()) {
        touches_float = true;
        if (!graph_io.count(t)) float_intermediates.insert(t);
      }
    }
    if (touches_float) s.float_nodes += 1;

    if (n.op_type == "Scan" && n.has_attr("body")) {
      const auto& body = std::get<GraphPtr>(n.attributes.at("body"));
      GraphStats bs = stats(*body);
      for (const auto& [op, c] : bs.op_counts) s.op_counts[op] += c;
      s.float_tensors += bs.float_tensors;
      s.float_nodes += bs.float_nodes;
      s.param_count += bs.param_count;
      s.scan_bodies.emplace_back(n.name, std::move(bs));
    }
  }
  s.float_tensors += static_cast<int>(float_intermediates.size());
  for (const auto& [name, t] : g.initializers) s.param_count += t.numel();
  return s;
}

}  // namespace qrnn
