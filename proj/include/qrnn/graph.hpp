// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "qrnn/errors.hpp"
#include "qrnn/tensor.hpp"

namespace qrnn {

struct Graph;
using GraphPtr = std::shared_ptr<Graph>;

// Threshold matrices are kept as nested rows (C channels x L levels) so they
// can carry +/-inf sentinels and serialize as nested JSON arrays.
using Matrix = std::vector<std::vector<double>>;

using AttrValue =
    std::variant<bool, double, std::string, DataType, Tensor, Matrix, GraphPtr>;

struct Node {
  std::string op_type;
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, AttrValue> attributes;

  bool has_attr(const std::string& key) const {
    return attributes.count(key) > 0;
  }
  double attr_f(const std::string& key) const;
  bool attr_b(const std::string& key) const;
  std::string attr_s(const std::string& key) const;
};

struct GraphInput {
  std::string name;
  std::vector<std::int64_t> shape;
  DataType dtype;
};

struct ValueInfo {
  std::vector<std::int64_t> shape;
  DataType dtype;
};

struct Graph {
  std::string name;
  std::vector<GraphInput> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, Tensor> initializers;
  std::vector<Node> nodes;
  std::map<std::string, ValueInfo> value_info;

  // Deep copy, cloning nested Scan bodies (plain copies share body pointers).
  Graph clone() const;

  const Node* find_node(const std::string& node_name) const;
  bool has_tensor(const std::string& tensor_name) const;
};

bool operator==(const Graph& a, const Graph& b);
bool operator==(const Node& a, const Node& b);
bool attr_equal(const AttrValue& a, const AttrValue& b);

// The closed set of supported operator types.
bool is_supported_op(const std::string& op_type);

struct Violation {
  std::string kind;     // e.g. DuplicateProducer, UnknownOp, MissingProducer
  std::string subject;  // offending tensor or node name
  std::string message;

  std::string str() const { return kind + " [" + subject + "]: " + message; }
};

// Checks all Graph invariants; returns one violation per breach. Recurses
// into Scan bodies. Violations are data, not failures.
std::vector<Violation> validate(const Graph& g);

// Deterministic topological order of nodes (Kahn, ties broken by node name).
// Throws CycleDetected.
std::vector<const Node*> topo_sort(const Graph& g);

using NodePredicate = std::function<bool(const Graph&, const Node&)>;

NodePredicate op_is(const std::string& op_type);

// Chain of node indices, consecutive producer->consumer with exclusively
// consumed intermediates.
using NodeChain = std::vector<int>;

// All chains matching the predicate sequence. Intermediate tensors must have
// exactly one consumer and must not be graph outputs.
std::vector<NodeChain> find_pattern(const Graph& g,
                                    const std::vector<NodePredicate>& pattern);

// Consumer map: tensor name -> indices of consuming nodes.
std::map<std::string, std::vector<int>> consumer_map(const Graph& g);

// Replaces `chain` with `replacement`, preserving the chain's boundary tensor
// names. Returns a new graph; the input is not modified. `new_initializers`
// may introduce constants referenced by the replacement nodes.
// Throws RewireMismatch if the replacement boundary differs from the chain's.
Graph replace_chain(const Graph& g, const NodeChain& chain,
                    const std::vector<Node>& replacement,
                    const std::map<std::string, Tensor>& new_initializers = {});

struct GraphStats {
  std::map<std::string, int> op_counts;
  int float_tensors = 0;  // FLOAT-dtype intermediate tensors
  int float_nodes = 0;    // nodes consuming or producing a FLOAT tensor
  std::int64_t param_count = 0;
  // Stats of each Scan body, keyed by the Scan node name. Body node counts
  // are also folded into the totals above.
  std::vector<std::pair<std::string, GraphStats>> scan_bodies;
};

// Exact counts over a validated, type-inferred graph. Scan bodies are counted
// recursively and also reported separately.
GraphStats stats(const Graph& g);

}  // namespace qrnn
