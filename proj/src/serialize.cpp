// SPDX-License-Identifier: Apache-2.0
#include "qrnn/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace qrnn {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

json dtype_to_json(const DataType& dt) {
  json j;
  if (dt.is_float()) {
    j["kind"] = "FLOAT";
  } else {
    j["kind"] = "INT";
    j["bits"] = dt.bits;
    j["signed"] = dt.is_signed;
  }
  return j;
}

DataType dtype_from_json(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "FLOAT") return DataType::f64();
  if (kind == "INT")
    return DataType::int_t(j.at("bits").get<int>(), j.at("signed").get<bool>());
  throw ParseError("unknown dtype kind: " + kind);
}

json tensor_to_json(const Tensor& t) {
  json j;
  j["shape"] = t.shape;
  j["dtype"] = dtype_to_json(t.dtype);
  j["values"] = t.values;
  return j;
}

Tensor tensor_from_json(const json& j) {
  Tensor t;
  t.shape = j.at("shape").get<std::vector<std::int64_t>>();
  t.dtype = dtype_from_json(j.at("dtype"));
  t.values = j.at("values").get<std::vector<double>>();
  return t;
}

// Matrices carry the +/-inf sentinels as strings.
json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (const auto& row : m) {
    json r = json::array();
    for (double v : row) {
      if (std::isinf(v))
        r.push_back(v > 0 ? "inf" : "-inf");
      else
        r.push_back(v);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  Matrix m;
  for (const auto& row : j) {
    std::vector<double> r;
    for (const auto& v : row) {
      if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s == "inf")
          r.push_back(std::numeric_limits<double>::infinity());
        else if (s == "-inf")
          r.push_back(-std::numeric_limits<double>::infinity());
        else
          throw ParseError("bad matrix entry: " + s);
      } else {
        r.push_back(v.get<double>());
      }
    }
    m.push_back(std::move(r));
  }
  return m;
}

json graph_to_json(const Graph& g);

json attr_to_json(const AttrValue& a) {
  if (auto* b = std::get_if<bool>(&a)) return *b;
  if (auto* d = std::get_if<double>(&a)) return *d;
  if (auto* s = std::get_if<std::string>(&a)) return *s;
  if (auto* dt = std::get_if<DataType>(&a)) return dtype_to_json(*dt);
  if (auto* t = std::get_if<Tensor>(&a)) return tensor_to_json(*t);
  if (auto* m = std::get_if<Matrix>(&a)) return matrix_to_json(*m);
  return graph_to_json(**std::get_if<GraphPtr>(&a));
}

AttrValue attr_from_json(const json& j);

Graph graph_from_json(const json& j);

AttrValue attr_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) return matrix_from_json(j);
  if (j.is_object()) {
    if (j.contains("nodes")) return std::make_shared<Graph>(graph_from_json(j));
    if (j.contains("shape")) return tensor_from_json(j);
    if (j.contains("kind")) return dtype_from_json(j);
  }
  throw ParseError("unrecognized attribute encoding: " + j.dump());
}

json graph_to_json(const Graph& g) {
  json j;
  j["name"] = g.name;
  json inputs = json::array();
  for (const auto& in : g.inputs) {
    inputs.push_back({{"name", in.name},
                      {"shape", in.shape},
                      {"dtype", dtype_to_json(in.dtype)}});
  }
  j["inputs"] = std::move(inputs);
  j["outputs"] = g.outputs;
  json inits = json::object();
  for (const auto& [name, t] : g.initializers) inits[name] = tensor_to_json(t);
  j["initializers"] = std::move(inits);
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json attrs = json::object();
    for (const auto& [key, value] : n.attributes)
      attrs[key] = attr_to_json(value);
    nodes.push_back({{"op_type", n.op_type},
                     {"name", n.name},
                     {"inputs", n.inputs},
                     {"outputs", n.outputs},
                     {"attributes", std::move(attrs)}});
  }
  j["nodes"] = std::move(nodes);
  json vi = json::object();
  for (const auto& [name, info] : g.value_info)
    vi[name] = {{"shape", info.shape}, {"dtype", dtype_to_json(info.dtype)}};
  j["value_info"] = std::move(vi);
  return j;
}

Graph graph_from_json(const json& j) {
  Graph g;
  g.name = j.value("name", "");
  for (const auto& in : j.at("inputs")) {
    g.inputs.push_back({in.at("name").get<std::string>(),
                        in.at("shape").get<std::vector<std::int64_t>>(),
                        dtype_from_json(in.at("dtype"))});
  }
  g.outputs = j.at("outputs").get<std::vector<std::string>>();
  if (j.contains("initializers"))
    for (auto it = j["initializers"].begin(); it != j["initializers"].end();
         ++it)
      g.initializers[it.key()] = tensor_from_json(it.value());
  for (const auto& nj : j.at("nodes")) {
    Node n;
    n.op_type = nj.at("op_type").get<std::string>();
    n.name = nj.at("name").get<std::string>();
    n.inputs = nj.at("inputs").get<std::vector<std::string>>();
    n.outputs = nj.at("outputs").get<std::vector<std::string>>();
    if (nj.contains("attributes"))
      for (auto it = nj["attributes"].begin(); it != nj["attributes"].end();
           ++it)
        n.attributes[it.key()] = attr_from_json(it.value());
    g.nodes.push_back(std::move(n));
  }
  if (j.contains("value_info")) {
    for (auto it = j["value_info"].begin(); it != j["value_info"].end(); ++it) {
      g.value_info[it.key()] =
          ValueInfo{it.value().at("shape").get<std::vector<std::int64_t>>(),
                    dtype_from_json(it.value().at("dtype"))};
    }
  }
  return g;
}

}  // namespace

std::string serialize(const Graph& g) {
  json j;
  j["version"] = kSchemaVersion;
  j["graph"] = graph_to_json(g);
  return j.dump(2);
}

Graph deserialize(const std::string& bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    // byte offset -> line for the error message
    size_t line = 1;
    for (size_t i = 0; i < e.byte && i < bytes.size(); ++i)
      if (bytes[i] == '\n') ++line;
    throw ParseError("malformed graph JSON at byte " + std::to_string(e.byte) +
                     " (line " + std::to_string(line) + "): " + e.what());
  }
  try {
    if (!j.contains("version"))
      throw SchemaVersionError("missing schema version tag");
    int version = j["version"].get<int>();
    if (version != kSchemaVersion)
      throw SchemaVersionError("unknown schema version " +
                               std::to_string(version));
    return graph_from_json(j.at("graph"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad graph structure: ") + e.what());
  }
}

Graph load_graph_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

void save_graph_file(const Graph& g, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << serialize(g) << "\n";
}

}  // namespace qrnn
