// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <random>

#include "doctest.h"
#include "qrnn/builder.hpp"
#include "qrnn/infer.hpp"
#include "qrnn/serialize.hpp"
#include "testutil.hpp"

using namespace qrnn;
namespace tu = qrnn::testutil;

namespace {

Graph two_node_chain() {
  // stored in shuffled order on purpose
  Graph g;
  g.name = "chain3";
  g.inputs = {{"x", {1, 2}, DataType::f64()}};
  g.initializers["one"] = Tensor::scalar(1.0);
  Node a, b, c;
  a.op_type = "Add"; a.name = "A"; a.inputs = {"x", "one"}; a.outputs = {"t1"};
  b.op_type = "Mul"; b.name = "B"; b.inputs = {"t1", "one"}; b.outputs = {"t2"};
  c.op_type = "Add"; c.name = "C"; c.inputs = {"t2", "one"}; c.outputs = {"y"};
  g.nodes = {c, a, b};
  g.outputs = {"y"};
  return g;
}

}  // namespace

TEST_CASE("validate: empty graph with one input has no violations") {
  Graph g;
  g.name = "empty";
  g.inputs = {{"x", {1, 2}, DataType::f64()}};
  CHECK(validate(g).empty());
}

TEST_CASE("validate: duplicate producer is reported") {
  Graph g;
  g.name = "dup";
  g.inputs = {{"x", {1}, DataType::f64()}};
  g.initializers["one"] = Tensor::scalar(1.0);
  Node a, b;
  a.op_type = "Add"; a.name = "a"; a.inputs = {"x", "one"}; a.outputs = {"t"};
  b.op_type = "Mul"; b.name = "b"; b.inputs = {"x", "one"}; b.outputs = {"t"};
  g.nodes = {a, b};
  g.outputs = {"t"};
  auto v = validate(g);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == "DuplicateProducer");
  CHECK(v[0].subject == "t");
}

TEST_CASE("validate: unknown op, missing producer, bad tensor, cycle") {
  Graph g;
  g.name = "bad";
  g.inputs = {{"x", {1}, DataType::f64()}};
  Node n;
  n.op_type = "Softmax";  // not in the supported set
  n.name = "s";
  n.inputs = {"x", "ghost"};
  n.outputs = {"y"};
  g.nodes = {n};
  g.outputs = {"y"};
  auto v = validate(g);
  bool unknown = false, missing = false;
  for (auto& violation : v) {
    if (violation.kind == "UnknownOp") unknown = true;
    if (violation.kind == "MissingProducer") missing = true;
  }
  CHECK(unknown);
  CHECK(missing);

  Graph c;
  c.name = "cyc";
  c.inputs = {{"x", {1}, DataType::f64()}};
  Node p, q;
  p.op_type = "Add"; p.name = "p"; p.inputs = {"x", "qo"}; p.outputs = {"po"};
  q.op_type = "Add"; q.name = "q"; q.inputs = {"x", "po"}; q.outputs = {"qo"};
  c.nodes = {p, q};
  c.outputs = {"qo"};
  auto cv = validate(c);
  CHECK(std::any_of(cv.begin(), cv.end(),
                    [](const Violation& v) { return v.kind == "Cycle"; }));
  CHECK_THROWS_AS(topo_sort(c), CycleDetected);

  Graph t;
  t.name = "badtensor";
  t.initializers["w"] = Tensor({2}, DataType::int_t(4, true), {3.5, 100.0});
  auto tv = validate(t);
  CHECK(!tv.empty());
  CHECK(tv[0].kind == "BadTensor");
}

TEST_CASE("validate: builder LSTM graph is clean") {
  auto cfg = tu::small_w8a6();
  auto w = random_lstm_weights(cfg.input_size, cfg.hidden_size, 1);
  CHECK(validate(build_qcdq_lstm(cfg, w)).empty());
}

TEST_CASE("topo_sort: unique order for a chain, name tie-break otherwise") {
  Graph g = two_node_chain();
  auto order = topo_sort(g);
  REQUIRE(order.size() == 3);
  CHECK(order[0]->name == "A");
  CHECK(order[1]->name == "B");
  CHECK(order[2]->name == "C");

  Graph ind;
  ind.name = "independent";
  ind.inputs = {{"x", {1}, DataType::f64()}};
  ind.initializers["one"] = Tensor::scalar(1.0);
  Node a, b;
  a.op_type = "Add"; a.name = "b"; a.inputs = {"x", "one"}; a.outputs = {"t1"};
  b.op_type = "Add"; b.name = "a"; b.inputs = {"x", "one"}; b.outputs = {"t2"};
  ind.nodes = {a, b};
  ind.outputs = {"t1", "t2"};
  auto o2 = topo_sort(ind);
  CHECK(o2[0]->name == "a");
  CHECK(o2[1]->name == "b");

  // determinism
  for (int rep = 0; rep < 5; ++rep) {
    auto again = topo_sort(g);
    for (size_t i = 0; i < again.size(); ++i)
      CHECK(again[i]->name == order[i]->name);
  }
}

TEST_CASE("infer_types: float closure and attribute passthrough") {
  auto g = tu::ChainBuilder({1, 3}).add(1.0).done();
  Graph t = infer_types(g);
  CHECK(tensor_info(t, t.outputs[0]).dtype.is_float());

  MultiThresholdAttrs attrs;
  attrs.thresholds = {{0.0, 1.0}};
  attrs.out_dtype = DataType::int_t(3, false);
  auto g2 = tu::ChainBuilder({1, 3}).mt(attrs).done();
  Graph t2 = infer_types(g2);
  CHECK(tensor_info(t2, t2.outputs[0]).dtype == DataType::int_t(3, false));
}

TEST_CASE("infer_types: integer matmul accumulator width") {
  // UINT6 x INT8 over reduction length 104 needs 21 bits
  DataType acc = matmul_accumulator_dtype(DataType::int_t(6, false),
                                          DataType::int_t(8, true), 104);
  CHECK(acc == DataType::int_t(21, true));

  // brute-force oracle over operand extremes for a sample of shapes
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    int abits = 1 + int(rng() % 8), bbits = 1 + int(rng() % 8);
    bool asgn = rng() % 2, bsgn = rng() % 2;
    std::int64_t k = 1 + std::int64_t(rng() % 200);
    DataType a = DataType::int_t(abits, asgn), b = DataType::int_t(bbits, bsgn);
    std::int64_t worst_hi = 0, worst_lo = 0;
    for (std::int64_t av : {a.min(), a.max()})
      for (std::int64_t bv : {b.min(), b.max()}) {
        worst_hi = std::max(worst_hi, k * av * bv);
        worst_lo = std::min(worst_lo, k * av * bv);
      }
    DataType got = matmul_accumulator_dtype(a, b, k);
    CHECK(got.min() <= worst_lo);
    CHECK(got.max() >= worst_hi);
    if (got.bits > 1) {
      DataType tighter = DataType::int_t(got.bits - 1, got.is_signed);
      CHECK((tighter.min() > worst_lo || tighter.max() < worst_hi));
    }
  }
}

TEST_CASE("infer_types: dtype conflicts are loud") {
  Graph g;
  g.name = "conflict";
  g.inputs = {{"a", {1, 2}, DataType::int_t(4, true)},
              {"b", {1, 2}, DataType::f64()}};
  Node n;
  n.op_type = "Concat";
  n.name = "cat";
  n.inputs = {"a", "b"};
  n.outputs = {"y"};
  n.attributes["axis"] = 1.0;
  g.nodes = {n};
  g.outputs = {"y"};
  CHECK_THROWS_AS(infer_types(g), TypeConflict);
}

TEST_CASE("find_pattern: QCDQ chains and fan-out blocking") {
  QuantParams qp{0.5, 0, 4, true, false};
  Graph g;
  g.name = "qcdq";
  g.inputs = {{"x", {1, 2}, DataType::f64()}};
  Node q, c, d;
  q.op_type = "QuantizeLinear"; q.name = "q"; q.inputs = {"x"}; q.outputs = {"qi"};
  set_quant_attrs(q, qp);
  c.op_type = "Clip"; c.name = "c"; c.inputs = {"qi"}; c.outputs = {"ci"};
  c.attributes["min"] = -8.0;
  c.attributes["max"] = 7.0;
  d.op_type = "DequantizeLinear"; d.name = "d"; d.inputs = {"ci"}; d.outputs = {"y"};
  set_quant_attrs(d, qp);
  g.nodes = {q, c, d};
  g.outputs = {"y"};

  auto pattern = std::vector<NodePredicate>{
      op_is("QuantizeLinear"), op_is("Clip"), op_is("DequantizeLinear")};
  CHECK(find_pattern(g, pattern).size() == 1);

  // a second consumer of the Clip output blocks the chain
  Graph g2 = g;
  Node extra;
  extra.op_type = "ReLU";
  extra.name = "taps";
  extra.inputs = {"ci"};
  extra.outputs = {"tap"};
  g2.nodes.push_back(extra);
  g2.outputs.push_back("tap");
  CHECK(find_pattern(g2, pattern).empty());
}

TEST_CASE("find_pattern: one match per tanh quantizer in the fused LSTM") {
  auto cfg = tu::small_w8a6();
  auto w = random_lstm_weights(cfg.input_size, cfg.hidden_size, 9);
  Graph fused = fuse_qcdq_pass(build_qcdq_lstm(cfg, w)).graph;
  const Graph& body = *std::get<GraphPtr>(
      fused.find_node("lstm_scan")->attributes.at("body"));
  auto matches =
      find_pattern(body, {op_is("Tanh"), op_is("Quant")});
  CHECK(matches.size() == 2);  // the cell gate and the cell-output tanh
}

TEST_CASE("replace_chain: identity rewrite, fusion, boundary mismatch") {
  Graph g = two_node_chain();
  Tensor x({1, 2}, DataType::f64(), {1.0, 2.0});
  Tensor before = tu::run1(g, x);

  // replace B with an identical copy
  int b_idx = -1;
  for (int i = 0; i < int(g.nodes.size()); ++i)
    if (g.nodes[i].name == "B") b_idx = i;
  Graph same = replace_chain(g, {b_idx}, {g.nodes[b_idx]});
  CHECK(validate(same).empty());
  CHECK(tu::run1(same, x).values == before.values);

  // omitting the chain output is a contract breach
  Node broken = g.nodes[b_idx];
  broken.outputs = {"somewhere_else"};
  CHECK_THROWS_AS(replace_chain(g, {b_idx}, {broken}), RewireMismatch);
}

TEST_CASE("replace_chain: QCDQ to Quant drops two nodes and keeps validity") {
  auto cfg = tu::small_w8a6();
  auto w = random_lstm_weights(cfg.input_size, cfg.hidden_size, 2);
  Graph g = build_qcdq_lstm(cfg, w);
  const Graph& body =
      *std::get<GraphPtr>(g.find_node("lstm_scan")->attributes.at("body"));
  size_t before = body.nodes.size();

  Graph fused_body = body;
  auto chains = find_pattern(fused_body, {op_is("QuantizeLinear"), op_is("Clip"),
                                          op_is("DequantizeLinear")});
  REQUIRE(!chains.empty());
  const auto& chain = chains[0];
  Node repl;
  repl.op_type = "Quant";
  repl.name = "fused0";
  repl.inputs = {fused_body.nodes[chain[0]].inputs[0]};
  repl.outputs = {fused_body.nodes[chain[2]].outputs[0]};
  set_quant_attrs(repl, quant_attrs(fused_body.nodes[chain[0]]));
  Graph out = replace_chain(fused_body, chain, {repl});
  CHECK(out.nodes.size() == before - 2);
  CHECK(validate(out).empty());
  CHECK(validate(fused_body).empty());  // input untouched
  CHECK(fused_body.nodes.size() == before);
}

TEST_CASE("stats: op counts, float nodes, parameter count oracle") {
  auto g = tu::ChainBuilder({1, 3}).add(0.5).done();
  GraphStats s = stats(infer_types(g));
  CHECK(s.op_counts.at("Add") == 1);
  CHECK(s.float_nodes == 1);

  std::mt19937_64 rng(8);
  Graph big;
  big.name = "params";
  big.inputs = {{"x", {1, 4}, DataType::f64()}};
  std::int64_t expected = 0;
  for (int i = 0; i < 5; ++i) {
    std::int64_t rows = 1 + std::int64_t(rng() % 7);
    std::int64_t cols = 1 + std::int64_t(rng() % 7);
    big.initializers["w" + std::to_string(i)] =
        tu::random_float_tensor({rows, cols}, rng);
    expected += rows * cols;  // independent summation
  }
  big.outputs = {"x"};
  CHECK(stats(big).param_count == expected);
}

TEST_CASE("serialize: round trips, errors, infinity sentinels") {
  Graph empty;
  empty.name = "empty";
  empty.inputs = {{"x", {2}, DataType::f64()}};
  CHECK(deserialize(serialize(empty)) == empty);

  auto cfg = tu::small_w8a6();
  auto w = random_lstm_weights(cfg.input_size, cfg.hidden_size, 3);
  Graph lstm = build_qcdq_lstm(cfg, w);
  CHECK(deserialize(serialize(lstm)) == lstm);

  std::string bytes = serialize(lstm);
  CHECK_THROWS_AS(deserialize(bytes.substr(0, bytes.size() / 2)), ParseError);
  CHECK_THROWS_AS(deserialize("{\"version\":2,\"graph\":{}}"),
                  SchemaVersionError);
  CHECK_THROWS_AS(deserialize("{\"graph\":{}}"), SchemaVersionError);

  MultiThresholdAttrs attrs;
  attrs.thresholds = {{-std::numeric_limits<double>::infinity(), 0.25,
                       std::numeric_limits<double>::infinity()}};
  attrs.out_dtype = DataType::int_t(2, false);
  Graph mt = tu::ChainBuilder({1, 1}).mt(attrs).done();
  Graph rt = deserialize(serialize(mt));
  CHECK(rt == mt);
  CHECK(serialize(mt).find("\"-inf\"") != std::string::npos);

  // serialized form is stable: serialize . deserialize . serialize
  CHECK(serialize(deserialize(bytes)) == bytes);
}

TEST_CASE("serialize: double values survive bit-exactly") {
  std::mt19937_64 rng(12);
  Graph g;
  g.name = "precision";
  g.inputs = {{"x", {1}, DataType::f64()}};
  g.initializers["v"] = tu::random_float_tensor({64}, rng, -1e9, 1e9);
  g.outputs = {"x"};
  Graph rt = deserialize(serialize(g));
  CHECK(rt.initializers.at("v").values == g.initializers.at("v").values);
}
