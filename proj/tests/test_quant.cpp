// SPDX-License-Identifier: Apache-2.0
#include <random>

#include "doctest.h"
#include "qrnn/builder.hpp"
#include "qrnn/equivalence.hpp"
#include "qrnn/quant.hpp"
#include "testutil.hpp"

using namespace qrnn;
namespace tu = qrnn::testutil;

TEST_CASE("round_half_even matches the hardware rounding oracle") {
  // exact half-integer table
  CHECK(round_half_even(0.5) == 0.0);
  CHECK(round_half_even(1.5) == 2.0);
  CHECK(round_half_even(2.5) == 2.0);
  CHECK(round_half_even(-0.5) == 0.0);
  CHECK(round_half_even(-1.5) == -2.0);
  CHECK(round_half_even(-2.5) == -2.0);
  CHECK(round_half_even(3.5) == 4.0);
  CHECK(round_half_even(-3.5) == -4.0);

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (int i = 0; i < 20000; ++i) {
    double x = d(rng);
    CHECK(round_half_even(x) == tu::rint_oracle(x));
  }
  for (int k = -100; k <= 100; ++k) {
    double x = k + 0.5;
    CHECK(round_half_even(x) == tu::rint_oracle(x));
  }
}

TEST_CASE("quantize clamps and rounds per the quantizer definition") {
  QuantParams int4{0.5, 0, 4, true, false};
  CHECK(quantize_value(1.0, int4) == 2.0);
  CHECK(quantize_value(1.25, int4) == 2.0);  // 2.5 rounds to even
  CHECK(quantize_value(100.0, int4) == 7.0);
  CHECK(quantize_value(-100.0, int4) == -8.0);

  QuantParams narrow{0.5, 0, 4, true, true};
  CHECK(quantize_value(-100.0, narrow) == -7.0);

  QuantParams bad{0.0, 0, 4, true, false};
  CHECK_THROWS_AS(quantize(Tensor::scalar(1.0), bad), InvalidQuantParams);
  QuantParams badzp{0.5, 99, 4, true, false};
  CHECK_THROWS_AS(quantize(Tensor::scalar(1.0), badzp), InvalidQuantParams);
}

TEST_CASE("dequantize inverts codes and checks ranges") {
  QuantParams qp{0.5, 0, 4, true, false};
  CHECK(dequantize_value(2.0, qp) == 1.0);
  CHECK(dequantize_value(double(qp.zero_point), qp) == 0.0);
  Tensor bad = Tensor::scalar(42.0, qp.dtype());
  CHECK_THROWS_AS(dequantize(bad, qp), RangeError);
}

TEST_CASE("dequantize(quantize(x)) is the identity on grid points") {
  for (int bits = 2; bits <= 8; ++bits) {
    for (bool sgn : {true, false}) {
      QuantParams qp{0.37, sgn ? -1 : 3, bits, sgn, false};
      for (std::int64_t q = qp.qmin(); q <= qp.qmax(); ++q) {
        double x = qp.scale * double(q - qp.zero_point);
        CHECK(quant_fused_value(x, qp) == x);
      }
    }
  }
}

TEST_CASE("quant_fused: projection, idempotence, monotonicity, error bound") {
  QuantParams qp{0.5, 0, 4, true, false};
  CHECK(quant_fused_value(0.3, qp) == 0.5);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-6.0, 6.0);
  for (int i = 0; i < 10000; ++i) {
    double x = d(rng);
    double y = quant_fused_value(x, qp);
    CHECK(quant_fused_value(y, qp) == y);  // idempotent
    double in_lo = qp.scale * double(qp.qmin() - qp.zero_point);
    double in_hi = qp.scale * double(qp.qmax() - qp.zero_point);
    if (x >= in_lo && x <= in_hi) CHECK(std::fabs(y - x) <= qp.scale / 2);
    CHECK(y >= in_lo);
    CHECK(y <= in_hi);
  }
  // monotone non-decreasing over a sorted sweep
  double last = -1e18;
  for (double x = -5.0; x <= 5.0; x += 0.001) {
    double y = quant_fused_value(x, qp);
    CHECK(y >= last);
    last = y;
  }
}

TEST_CASE("fuse_qcdq leaves graphs without QCDQ chains unchanged") {
  auto g = tu::ChainBuilder({1, 4}).add(1.0).mul(2.0).done();
  PassResult r = fuse_qcdq_pass(g);
  CHECK(r.report.applications == 0);
  CHECK(r.graph == g);
}

TEST_CASE("fuse_qcdq skips chains with inconsistent parameters") {
  QuantParams qp{0.5, 0, 4, true, false};
  Graph g;
  g.name = "bad_qcdq";
  g.inputs = {{"x", {1, 4}, DataType::f64()}};
  Node q;
  q.op_type = "QuantizeLinear";
  q.name = "q";
  q.inputs = {"x"};
  q.outputs = {"qi"};
  set_quant_attrs(q, qp);
  Node c;
  c.op_type = "Clip";
  c.name = "c";
  c.inputs = {"qi"};
  c.outputs = {"ci"};
  c.attributes["min"] = -2.0;  // tighter than the quantizer range
  c.attributes["max"] = 2.0;
  Node d;
  d.op_type = "DequantizeLinear";
  d.name = "d";
  d.inputs = {"ci"};
  d.outputs = {"y"};
  set_quant_attrs(d, qp);
  g.nodes = {q, c, d};
  g.outputs = {"y"};

  PassResult r = fuse_qcdq_pass(g);
  CHECK(r.report.applications == 0);
  CHECK(r.graph == g);
  REQUIRE(r.report.diagnostics.size() == 1);
  CHECK(r.report.diagnostics[0].find("InconsistentQCDQ") != std::string::npos);
}

TEST_CASE("fuse_qcdq on the built LSTM: nine inline triples fuse exactly") {
  auto cfg = tu::small_w8a6();
  auto w = random_lstm_weights(cfg.input_size, cfg.hidden_size, 41);
  Graph g = build_qcdq_lstm(cfg, w);

  PassResult r = fuse_qcdq_pass(g);
  CHECK(r.report.applications == 9);

  const Graph& body = *std::get<GraphPtr>(
      r.graph.find_node("lstm_scan")->attributes.at("body"));
  int quants = 0, qlin = 0;
  for (const auto& n : body.nodes) {
    if (n.op_type == "Quant") ++quants;
    if (n.op_type == "QuantizeLinear") ++qlin;
  }
  CHECK(quants == 9);
  CHECK(qlin == 2);  // the split state-boundary quantizers stay

  EquivalenceConfig ec;
  ec.n_samples = 50;
  ec.seed = 5;
  EquivalenceReport rep = verify_equivalence(g, r.graph, ec);
  CHECK(rep.int_mismatches == 0);
  CHECK(rep.max_abs_err == 0.0);  // same rounding path, bit-exact
}

TEST_CASE("quant node attrs round-trip") {
  QuantParams qp{0.125, -3, 5, true, true};
  Node n;
  n.op_type = "Quant";
  n.name = "q";
  set_quant_attrs(n, qp);
  CHECK(quant_attrs(n) == qp);
}
