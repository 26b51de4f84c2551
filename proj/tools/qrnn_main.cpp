// SPDX-License-Identifier: Apache-2.0
//
// qrnn: build, transform, run, verify and inspect quantized recurrent
// compute graphs.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qrnn/builder.hpp"
#include "qrnn/equivalence.hpp"
#include "qrnn/executor.hpp"
#include "qrnn/infer.hpp"
#include "qrnn/passes.hpp"
#include "qrnn/serialize.hpp"

namespace {

using nlohmann::json;
using namespace qrnn;

// exit codes: 0 ok, 1 verification mismatch, 2 usage/config, 3 validation,
// 4 fixpoint failure
constexpr int kOk = 0, kMismatch = 1, kUsage = 2, kValidation = 3,
              kFixpoint = 4;

int log_level() {
  const char* v = std::getenv("QRNN_LOG");
  if (!v) return 1;
  std::string s(v);
  if (s == "error") return 0;
  if (s == "debug") return 2;
  return 1;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json stats_to_json(const GraphStats& s) {
  json j;
  j["op_counts"] = s.op_counts;
  j["float_tensors"] = s.float_tensors;
  j["float_nodes"] = s.float_nodes;
  j["param_count"] = s.param_count;
  json bodies = json::object();
  for (const auto& [name, bs] : s.scan_bodies) bodies[name] = stats_to_json(bs);
  j["scan_bodies"] = std::move(bodies);
  return j;
}

json report_to_json(const PassReport& r) {
  json j;
  j["pass"] = r.pass;
  j["applications"] = r.applications;
  j["nodes_removed"] = r.nodes_removed;
  j["nodes_added"] = r.nodes_added;
  j["diagnostics"] = r.diagnostics;
  return j;
}

int check_validate(const Graph& g) {
  auto violations = validate(g);
  if (violations.empty()) return kOk;
  for (const auto& v : violations) std::cerr << v.str() << "\n";
  return kValidation;
}

Tensor tensor_from_json_value(const json& j) {
  Tensor t;
  t.shape = j.at("shape").get<std::vector<std::int64_t>>();
  const json& dt = j.at("dtype");
  if (dt.at("kind") == "FLOAT")
    t.dtype = DataType::f64();
  else
    t.dtype = DataType::int_t(dt.at("bits").get<int>(),
                              dt.at("signed").get<bool>());
  t.values = j.at("values").get<std::vector<double>>();
  return t;
}

json tensor_to_json_value(const Tensor& t) {
  json j;
  j["shape"] = t.shape;
  if (t.dtype.is_float())
    j["dtype"] = {{"kind", "FLOAT"}};
  else
    j["dtype"] = {{"kind", "INT"},
                  {"bits", t.dtype.bits},
                  {"signed", t.dtype.is_signed}};
  j["values"] = t.values;
  return j;
}

int cmd_build(const std::string& config_path, const std::string& weights_path,
              std::uint64_t seed, const std::string& out_path) {
  std::string text = read_file(config_path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  std::string model = j.value("model", "");
  Graph g;
  if (model == "lstm") {
    LSTMQuantConfig cfg = lstm_config_from_json(text);
    LSTMWeights w;
    if (!weights_path.empty()) {
      json wj = json::parse(read_file(weights_path));
      auto get = [&](const char* k) { return tensor_from_json_value(wj.at(k)); };
      w.W_f = get("W_f"); w.W_i = get("W_i"); w.W_c = get("W_c"); w.W_o = get("W_o");
      w.U_f = get("U_f"); w.U_i = get("U_i"); w.U_c = get("U_c"); w.U_o = get("U_o");
      w.b_f = get("b_f"); w.b_i = get("b_i"); w.b_c = get("b_c"); w.b_o = get("b_o");
    } else {
      w = random_lstm_weights(cfg.input_size, cfg.hidden_size, seed);
    }
    g = build_qcdq_lstm(cfg, w);
  } else if (model == "convlstm") {
    g = build_convlstm(convlstm_config_from_json(text), seed);
  } else {
    throw ConfigError("config must set \"model\" to \"lstm\" or \"convlstm\"");
  }
  int rc = check_validate(g);
  if (rc != kOk) return rc;
  save_graph_file(g, out_path);
  GraphStats s = stats(infer_types(g));
  log_info("built " + g.name + " -> " + out_path);
  std::cout << stats_to_json(s).dump(2) << "\n";
  return kOk;
}

int cmd_transform(const std::string& in_path, const std::string& out_path,
                  const std::string& schedule_path,
                  const std::string& report_path, bool keep_dequant) {
  Graph g = load_graph_file(in_path);
  int rc = check_validate(g);
  if (rc != kOk) return rc;

  std::vector<std::string> schedule = default_schedule();
  if (!schedule_path.empty()) {
    json sj = json::parse(read_file(schedule_path));
    schedule = sj.get<std::vector<std::string>>();
    for (const auto& name : schedule) {
      if (!is_pass_name(name)) {
        std::cerr << "unknown pass \"" << name << "\"; valid passes:\n";
        for (const auto& p : pass_names()) std::cerr << "  " << p << "\n";
        return kUsage;
      }
    }
  }

  std::vector<PassReport> reports;
  PassResult folded = fold_batchnorm(g);
  reports.push_back(folded.report);
  PassResult fused = fuse_qcdq_pass(folded.graph);
  reports.push_back(fused.report);
  PassResult converted = convert_quant_to_thresholds_pass(fused.graph);
  reports.push_back(converted.report);

  Graph result;
  if (schedule.empty()) {
    result = converted.graph;
  } else {
    try {
      PipelineResult pr = streamline_pipeline(converted.graph, schedule);
      for (auto& r : pr.reports) reports.push_back(std::move(r));
      result = std::move(pr.graph);
      log_info("fixpoint after " + std::to_string(pr.iterations) +
               " iteration(s)");
    } catch (const FixpointNotReached& e) {
      std::cerr << e.what() << "\n";
      return kFixpoint;
    }
  }
  if (!keep_dequant) result = drop_terminal_dequant(result);

  rc = check_validate(result);
  if (rc != kOk) return rc;
  save_graph_file(result, out_path);

  json rj = json::array();
  for (const auto& r : reports) rj.push_back(report_to_json(r));
  if (!report_path.empty()) {
    std::ofstream rf(report_path);
    rf << rj.dump(2) << "\n";
  }
  GraphStats s = stats(infer_types(result));
  json out;
  out["stats"] = stats_to_json(s);
  out["passes"] = std::move(rj);
  std::cout << out.dump(2) << "\n";
  return kOk;
}

int cmd_run(const std::string& graph_path, const std::string& feeds_path,
            const std::string& out_path, bool trace) {
  Graph g = load_graph_file(graph_path);
  int rc = check_validate(g);
  if (rc != kOk) return rc;
  TensorMap feeds;
  if (!feeds_path.empty()) {
    json fj = json::parse(read_file(feeds_path));
    for (auto it = fj.begin(); it != fj.end(); ++it)
      feeds[it.key()] = tensor_from_json_value(it.value());
  }
  ExecutionContext ctx;
  ctx.trace = trace;
  TensorMap outs;
  try {
    outs = execute(g, feeds, ctx);
  } catch (const MissingFeed& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }
  json oj = json::object();
  for (const auto& [name, t] : outs) oj[name] = tensor_to_json_value(t);
  if (!out_path.empty()) {
    std::ofstream of(out_path);
    of << oj.dump(2) << "\n";
  } else {
    std::cout << oj.dump(2) << "\n";
  }
  return kOk;
}

int cmd_verify(const std::string& path_a, const std::string& path_b,
               int samples, std::uint64_t seed, double tol) {
  Graph a = load_graph_file(path_a);
  Graph b = load_graph_file(path_b);
  EquivalenceConfig cfg;
  cfg.n_samples = samples;
  cfg.seed = seed;
  cfg.rel_tol = tol;
  EquivalenceReport r = verify_equivalence(a, b, cfg);
  std::cout << equivalence_report_json(r) << "\n";
  return r.pass ? kOk : kMismatch;
}

int cmd_stats(const std::string& graph_path) {
  Graph g = load_graph_file(graph_path);
  int rc = check_validate(g);
  if (rc != kOk) return rc;
  GraphStats s = stats(infer_types(g));
  std::cout << stats_to_json(s).dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantized LSTM graph compiler and functional simulator"};
  app.require_subcommand(1);

  std::string config_path, weights_path, out_path = "graph.json";
  std::uint64_t seed = 42;
  auto* build = app.add_subcommand("build", "build a model graph from a config");
  build->add_option("config", config_path, "JSON model config")->required();
  build->add_option("-o,--out", out_path, "output graph file");
  build->add_option("--weights", weights_path, "JSON weight tensors");
  build->add_option("--seed", seed, "seed for generated weights");

  std::string t_in, t_out = "streamlined.json", t_schedule, t_report;
  bool keep_dequant = true;
  auto* transform =
      app.add_subcommand("transform", "fuse, convert and streamline a graph");
  transform->add_option("graph", t_in, "input graph file")->required();
  transform->add_option("-o,--out", t_out, "output graph file");
  transform->add_option("--schedule", t_schedule,
                        "JSON list of pass names (default: built-in order)");
  transform->add_option("--report", t_report, "write pass reports here");
  transform->add_flag("!--drop-terminal-dequant", keep_dequant,
                      "drop a trailing output dequantization");

  std::string r_graph, r_feeds, r_out;
  bool trace = false;
  auto* run = app.add_subcommand("run", "execute a graph on tensor feeds");
  run->add_option("graph", r_graph, "graph file")->required();
  run->add_option("--feeds", r_feeds, "JSON feed tensors");
  run->add_option("-o,--out", r_out, "output tensor file (default: stdout)");
  run->add_flag("--trace", trace, "dump per-node tensors to stderr");

  std::string v_a, v_b;
  int v_samples = 100;
  std::uint64_t v_seed = 42;
  double v_tol = 1e-6;
  auto* verify =
      app.add_subcommand("verify", "check two graphs for functional equivalence");
  verify->add_option("graph-a", v_a)->required();
  verify->add_option("graph-b", v_b)->required();
  verify->add_option("--samples", v_samples, "random samples");
  verify->add_option("--seed", v_seed, "rng seed");
  verify->add_option("--tol", v_tol, "relative tolerance for float outputs");

  std::string s_graph;
  auto* stats_cmd = app.add_subcommand("stats", "print graph statistics");
  stats_cmd->add_option("graph", s_graph)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (build->parsed())
      return cmd_build(config_path, weights_path, seed, out_path);
    if (transform->parsed())
      return cmd_transform(t_in, t_out, t_schedule, t_report, keep_dequant);
    if (run->parsed()) return cmd_run(r_graph, r_feeds, r_out, trace);
    if (verify->parsed()) return cmd_verify(v_a, v_b, v_samples, v_seed, v_tol);
    if (stats_cmd->parsed()) return cmd_stats(s_graph);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const SchemaVersionError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kUsage;
  } catch (const SignatureMismatch& e) {
    std::cerr << "signature mismatch: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kUsage;
}
