// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command-line tool: exit-code contract, file
// round-trips and report determinism.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

int g_failures = 0;

struct CmdResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

CmdResult run(const std::string& args) {
  std::string out = "/tmp/qrnn_cli_out.txt";
  std::string err = "/tmp/qrnn_cli_err.txt";
  std::string cmd = std::string(QRNN_BIN) + " " + args + " > " + out + " 2> " +
                    err;
  int rc = std::system(cmd.c_str());
  int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return {code, slurp(out), slurp(err)};
}

void expect(bool ok, const std::string& what) {
  std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
  if (!ok) ++g_failures;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

}  // namespace

int main() {
  const std::string cfg_dir = QRNN_CONFIG_DIR;

  // build: happy path, stats summary on stdout
  CmdResult b = run("build " + cfg_dir +
                    "/lstm_w8a6.json --seed 7 -o /tmp/qrnn_lstm.json");
  expect(b.exit_code == 0, "build exits 0 on a valid config");
  expect(b.out.find("\"param_count\"") != std::string::npos,
         "build prints a stats summary");

  // build twice: byte-identical artifact
  run("build " + cfg_dir + "/lstm_w8a6.json --seed 7 -o /tmp/qrnn_lstm2.json");
  expect(slurp("/tmp/qrnn_lstm.json") == slurp("/tmp/qrnn_lstm2.json"),
         "same seed gives a byte-identical graph file");

  // config missing a quantizer slot: exit 2 naming the slot
  write_file("/tmp/bad_cfg.json", R"({
    "model": "lstm", "input_size": 4, "hidden_size": 4, "seq_len": 2,
    "act_qps": {"acc_f": {"scale":0.25,"zero_point":0,"bits":6,"signed":true}}
  })");
  CmdResult bad = run("build /tmp/bad_cfg.json -o /tmp/never.json");
  expect(bad.exit_code == 2, "missing quantizer slot exits 2");
  expect(bad.err.find("acc_") != std::string::npos ||
             bad.err.find("sig_") != std::string::npos,
         "the error names the missing slot");

  // stats on the built file re-validates it
  CmdResult st = run("stats /tmp/qrnn_lstm.json");
  expect(st.exit_code == 0, "stats exits 0 on the built graph");
  expect(st.out.find("\"Scan\"") != std::string::npos,
         "stats reports the Scan node");

  // transform with the default schedule
  CmdResult tr = run(
      "transform /tmp/qrnn_lstm.json -o /tmp/qrnn_slim.json "
      "--report /tmp/qrnn_report.json");
  expect(tr.exit_code == 0, "transform exits 0 and reaches a fixpoint");
  expect(tr.out.find("\"float_nodes\": 0") != std::string::npos,
         "streamlined Scan body reports zero float nodes");

  // transform with an explicit schedule file
  CmdResult tr2 = run("transform /tmp/qrnn_lstm.json -o /tmp/qrnn_slim2.json "
                      "--schedule " + cfg_dir + "/schedule_default.json");
  expect(tr2.exit_code == 0, "transform accepts a schedule file");

  // unknown pass name: exit 2 listing valid names
  write_file("/tmp/bad_schedule.json", R"(["definitely_not_a_pass"])");
  CmdResult badsched = run(
      "transform /tmp/qrnn_lstm.json -o /tmp/x.json --schedule "
      "/tmp/bad_schedule.json");
  expect(badsched.exit_code == 2, "unknown pass exits 2");
  expect(badsched.err.find("absorb_add_into_multithreshold") !=
             std::string::npos,
         "the error lists valid pass names");

  // verify: reflexivity, pre/post, exit 1 on a real mismatch
  CmdResult self = run("verify /tmp/qrnn_lstm.json /tmp/qrnn_lstm.json");
  expect(self.exit_code == 0, "a graph is equivalent to itself");
  CmdResult pp = run(
      "verify /tmp/qrnn_lstm.json /tmp/qrnn_slim.json --samples 25 --seed 3");
  expect(pp.exit_code == 0, "pre/post streamline graphs verify equal");
  expect(pp.out.find("\"int_mismatches\":0") != std::string::npos,
         "report shows zero mismatches");

  CmdResult pp2 = run(
      "verify /tmp/qrnn_lstm.json /tmp/qrnn_slim.json --samples 25 --seed 3");
  expect(pp.out == pp2.out, "verify reports are byte-identical across runs");

  // perturb one threshold in the streamlined graph: collapse the first
  // decision boundary of one operator onto the second (stays sorted, shifts
  // counts for every input landing between them)
  {
    nlohmann::json doc = nlohmann::json::parse(slurp("/tmp/qrnn_slim.json"));
    auto& body_nodes = doc["graph"]["nodes"][0]["attributes"]["body"]["nodes"];
    bool mutated = false;
    for (auto& node : body_nodes) {
      std::string name = node["name"];
      if (node["op_type"] == "MultiThreshold" && !mutated &&
          name.find("gate") != std::string::npos) {
        // collapse a mid-range decision boundary onto its neighbor
        auto& row = node["attributes"]["thresholds"][0];
        size_t mid = row.size() / 2;
        row[mid] = row[mid + 1];
        mutated = true;
      }
    }
    write_file("/tmp/qrnn_broken.json", doc.dump(2));
  }
  CmdResult broken =
      run("verify /tmp/qrnn_lstm.json /tmp/qrnn_broken.json --samples 10");
  expect(broken.exit_code == 1, "a perturbed threshold fails verification");

  // run: feeds file in, outputs out; missing feed exits 2
  write_file("/tmp/add_graph.json", R"({
    "version": 1,
    "graph": {
      "name": "add",
      "inputs": [
        {"name": "a", "shape": [2], "dtype": {"kind": "FLOAT"}},
        {"name": "b", "shape": [2], "dtype": {"kind": "FLOAT"}}
      ],
      "outputs": ["y"],
      "initializers": {},
      "nodes": [{"op_type": "Add", "name": "n", "inputs": ["a", "b"],
                 "outputs": ["y"], "attributes": {}}],
      "value_info": {}
    }
  })");
  write_file("/tmp/feeds.json", R"({
    "a": {"shape": [2], "dtype": {"kind": "FLOAT"}, "values": [1.0, 2.0]},
    "b": {"shape": [2], "dtype": {"kind": "FLOAT"}, "values": [3.0, 4.0]}
  })");
  CmdResult rr = run("run /tmp/add_graph.json --feeds /tmp/feeds.json");
  expect(rr.exit_code == 0, "run executes a graph from files");
  expect(rr.out.find("4.0") != std::string::npos &&
             rr.out.find("6.0") != std::string::npos,
         "run prints the computed outputs");

  write_file("/tmp/feeds_missing.json", R"({
    "a": {"shape": [2], "dtype": {"kind": "FLOAT"}, "values": [1.0, 2.0]}
  })");
  CmdResult miss =
      run("run /tmp/add_graph.json --feeds /tmp/feeds_missing.json");
  expect(miss.exit_code == 2, "a missing feed exits 2");
  expect(miss.err.find("b") != std::string::npos,
         "the error names the missing input");

  // malformed graph file: exit 2 with a parse error
  write_file("/tmp/garbage.json", "{ not json");
  CmdResult garbage = run("stats /tmp/garbage.json");
  expect(garbage.exit_code == 2, "malformed graph JSON exits 2");

  // trace mode dumps per-node tensors to stderr
  CmdResult traced =
      run("run /tmp/add_graph.json --feeds /tmp/feeds.json --trace");
  expect(traced.exit_code == 0 &&
             traced.err.find("[trace]") != std::string::npos,
         "--trace dumps per-node tensors");

  // ConvLSTM: build and run a 100x40 input down to three logits
  CmdResult cb = run("build " + cfg_dir +
                     "/convlstm_w8a6.json --seed 3 -o /tmp/qrnn_conv.json");
  expect(cb.exit_code == 0, "build exits 0 on the ConvLSTM config");
  {
    nlohmann::json feeds;
    nlohmann::json x;
    x["shape"] = {1, 1, 100, 40};
    x["dtype"] = {{"kind", "INT"}, {"bits", 8}, {"signed", true}};
    std::vector<double> vals(4000);
    for (size_t i = 0; i < vals.size(); ++i)
      vals[i] = double(int(i * 37 % 255) - 127);
    x["values"] = vals;
    feeds["x"] = x;
    write_file("/tmp/conv_feeds.json", feeds.dump());
  }
  CmdResult cr = run(
      "run /tmp/qrnn_conv.json --feeds /tmp/conv_feeds.json -o "
      "/tmp/conv_out.json");
  expect(cr.exit_code == 0, "run executes the ConvLSTM");
  {
    nlohmann::json out = nlohmann::json::parse(slurp("/tmp/conv_out.json"));
    expect(out.contains("logits") && out["logits"]["values"].size() == 3,
           "the ConvLSTM emits three logits");
  }

  if (g_failures) std::printf("%d CLI check(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
