// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "qrnn/graph.hpp"

namespace qrnn {

// JSON graph format, schema version 1: {"version":1,"graph":{...}}.
// Threshold matrices serialize +/-inf as the strings "inf"/"-inf".
std::string serialize(const Graph& g);

// Throws ParseError (with byte offset / line context) on malformed input and
// SchemaVersionError on an unknown version tag.
Graph deserialize(const std::string& bytes);

Graph load_graph_file(const std::string& path);
void save_graph_file(const Graph& g, const std::string& path);

}  // namespace qrnn
