#pragma once

#include "rieman/graph.hpp"
#include "rieman/scene_synth.hpp"
#include "rieman/solver.hpp"

#include <string>

namespace rieman {

// Parses the line-oriented graph format (see README for the grammar).
// Record order in the file is free; blank lines and full-line '#' comments
// are allowed. Fails atomically: any syntax, duplicate-id, dangling-
// reference, non-finite-number or invariant violation throws ParseError
// with a 1-based line and column and nothing is returned.
FactorGraph read_graph(const std::string& text);
FactorGraph read_graph_file(const std::string& path);

// Canonical serialization: fixed record-kind order, ids ascending,
// observations sorted by (pose, landmark), group members ascending, reals
// as shortest round-trip decimals, LF line endings. Reading canonical text
// and writing it again reproduces it byte for byte.
std::string write_graph(const FactorGraph& graph);
void write_graph_file(const FactorGraph& graph, const std::string& path);

struct RunConfig {
  SolveConfig solve;
  SceneSpec scene;
};

// `key = value` configuration, one pair per line, '#' comments. Unknown
// keys, duplicate keys, malformed or out-of-range values throw ParseError.
// An empty document yields all defaults.
RunConfig read_config(const std::string& text);
RunConfig read_config_file(const std::string& path);

}  // namespace rieman
