#pragma once

#include <string>
#include <vector>

#include "qdiff/qmodule.hpp"

namespace qdiff {

struct CheckItem {
  std::string invariant;
  double residual = 0.0;
  bool pass = false;
};

struct CorpusEntry {
  std::string name;
  ModuleSpec module;
};

/// Tschakaloff module (q = 2), rank-1 final example (q = 3, alpha = 2,
/// beta = 1, u = 1 + z in canonical form), a delta = 2 module with a 2 x 2
/// block, and a two-level module with slopes 0, 1, 3.
std::vector<CorpusEntry> builtin_corpus();

/// Invariant suite for one module; names are prefixed with `name` + "/".
/// Resonance at equal slopes becomes a failing item instead of an exception.
std::vector<CheckItem> check_module(const std::string& name, const ModuleSpec& m);

/// [{"invariant": ..., "pass": ..., "residual": ...}, ...], one item per line.
std::string check_report_json(const std::vector<CheckItem>& items);

}  // namespace qdiff
