#pragma once

#include <string>

#include "qdiff/qmodule.hpp"

namespace qdiff {

/// Parses a module spec document:
///   {"q": [re, im], "tol": real, "slopes": [int...], "ranks": [int...],
///    "blocks": [matrix...], "U": {"i,j": [{"degree": n, "matrix": matrix}...]}}
/// Matrices are row-major lists of rows of [re, im] pairs; "i,j" is 1-based.
/// Errors are ValidationError with a JSON path ("$.blocks[0][1]: ...").
ModuleSpec parse_module_spec(const std::string& text);

/// Reads and parses a file; IoError when it cannot be read.
ModuleSpec load_module_spec(const std::string& path);

/// Canonical JSON: sorted keys, no whitespace, reals as %.17g.
std::string dump_module_spec(const ModuleSpec& m);

/// Formats a real the way the canonical dump does.
std::string format_real(double x);

}  // namespace qdiff
