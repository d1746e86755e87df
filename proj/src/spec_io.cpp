#include "qdiff/spec_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qdiff/errors.hpp"

namespace qdiff {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path, "missing field \"" + key + "\"");
  return *it;
}

double real_at(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "expected a finite number");
  return x;
}

int int_at(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

cplx complex_at(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) fail(path, "expected [re, im]");
  return {real_at(v[0], path + "[0]"), real_at(v[1], path + "[1]")};
}

CMatrix matrix_at(const json& v, const std::string& path, int rows, int cols) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows)
    fail(path, "expected " + std::to_string(rows) + " rows");
  CMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    const json& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      fail(rp, "expected " + std::to_string(cols) + " entries");
    for (int c = 0; c < cols; ++c)
      m(r, c) = complex_at(row[static_cast<std::size_t>(c)], rp + "[" + std::to_string(c) + "]");
  }
  return m;
}

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json matrix_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

void write_canonical(const json& v, std::string& out) {
  switch (v.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        write_canonical(it.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        write_canonical(v[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float:
      out += format_real(v.get<double>());
      break;
    default:
      out += v.dump();
  }
}

}  // namespace

std::string format_real(double x) {
  if (x == 0.0) x = 0.0;  // drop the sign of negative zero
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

ModuleSpec parse_module_spec(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    fail("$", "malformed JSON at line " + std::to_string(line) + " (byte " + std::to_string(e.byte) + ")");
  }
  if (!doc.is_object()) fail("$", "expected an object");
  const cplx q = complex_at(field(doc, "q", "$"), "$.q");
  double tol = 1e-10;
  if (doc.contains("tol")) tol = real_at(doc["tol"], "$.tol");
  if (!(std::abs(q) > 1.0)) fail("$.q", "|q| must be > 1");
  if (!(tol > 0.0)) fail("$.tol", "must be > 0");
  const QContext ctx(q, tol);

  const json& js = field(doc, "slopes", "$");
  if (!js.is_array() || js.empty()) fail("$.slopes", "expected a non-empty array");
  std::vector<int> slopes;
  for (std::size_t i = 0; i < js.size(); ++i) slopes.push_back(int_at(js[i], "$.slopes[" + std::to_string(i) + "]"));

  const json& jr = field(doc, "ranks", "$");
  if (!jr.is_array() || jr.size() != slopes.size()) fail("$.ranks", "expected one rank per slope");
  std::vector<int> ranks;
  for (std::size_t i = 0; i < jr.size(); ++i) {
    const int r = int_at(jr[i], "$.ranks[" + std::to_string(i) + "]");
    if (r < 1) fail("$.ranks[" + std::to_string(i) + "]", "rank must be >= 1");
    ranks.push_back(r);
  }

  const json& jb = field(doc, "blocks", "$");
  if (!jb.is_array() || jb.size() != slopes.size()) fail("$.blocks", "expected one block per slope");
  std::vector<CMatrix> blocks;
  for (std::size_t i = 0; i < jb.size(); ++i)
    blocks.push_back(matrix_at(jb[i], "$.blocks[" + std::to_string(i) + "]", ranks[i], ranks[i]));

  BlockMap upper;
  if (doc.contains("U")) {
    const json& ju = doc["U"];
    if (!ju.is_object()) fail("$.U", "expected an object keyed by \"i,j\"");
    for (auto it = ju.begin(); it != ju.end(); ++it) {
      const std::string up = "$.U[\"" + it.key() + "\"]";
      int i = 0, j = 0;
      char comma = 0;
      std::istringstream ks(it.key());
      if (!(ks >> i >> comma >> j) || comma != ',' || !ks.eof())
        fail(up, "key must be \"i,j\"");
      if (i < 1 || j <= i || j > static_cast<int>(slopes.size()))
        fail(up, "need 1 <= i < j <= number of blocks");
      const int ri = ranks[static_cast<std::size_t>(i - 1)], rj = ranks[static_cast<std::size_t>(j - 1)];
      if (!it.value().is_array()) fail(up, "expected a list of {degree, matrix}");
      std::map<int, CMatrix> terms;
      for (std::size_t t = 0; t < it.value().size(); ++t) {
        const std::string tp = up + "[" + std::to_string(t) + "]";
        const json& term = it.value()[t];
        if (!term.is_object()) fail(tp, "expected {degree, matrix}");
        const int deg = int_at(field(term, "degree", tp), tp + ".degree");
        if (terms.count(deg)) fail(tp + ".degree", "duplicate degree");
        terms.emplace(deg, matrix_at(field(term, "matrix", tp), tp + ".matrix", ri, rj));
      }
      if (terms.empty()) continue;
      MatrixSeries s = MatrixSeries::polynomial(ri, rj, {terms.begin()->first, terms.rbegin()->first});
      for (const auto& [deg, mat] : terms) s.set_coeff(deg, mat);
      upper.emplace(BlockKey{i - 1, j - 1}, s);
    }
  }
  return ModuleSpec(ctx, slopes, blocks, upper);
}

ModuleSpec load_module_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_module_spec(ss.str());
}

std::string dump_module_spec(const ModuleSpec& m) {
  json doc = json::object();
  doc["q"] = complex_json(m.context().q());
  doc["tol"] = m.context().tol();
  doc["slopes"] = m.slopes();
  doc["ranks"] = m.ranks();
  json blocks = json::array();
  for (const auto& b : m.blocks()) blocks.push_back(matrix_json(b));
  doc["blocks"] = blocks;
  json u = json::object();
  for (const auto& [key, s] : m.upper()) {
    json terms = json::array();
    for (int n = s.window().lo; n <= s.window().hi; ++n) {
      const CMatrix c = s.coeff(n);
      if (c.isZero(0.0)) continue;
      terms.push_back({{"degree", n}, {"matrix", matrix_json(c)}});
    }
    u[std::to_string(key.first + 1) + "," + std::to_string(key.second + 1)] = terms;
  }
  doc["U"] = u;
  std::string out;
  write_canonical(doc, out);
  return out;
}

}  // namespace qdiff
