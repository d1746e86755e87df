#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qdiff/check.hpp"
#include "qdiff/errors.hpp"
#include "qdiff/formal_gauge.hpp"
#include "qdiff/phi_a.hpp"
#include "qdiff/qborel.hpp"
#include "qdiff/spec_io.hpp"
#include "qdiff/summation.hpp"

using namespace qdiff;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kCheck = 1, kValidation = 2, kPrecondition = 3, kIo = 4 };

cplx parse_complex(const std::string& s, const std::string& flag) {
  std::istringstream in(s);
  double re = 0.0, im = 0.0;
  char comma = 0;
  if (!(in >> re)) throw ValidationError(flag + ": expected re,im");
  if (in >> comma) {
    if (comma != ',' || !(in >> im)) throw ValidationError(flag + ": expected re,im");
  }
  in >> std::ws;
  if (!in.eof()) throw ValidationError(flag + ": expected re,im");
  return {re, im};
}

std::string fmt(cplx z) { return format_real(z.real()) + (z.imag() < 0 ? "-" : "+") + format_real(std::abs(z.imag())) + "i"; }

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

void print_matrix(const CMatrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) std::cout << (c ? "  " : "") << fmt(m(r, c));
    std::cout << "\n";
  }
}

std::string key_name(int i, int j) { return std::to_string(i + 1) + "," + std::to_string(j + 1); }

cplx basepoint(const QContext& ctx, const std::string& flag, const std::vector<cplx>& lifts) {
  if (!flag.empty()) return parse_complex(flag, "--a");
  bool nudged = false;
  const cplx a = default_basepoint(ctx, lifts, &nudged);
  if (nudged) std::cerr << "note: basepoint nudged to a = " << fmt(a) << "\n";
  return a;
}

int cmd_newton(const std::string& path) {
  const ModuleSpec m = load_module_spec(path);
  for (const auto& [slope, mult] : newton(m)) std::cout << slope << ": " << mult << "\n";
  return kOk;
}

int cmd_graded(const std::string& path) {
  std::cout << dump_module_spec(graded(load_module_spec(path))) << "\n";
  return kOk;
}

int cmd_formal(const std::string& path, int order) {
  const ModuleSpec m = load_module_spec(path);
  if (order <= 0) order = default_formal_order(m);
  const GaugeMatrix f = formal_gauge(m, order);
  json out;
  out["order"] = order;
  out["reliable"] = json::array({f.reliable.lo, f.reliable.hi});
  out["residual"] = verify_gauge(m, f, order);
  json blocks = json::object();
  for (const auto& [key, s] : f.blocks) {
    json terms = json::array();
    for (int n = s.window().lo; n <= std::min(s.window().hi, f.reliable.hi); ++n)
      terms.push_back({{"degree", n}, {"matrix", matrix_json(s.coeff(n))}});
    blocks[key_name(key.first, key.second)] = terms;
  }
  out["blocks"] = blocks;
  std::cout << out.dump(2) << "\n";
  return kOk;
}

int cmd_sum(const std::string& path, const std::string& c_flag, const std::string& a_flag, int window) {
  const ModuleSpec m = load_module_spec(path);
  const cplx c = parse_complex(c_flag, "--c");
  const cplx a = basepoint(m.context(), a_flag, {c});
  SumOptions opts;
  opts.window = window;
  opts.check_pole_condition = true;
  const SummedGauge g = sum_in_direction(m, c, opts);
  json out;
  out["c"] = complex_json(c);
  out["a"] = complex_json(a);
  out["window"] = g.window;
  out["pole_condition"] = g.pole_condition_ok;
  out["value"] = matrix_json(g.eval(a));
  out["tail_bound"] = g.tail_bound(a);
  out["functional_residual"] = functional_residual(m, g, a);
  std::cout << out.dump(2) << "\n";
  return g.pole_condition_ok ? kOk : kCheck;
}

int cmd_stokes(const std::string& path, const std::string& c0_flag, const std::string& c_flag,
               const std::string& a_flag) {
  const ModuleSpec m = load_module_spec(path);
  const cplx c0 = parse_complex(c0_flag, "--c0"), c = parse_complex(c_flag, "--c");
  const cplx a = basepoint(m.context(), a_flag, {c0, c});
  const StokesElement s = stokes_operator(m, c0, c, a);
  print_matrix(s.matrix.value);
  json out;
  out["c0"] = complex_json(c0);
  out["c"] = complex_json(c);
  out["a"] = complex_json(a);
  out["matrix"] = matrix_json(s.matrix.value);
  out["log"] = matrix_json(log_unipotent(s.matrix).value);
  out["tail_bound"] = s.tail_bound;
  std::cout << out.dump() << "\n";
  return kOk;
}

int cmd_alien(const std::string& path, const std::string& xi_flag, const std::string& a_flag,
              const std::string& method, double rho, int nodes, const std::string& c0_flag) {
  const ModuleSpec m = load_module_spec(path);
  const cplx xi = parse_complex(xi_flag, "--xi");
  if (method != "residue" && method != "closed" && method != "both")
    throw ValidationError("--method: expected residue, closed or both");
  const cplx a = basepoint(m.context(), a_flag, {xi});
  AlienOptions opts;
  if (rho > 0.0) opts.rho = rho;
  opts.nodes = nodes;
  if (!c0_flag.empty()) opts.c0 = parse_complex(c0_flag, "--c0");

  json out;
  out["xi"] = complex_json(xi);
  out["a"] = complex_json(a);
  auto emit = [&](const char* label, const AlienDerivation& d) {
    std::cout << label << ":\n";
    print_matrix(d.matrix.value);
    json j;
    j["matrix"] = matrix_json(d.matrix.value);
    json levels = json::object();
    for (const auto& [delta, comp] : level_decompose(d)) levels[std::to_string(delta)] = matrix_json(comp.value);
    j["levels"] = levels;
    if (d.nodes > 0) {
      j["rho"] = d.rho;
      j["nodes"] = d.nodes;
      j["richardson"] = d.richardson;
      j["c0"] = complex_json(d.c0);
    }
    out[label] = j;
    return d.matrix.value;
  };
  CMatrix residue, closed;
  if (method != "closed") {
    opts.method = AlienMethod::Contour;
    residue = emit("residue", alien_derivation(m, xi, a, opts));
  }
  if (method != "residue") {
    opts.method = AlienMethod::ClosedForm;
    closed = emit("closed", alien_derivation(m, xi, a, opts));
  }
  if (method == "both") {
    const double dev = residue_deviation(residue, closed);
    out["deviation"] = dev;
    const PhiAReport r = phi_a_compare(m, a, {xi}, opts);
    out["literal_display"] = matrix_json(r.points[0].literal);
    out["literal_ratio"] = complex_json(r.points[0].literal_ratio);
    std::cout << "deviation: " << format_real(dev) << "\n";
  }
  std::cout << out.dump() << "\n";
  return kOk;
}

int cmd_scan(const std::string& path, const std::string& a_flag, const std::string& grid,
             const std::string& out_path, const std::string& c0_flag) {
  const ModuleSpec m = load_module_spec(path);
  const QContext& ctx = m.context();
  int nr = 0, na = 0;
  char x = 0;
  std::istringstream gs(grid);
  if (!(gs >> nr >> x >> na) || (x != 'x' && x != 'X') || nr < 1 || na < 1)
    throw ValidationError("--grid: expected NxM with N, M >= 1");
  const SingularLocus locus = singular_locus(m);
  std::vector<cplx> lifts;
  for (const auto& p : locus.points) lifts.push_back(p.point.lift());
  const cplx a = basepoint(ctx, a_flag, lifts);
  const cplx c0 = c0_flag.empty() ? default_c0(m, a) : parse_complex(c0_flag, "--c0");

  std::cout << "singular locus (" << locus.points.size() << " points):\n";
  for (const auto& p : locus.points)
    std::cout << "  c = " << fmt(p.point.lift()) << "  blocks " << key_name(p.i, p.j) << "  alpha = " << fmt(p.alpha)
              << "  beta = " << fmt(p.beta) << "  root " << p.root_index << "  q^" << p.q_power << "\n";

  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write " + out_path);
  out << "c_re,c_im,block_i,block_j,entry_row,entry_col,ls_re,ls_im,tail_bound\n";
  const LsMap ls(m, c0, a);
  const BlockLayout& layout = m.layout();
  int skipped = 0;
  for (int ir = 0; ir < nr; ++ir)
    for (int ia = 0; ia < na; ++ia) {
      const double t = (ir + 0.5) / nr;
      const cplx c = std::exp(t * std::log(ctx.q())) * std::polar(1.0, kPi * (2.0 * ia + 1.0) / na);
      const EllipticPoint p(ctx, c);
      if (locus.distance(p) < ctx.sqrt_tol() || p.distance(EllipticPoint(ctx, -a)) < ctx.sqrt_tol()) {
        ++skipped;
        continue;
      }
      double tail = 0.0;
      const BlockMatrix v = ls(c, tail);
      for (int i = 0; i < layout.blocks(); ++i)
        for (int j = i + 1; j < layout.blocks(); ++j) {
          const CMatrix b = v.block(i, j);
          for (Eigen::Index r = 0; r < b.rows(); ++r)
            for (Eigen::Index col = 0; col < b.cols(); ++col)
              out << format_real(c.real()) << ',' << format_real(c.imag()) << ',' << i + 1 << ',' << j + 1 << ','
                  << r + 1 << ',' << col + 1 << ',' << format_real(b(r, col).real()) << ','
                  << format_real(b(r, col).imag()) << ',' << format_real(tail) << '\n';
        }
    }
  if (!out) throw IoError("write failed: " + out_path);
  std::cout << "skipped " << skipped << " grid points near singular directions\n";
  return kOk;
}

int cmd_borel(const std::string& path, int delta_flag, double branch) {
  const ModuleSpec m = load_module_spec(path);
  const OneLevelData d = one_level_data(m);
  if (delta_flag > 0 && delta_flag != d.delta)
    throw ValidationError("--delta: module level is " + std::to_string(d.delta));
  const QContext& ctx = m.context();
  const LevelOperator lo = level_root(ctx, d.delta, d.A, d.B, branch);
  if (lo.near_branch_cut) std::cerr << "note: spectrum touches the root branch cut; consider --branch\n";
  const MatrixSeries bu = q_borel(ctx, d.U, d.delta);
  json out;
  out["delta"] = d.delta;
  json inv = json::array();
  for (std::size_t k = 0; k < lo.roots.size(); ++k) {
    const CMatrix v = borel_eval_at_operator(bu, lo.roots[k], ctx.tol());
    std::cout << "j = " << fmt(lo.unit_roots[k]) << ":\n";
    print_matrix(v);
    inv.push_back({{"j", complex_json(lo.unit_roots[k])}, {"value", matrix_json(v)}});
  }
  out["invariants"] = inv;
  const ConvergenceVerdict v = convergence_criterion(ctx, d.delta, d.A, d.B, d.U);
  const char* verdict = v.verdict == Convergence::Convergent ? "convergent"
                        : v.verdict == Convergence::Divergent ? "divergent"
                                                              : "inconclusive";
  std::cout << "verdict: " << verdict << "\n";
  out["verdict"] = verdict;
  out["witness"] = v.witness;
  out["formal_geometric"] = v.formal_geometric;
  out["consistent"] = v.consistent;
  std::cout << out.dump() << "\n";
  return kOk;
}

int cmd_tensor(const std::string& p1, const std::string& p2) {
  const TensorProduct t = tensor(load_module_spec(p1), load_module_spec(p2));
  std::cout << dump_module_spec(t.module) << "\n";
  json pos = t.position;
  std::cout << "{\"position\":" << pos.dump() << "}\n";
  return kOk;
}

int cmd_check(const std::string& path, bool builtin) {
  if (!builtin && path.empty()) throw ValidationError("check: give a spec path or --builtin");
  std::vector<CheckItem> items;
  if (builtin) {
    for (const auto& e : builtin_corpus()) {
      auto v = check_module(e.name, e.module);
      items.insert(items.end(), v.begin(), v.end());
    }
  } else {
    items = check_module("spec", load_module_spec(path));
  }
  std::cout << check_report_json(items);
  bool ok = true;
  for (const auto& it : items) {
    if (!it.pass) {
      ok = false;
      std::cerr << "FAIL " << it.invariant;
      if (it.invariant.find("equal_slope_nonresonance") != std::string::npos)
        std::cerr << ": equal-slope blocks resonate (spectra meet modulo q^Z)";
      std::cerr << "\n";
    }
  }
  return ok ? kOk : kCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdiff: analytic classification invariants of q-difference modules"};
  app.require_subcommand(1);
  std::string spec, spec2, c_flag, c0_flag, a_flag, xi_flag, method = "both", grid = "16x32", out_path = "scan.csv";
  int order = 0, window = 0, nodes = 64, delta = 0;
  double rho = 0.0, branch = 0.0;
  bool builtin = false;

  auto* newton_cmd = app.add_subcommand("newton", "slope: multiplicity table");
  newton_cmd->add_option("spec", spec)->required();
  auto* graded_cmd = app.add_subcommand("graded", "graded module as canonical JSON");
  graded_cmd->add_option("spec", spec)->required();
  auto* formal_cmd = app.add_subcommand("formal", "formal gauge coefficients");
  formal_cmd->add_option("spec", spec)->required();
  formal_cmd->add_option("--order", order, "truncation order (default from slopes)");
  auto* sum_cmd = app.add_subcommand("sum", "summed gauge in direction c");
  sum_cmd->add_option("spec", spec)->required();
  sum_cmd->add_option("--c", c_flag, "direction re,im")->required();
  sum_cmd->add_option("--a", a_flag, "basepoint re,im");
  sum_cmd->add_option("--window", window, "coefficient window (default from decay)");
  auto* stokes_cmd = app.add_subcommand("stokes", "Stokes operator between two directions");
  stokes_cmd->add_option("spec", spec)->required();
  stokes_cmd->add_option("--c0", c0_flag, "reference direction re,im")->required();
  stokes_cmd->add_option("--c", c_flag, "direction re,im")->required();
  stokes_cmd->add_option("--a", a_flag, "basepoint re,im");
  auto* alien_cmd = app.add_subcommand("alien", "alien derivation at xi");
  alien_cmd->add_option("spec", spec)->required();
  alien_cmd->add_option("--xi", xi_flag, "lift of the direction re,im")->required();
  alien_cmd->add_option("--a", a_flag, "basepoint re,im");
  alien_cmd->add_option("--method", method, "residue, closed or both");
  alien_cmd->add_option("--rho", rho, "contour radius (shrunk automatically)");
  alien_cmd->add_option("--nodes", nodes, "coarse trapezoid node count");
  alien_cmd->add_option("--c0", c0_flag, "reference direction re,im");
  auto* scan_cmd = app.add_subcommand("scan", "LS values on a polar grid of the fundamental annulus");
  scan_cmd->add_option("spec", spec)->required();
  scan_cmd->add_option("--a", a_flag, "basepoint re,im");
  scan_cmd->add_option("--grid", grid, "NxM radial x angular samples");
  scan_cmd->add_option("--out", out_path, "CSV path");
  scan_cmd->add_option("--c0", c0_flag, "reference direction re,im");
  auto* borel_cmd = app.add_subcommand("borel", "Borel invariants and convergence verdict");
  borel_cmd->add_option("spec", spec)->required();
  borel_cmd->add_option("--delta", delta, "expected level");
  borel_cmd->add_option("--branch", branch, "rotation of the root branch cut (radians)");
  auto* tensor_cmd = app.add_subcommand("tensor", "tensor product of two modules");
  tensor_cmd->add_option("spec", spec)->required();
  tensor_cmd->add_option("spec2", spec2)->required();
  auto* check_cmd = app.add_subcommand("check", "invariant suite with JSON report");
  check_cmd->add_option("spec", spec);
  check_cmd->add_flag("--builtin", builtin, "run on the built-in corpus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*newton_cmd) return cmd_newton(spec);
    if (*graded_cmd) return cmd_graded(spec);
    if (*formal_cmd) return cmd_formal(spec, order);
    if (*sum_cmd) return cmd_sum(spec, c_flag, a_flag, window);
    if (*stokes_cmd) return cmd_stokes(spec, c0_flag, c_flag, a_flag);
    if (*alien_cmd) return cmd_alien(spec, xi_flag, a_flag, method, rho, nodes, c0_flag);
    if (*scan_cmd) return cmd_scan(spec, a_flag, grid, out_path, c0_flag);
    if (*borel_cmd) return cmd_borel(spec, delta, branch);
    if (*tensor_cmd) return cmd_tensor(spec, spec2);
    if (*check_cmd) return cmd_check(spec, builtin);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const ResonanceError& e) {
    std::cerr << "resonance: " << e.what() << "\n";
    return kPrecondition;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << "\n";
    return kPrecondition;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheck;
  }
  return kOk;
}
