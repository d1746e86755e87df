#include "qdiff/check.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <json.hpp>

#include "qdiff/errors.hpp"
#include "qdiff/formal_gauge.hpp"
#include "qdiff/phi_a.hpp"
#include "qdiff/qborel.hpp"
#include "qdiff/spec_io.hpp"
#include "qdiff/summation.hpp"
#include "qdiff/theta.hpp"

namespace qdiff {

namespace {

CMatrix scalar(cplx x) { return CMatrix::Constant(1, 1, x); }

MatrixSeries poly(int rows, int cols, int lo, const std::vector<CMatrix>& coeffs) {
  MatrixSeries s = MatrixSeries::polynomial(rows, cols, {lo, lo + static_cast<int>(coeffs.size()) - 1});
  for (std::size_t i = 0; i < coeffs.size(); ++i) s.set_coeff(lo + static_cast<int>(i), coeffs[i]);
  return s;
}

/// Regular directions from a fixed stream, away from the locus and from -a q^Z.
std::vector<cplx> regular_directions(const ModuleSpec& m, const SingularLocus& locus, cplx a, int count,
                                     std::uint64_t seed) {
  const QContext& ctx = m.context();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<cplx> out;
  while (static_cast<int>(out.size()) < count) {
    const cplx c = std::exp((0.2 + 0.6 * u(rng)) * std::log(ctx.q())) * std::polar(1.0, 2.0 * kPi * u(rng));
    const EllipticPoint p(ctx, c);
    if (locus.distance(p) < 0.05 || p.distance(EllipticPoint(ctx, -a)) < 0.05) continue;
    out.push_back(p.lift());
  }
  return out;
}

}  // namespace

std::vector<CorpusEntry> builtin_corpus() {
  std::vector<CorpusEntry> out;
  {
    const QContext ctx(cplx{2.0, 0.0});
    out.push_back({"tschakaloff", ModuleSpec(ctx, {-1, 0}, {scalar(1.0), scalar(1.0)},
                                             {{{0, 1}, poly(1, 1, -1, {scalar(1.0)})}})});
  }
  {
    // u = 1 + z renormalized to canonical support: u_0 + alpha u_1 / beta = 3.
    const QContext ctx(cplx{3.0, 0.0});
    out.push_back({"rank1_final_example", ModuleSpec(ctx, {0, 1}, {scalar(2.0), scalar(1.0)},
                                                     {{{0, 1}, poly(1, 1, 0, {scalar(3.0)})}})});
  }
  {
    const QContext ctx(cplx{2.0, 0.3});
    CMatrix A(2, 2);
    A << 1.3, 0.2, 0.1, 1.7;
    CMatrix u0(2, 1), u1(2, 1);
    u0 << 1.0, 0.5;
    u1 << -0.3, 0.8;
    out.push_back({"delta2", ModuleSpec(ctx, {0, 2}, {A, scalar(1.0)}, {{{0, 1}, poly(2, 1, 0, {u0, u1})}})});
  }
  {
    const QContext ctx(cplx{2.0, 0.0});
    BlockMap up;
    up.emplace(BlockKey{0, 1}, poly(1, 1, 0, {scalar(1.0)}));
    up.emplace(BlockKey{0, 2}, poly(1, 1, 0, {scalar(0.5), scalar(cplx{0.0, 1.0}), scalar(-0.25)}));
    up.emplace(BlockKey{1, 2}, poly(1, 1, 1, {scalar(0.75), scalar(0.5)}));
    out.push_back({"two_level", ModuleSpec(ctx, {0, 1, 3},
                                           {scalar(1.3), scalar(cplx{1.1, 0.6}), scalar(1.7)}, up)});
  }
  return out;
}

std::vector<CheckItem> check_module(const std::string& name, const ModuleSpec& m) {
  std::vector<CheckItem> items;
  auto add = [&](const std::string& inv, double residual, double bound) {
    items.push_back({name + "/" + inv, residual, residual <= bound});
  };
  const QContext& ctx = m.context();

  {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const cplx z = std::polar(std::exp(1.5 * u(rng)), kPi * u(rng));
      const cplx lhs = theta_eval(ctx, ctx.q() * z), rhs = z * theta_eval(ctx, z);
      worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
    }
    add("theta.functional_equation", worst, 1e-10);
  }
  std::set<int> gaps{1};
  for (int i = 0; i < m.k(); ++i)
    for (int j = i + 1; j < m.k(); ++j)
      if (m.slope(j) > m.slope(i)) gaps.insert(m.slope(j) - m.slope(i));
  {
    double worst = 0.0, pou = 0.0;
    for (int d : gaps) {
      worst = std::max(worst, theta_power(ctx, d, 15).recurrence_residual());
      const auto c = partition_of_unity(d, cplx{0.8, 0.3});
      for (int i = 0; i < d; ++i) pou = std::max(pou, std::abs(c[static_cast<std::size_t>(i)] - (i == 0 ? 1.0 : 0.0)));
    }
    add("theta.power_recurrence", worst, 1e-10);
    add("qborel.partition_of_unity", pou, 1e-12);
  }
  {
    const std::string once = dump_module_spec(m);
    add("spec_io.round_trip", dump_module_spec(parse_module_spec(once)) == once ? 0.0 : 1.0, 0.0);
  }

  SingularLocus locus;
  try {
    locus = singular_locus(m);
    add("qmodule.equal_slope_nonresonance", 0.0, 0.0);
  } catch (const ResonanceError&) {
    add("qmodule.equal_slope_nonresonance", 1.0, 0.0);
    return items;
  }

  const int order = std::max(60, m.slopes().back() - m.slopes().front());
  const GaugeMatrix f = formal_gauge(m, order);
  add("formal.verify_gauge", verify_gauge(m, f, order), 1e-10);
  if (m.k() < 2) return items;

  std::vector<cplx> lifts;
  for (const auto& p : locus.points) lifts.push_back(p.point.lift());
  const cplx a = default_basepoint(ctx, lifts);
  const std::vector<cplx> dirs = regular_directions(m, locus, a, 3, 7);
  {
    double worst = 0.0;
    for (cplx c : dirs) worst = std::max(worst, functional_residual(m, sum_in_direction(m, c), a));
    add("summation.functional_equation", worst, 1e-9);
  }
  {
    const SummedGauge s0 = sum_in_direction(m, dirs[0]);
    const SummedGauge s1 = sum_in_direction(m, dirs[1]);
    const SummedGauge s2 = sum_in_direction(m, dirs[2]);
    const CMatrix lhs = stokes_operator(s0, s1, a).matrix.value * stokes_operator(s1, s2, a).matrix.value;
    const CMatrix rhs = stokes_operator(s0, s2, a).matrix.value;
    add("summation.stokes_cocycle", (lhs - rhs).cwiseAbs().maxCoeff(), 1e-8);
  }
  {
    const LsMap ls(m, dirs[0], a);
    const BlockMatrix v = ls(dirs[1]);
    double below = 0.0;
    for (int i = 0; i < v.layout.blocks(); ++i)
      for (int j = 0; j <= i; ++j) below = std::max(below, v.block(i, j).cwiseAbs().maxCoeff());
    add("summation.ls_strictly_upper", below, 0.0);
  }
  {
    AlienOptions opts;
    opts.c0 = dirs[0];
    const AlienDerivation d = alien_derivation(m, dirs[2], a, opts);
    add("alien.zero_off_locus", d.matrix.value.cwiseAbs().maxCoeff(), 1e-9);
  }
  if (m.k() == 2 && !locus.empty()) {
    const PhiAReport r = phi_a_compare(m, a);
    add("alien.dual_route", r.max_deviation, 1e-7);
    const OneLevelData d = one_level_data(m);
    const ConvergenceVerdict v = convergence_criterion(ctx, d.delta, d.A, d.B, d.U);
    add("qborel.convergence_consistency", v.consistent ? 0.0 : 1.0, 0.0);
  }
  return items;
}

std::string check_report_json(const std::vector<CheckItem>& items) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < items.size(); ++i) {
    const CheckItem& it = items[i];
    out += "  {\"invariant\":" + nlohmann::json(it.invariant).dump() + ",\"pass\":" + (it.pass ? "true" : "false") +
           ",\"residual\":" + (std::isfinite(it.residual) ? format_real(it.residual) : std::string("null")) + "}";
    out += i + 1 < items.size() ? ",\n" : "\n";
  }
  out += "]\n";
  return out;
}

}  // namespace qdiff
