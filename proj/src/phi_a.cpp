#include "qdiff/phi_a.hpp"

#include <algorithm>

#include "qdiff/errors.hpp"
#include "qdiff/qborel.hpp"

namespace qdiff {

double residue_deviation(const CMatrix& x, const CMatrix& y) {
  const double diff = (x - y).cwiseAbs().maxCoeff();
  const double scale = std::max(x.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff());
  return scale < 1e-12 ? diff : diff / scale;
}

PhiAReport phi_a_compare(const ModuleSpec& m, cplx a, std::vector<cplx> xis, const AlienOptions& opts) {
  const OneLevelData d = one_level_data(m);
  const QContext& ctx = m.context();
  if (xis.empty())
    for (const auto& p : singular_locus(m).points) xis.push_back(p.point.lift());
  PhiAReport out;
  AlienOptions contour = opts;
  contour.method = AlienMethod::Contour;
  for (cplx xi : xis) {
    PhiAPoint p;
    p.xi = xi;
    p.contour = alien_derivation(m, xi, a, contour).matrix.block(0, 1);
    p.closed = closed_form_residue(ctx, d.delta, d.A, d.B, d.U, xi, a);
    p.literal = literal_closed_form(ctx, d.delta, d.A, d.B, d.U, xi);
    p.deviation = residue_deviation(p.contour, p.closed);
    const cplx num = (p.closed.adjoint() * p.literal).trace();
    const double den = p.closed.squaredNorm();
    if (den > 0.0) {
      p.literal_ratio = num / den;
      p.literal_spread = (p.literal - p.literal_ratio * p.closed).cwiseAbs().maxCoeff() /
                         std::max(p.literal.cwiseAbs().maxCoeff(), 1e-300);
    }
    out.max_deviation = std::max(out.max_deviation, p.deviation);
    out.points.push_back(std::move(p));
  }
  return out;
}

}  // namespace qdiff
