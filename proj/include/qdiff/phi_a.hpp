#pragma once

#include <vector>

#include "qdiff/summation.hpp"

namespace qdiff {

struct PhiAPoint {
  cplx xi;
  CMatrix contour;  // residue of LS
  CMatrix closed;   // corrected closed form
  CMatrix literal;  // theta^{-delta}(L^{-1}) delta L^{delta-1} B_q U(L)
  double deviation = 0.0;      // residue_deviation(contour, closed)
  cplx literal_ratio = 0.0;    // least-squares factor literal / closed
  double literal_spread = 0.0; // how far literal is from literal_ratio * closed
};

struct PhiAReport {
  std::vector<PhiAPoint> points;
  double max_deviation = 0.0;
};

/// |x - y| relative to the larger of |x|, |y|; absolute when both are below 1e-12.
double residue_deviation(const CMatrix& x, const CMatrix& y);

/// Compares the contour residue of LS with the closed form at every given
/// lift (all singular lifts in the fundamental annulus when empty). Two slope
/// blocks only.
PhiAReport phi_a_compare(const ModuleSpec& m, cplx a, std::vector<cplx> xis = {},
                         const AlienOptions& opts = {});

}  // namespace qdiff
