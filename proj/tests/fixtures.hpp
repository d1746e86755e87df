#pragma once

#include <random>
#include <vector>

#include "qdiff/qmodule.hpp"

namespace fixtures {

using qdiff::cplx;
using qdiff::CMatrix;
using qdiff::MatrixSeries;

inline CMatrix scalar(cplx x) { return CMatrix::Constant(1, 1, x); }

inline MatrixSeries poly(int rows, int cols, int lo, const std::vector<CMatrix>& coeffs) {
  MatrixSeries s = MatrixSeries::polynomial(rows, cols, {lo, lo + static_cast<int>(coeffs.size()) - 1});
  for (std::size_t i = 0; i < coeffs.size(); ++i) s.set_coeff(lo + static_cast<int>(i), coeffs[i]);
  return s;
}

inline CMatrix random_matrix(std::mt19937_64& rng, int r, int c, double spread = 1.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  CMatrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = cplx{u(rng), u(rng)};
  return m;
}

/// (alpha, u; 0, beta z) over q with a constant u.
inline qdiff::ModuleSpec rank1(cplx q, cplx alpha, cplx beta, cplx u) {
  return qdiff::ModuleSpec(qdiff::QContext(q), {0, 1}, {scalar(alpha), scalar(beta)},
                           {{{0, 1}, poly(1, 1, 0, {scalar(u)})}});
}

/// z^0 A, z^delta B with upper block U (degrees 0..delta-1).
inline qdiff::ModuleSpec one_level(cplx q, int delta, const CMatrix& A, const CMatrix& B,
                                   const std::vector<CMatrix>& U) {
  return qdiff::ModuleSpec(qdiff::QContext(q), {0, delta}, {A, B},
                           {{{0, 1}, poly(static_cast<int>(A.rows()), static_cast<int>(B.rows()), 0, U)}});
}

inline qdiff::ModuleSpec tschakaloff(cplx q) {
  return qdiff::ModuleSpec(qdiff::QContext(q), {-1, 0}, {scalar(1.0), scalar(1.0)},
                           {{{0, 1}, poly(1, 1, -1, {scalar(1.0)})}});
}

inline qdiff::ModuleSpec two_level() {
  qdiff::BlockMap up;
  up.emplace(qdiff::BlockKey{0, 1}, poly(1, 1, 0, {scalar(1.0)}));
  up.emplace(qdiff::BlockKey{0, 2}, poly(1, 1, 0, {scalar(0.5), scalar(cplx{0.0, 1.0}), scalar(-0.25)}));
  up.emplace(qdiff::BlockKey{1, 2}, poly(1, 1, 1, {scalar(0.75), scalar(0.5)}));
  return qdiff::ModuleSpec(qdiff::QContext(cplx{2.0, 0.0}), {0, 1, 3},
                           {scalar(1.3), scalar(cplx{1.1, 0.6}), scalar(1.7)}, up);
}

}  // namespace fixtures
