#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qdiff/qcontext.hpp"
#include "qdiff/series.hpp"

namespace qdiff {

/// A point of E_q = C* / q^Z, stored as its lift into 1 <= |c| < |q|.
class EllipticPoint {
 public:
  EllipticPoint(const QContext& ctx, cplx z);

  cplx lift() const noexcept { return lift_; }
  /// Power m with lift = z * q^m for the constructor argument z.
  int reduction_power() const noexcept { return power_; }
  const QContext& context() const noexcept { return ctx_; }

  /// Smallest |lift - other * q^e| over e in {-1, 0, 1}, relative to |lift|.
  double distance(const EllipticPoint& other) const;
  bool same(const EllipticPoint& other, double tol) const { return distance(other) <= tol; }

 private:
  QContext ctx_;
  cplx lift_;
  int power_ = 0;
};

/// Block sizes and their offsets in the full matrix.
struct BlockLayout {
  std::vector<int> sizes;
  std::vector<int> offsets;
  int total = 0;

  explicit BlockLayout(std::vector<int> s = {});
  int blocks() const noexcept { return static_cast<int>(sizes.size()); }
};

/// Zero-based block index pair (i, j), i < j.
using BlockKey = std::pair<int, int>;
using BlockMap = std::map<BlockKey, MatrixSeries>;

/// A q-difference module in Birkhoff-Guenther canonical form: block upper
/// triangular, diagonal blocks z^{mu_i} A_i, upper blocks U_ij Laurent
/// polynomials with degrees in [mu_i, mu_j).
///
/// Slopes must be non-decreasing. Equal slopes are accepted (their U blocks
/// are necessarily zero); whether they are resonant is a separate check.
class ModuleSpec {
 public:
  /// Validates and stores U blocks on the window [mu_i, mu_j - 1].
  ModuleSpec(QContext ctx, std::vector<int> slopes, std::vector<CMatrix> blocks,
             BlockMap upper = {});

  const QContext& context() const noexcept { return ctx_; }
  int k() const noexcept { return static_cast<int>(slopes_.size()); }
  const std::vector<int>& slopes() const noexcept { return slopes_; }
  int slope(int i) const { return slopes_.at(static_cast<std::size_t>(i)); }
  const std::vector<CMatrix>& blocks() const noexcept { return blocks_; }
  const CMatrix& block(int i) const { return blocks_.at(static_cast<std::size_t>(i)); }
  int rank(int i) const { return static_cast<int>(block(i).rows()); }
  std::vector<int> ranks() const;
  int total_rank() const noexcept { return layout_.total; }
  const BlockLayout& layout() const noexcept { return layout_; }

  /// Stored nonzero upper blocks.
  const BlockMap& upper() const noexcept { return upper_; }
  /// U_ij, or a zero polynomial of the right shape.
  MatrixSeries U(int i, int j) const;
  bool is_pure() const noexcept { return upper_.empty(); }

  /// Whole matrix A_U(z) as a Laurent polynomial.
  MatrixSeries full_matrix() const;

 private:
  QContext ctx_;
  std::vector<int> slopes_;
  std::vector<CMatrix> blocks_;
  BlockMap upper_;
  BlockLayout layout_;
};

using NewtonData = std::map<int, int>;

NewtonData newton(const ModuleSpec& m);
ModuleSpec graded(const ModuleSpec& m);

struct SingularPoint {
  EllipticPoint point;
  int i = 0;
  int j = 0;
  cplx alpha;
  cplx beta;
  int root_index = 0;  // zeta = exp(2 pi i root_index / delta)
  int q_power = 0;     // m in c^delta = (alpha / beta) q^m
};

struct SingularLocus {
  std::vector<SingularPoint> points;

  bool empty() const noexcept { return points.empty(); }
  /// True when c is within rel of some listed point on E_q.
  bool contains(const EllipticPoint& c, double rel) const;
  /// Relative distance on E_q to the nearest listed point (inf if empty).
  double distance(const EllipticPoint& c) const;
};

/// Directions violating nonresonance: q^Z c^{mu_i} Sp(A_i) meets
/// q^Z c^{mu_j} Sp(A_j). Only the diagonal data is read. Throws
/// ResonanceError for equal slopes whose spectra meet modulo q^Z.
SingularLocus singular_locus(const ModuleSpec& m0);

/// Throws ResonanceError when two equal-slope blocks have spectra meeting
/// modulo q^Z.
void check_equal_slope_resonance(const ModuleSpec& m);

/// Unipotent block gauge G (identity diagonal implied) with G[A_in] = A_out.
struct Renormalized {
  ModuleSpec module;
  BlockMap gauge;
};

/// Brings block-triangular data with diagonal z^{mu_i} A_i and arbitrary
/// Laurent polynomial upper blocks into canonical support by exact
/// polynomial gauges, level by level.
Renormalized renormalize(const QContext& ctx, const std::vector<int>& slopes,
                         const std::vector<CMatrix>& blocks, const BlockMap& raw_upper);

struct EigenNormalization {
  ModuleSpec module;
  /// powers[i][c]: gauge exponent applied to characteristic cluster c of
  /// block i (new block = q^{power} * old on that subspace, in the basis
  /// change recorded by `bases[i]`).
  std::vector<std::vector<int>> powers;
  std::vector<CMatrix> bases;
};

/// Moves every eigenvalue of every diagonal block into 1 <= |x| < |q| with
/// gauges z^m on characteristic subspaces, then renormalizes.
EigenNormalization normalize_eigenvalues(const ModuleSpec& m);

struct TensorProduct {
  ModuleSpec module;
  /// position[k] = index in the Kronecker basis (A basis (x) B basis) of
  /// basis vector k of the tensor module.
  std::vector<int> position;
  /// Renormalization gauge: G[P^T (A (x) B) P] = A_T, block-indexed as the
  /// tensor module.
  BlockMap gauge;
};

TensorProduct tensor(const ModuleSpec& m, const ModuleSpec& n);

/// Exact product and sum of closed Laurent polynomials (windows widen as needed).
MatrixSeries poly_mul(const MatrixSeries& a, const MatrixSeries& b);
MatrixSeries poly_add(const MatrixSeries& a, const MatrixSeries& b);
MatrixSeries zero_poly(int rows, int cols);

/// Full numeric matrix of a block map with identity diagonal, evaluated at z.
CMatrix unipotent_at(const BlockLayout& layout, const BlockMap& blocks, cplx z);

}  // namespace qdiff
