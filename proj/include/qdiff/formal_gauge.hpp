#pragma once

#include <optional>

#include "qdiff/qmodule.hpp"

namespace qdiff {

enum class GaugeKind { Formal, Summed, Numeric };

/// Block-unipotent gauge over series: identity diagonal blocks (implied),
/// zero below the diagonal, F_ij stored for i < j.
struct GaugeMatrix {
  GaugeKind kind = GaugeKind::Formal;
  BlockLayout layout;
  BlockMap blocks;
  /// Coefficient window on which every block is trustworthy.
  Window reliable{0, -1};
  std::optional<EllipticPoint> direction;

  MatrixSeries block(int i, int j) const;
};

/// Constant block-unipotent (or nilpotent) matrix with its block layout.
struct BlockMatrix {
  BlockLayout layout;
  CMatrix value;

  CMatrix block(int i, int j) const;
  void set_block(int i, int j, const CMatrix& m);
  static BlockMatrix identity(const BlockLayout& layout);
  static BlockMatrix zero(const BlockLayout& layout);
};

/// The formal gauge F^ with F^[A_0] = A_U, coefficients 0..order of each
/// block, solved level by level from degree 0 upward. The reliable window
/// stops before the first coefficient that overflows double precision.
GaugeMatrix formal_gauge(const ModuleSpec& m, int order);

/// max over blocks and degrees of |r_n| / (1 + s_n), where r_n is the z^n
/// coefficient of sigma_q(F) z^{mu_j} A_j - z^{mu_i} A_i F - sum U_ik F_kj - U_ij
/// and s_n the largest norm among its terms; degrees with F-index in
/// [0, min(order, reliable.hi)].
double verify_gauge(const ModuleSpec& m, const GaugeMatrix& f, int order);

/// log(I + N) = sum_{p=1}^{k-1} (-1)^{p+1} N^p / p for block unipotent input.
/// Throws PreconditionError if the diagonal blocks are not the identity or
/// anything below them is nonzero (beyond 1e-12 relative).
BlockMatrix log_unipotent(const BlockMatrix& f);

/// exp(N) = sum_{p=0}^{k-1} N^p / p! for strictly block upper triangular N.
BlockMatrix exp_nilpotent(const BlockMatrix& n);

/// Default truncation order for formal_gauge: 4 times the largest slope gap,
/// at least 16, at most 200.
int default_formal_order(const ModuleSpec& m);

}  // namespace qdiff
