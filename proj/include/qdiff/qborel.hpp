#pragma once

#include <vector>

#include "qdiff/qcontext.hpp"
#include "qdiff/series.hpp"
#include "qdiff/theta.hpp"

namespace qdiff {

class ModuleSpec;

/// B_q^(delta) F (xi) = sum_n t_{-n} F_n xi^n. Polynomials become entire
/// (tagged EntireOnCStar); q-Gevrey input of the same level becomes
/// convergent; anything else stays unclassified.
Series q_borel(const QContext& ctx, const Series& f, int delta);
MatrixSeries q_borel(const QContext& ctx, const MatrixSeries& f, int delta);

/// sum_n T^n . V_n. T acts on r x s coefficients by left multiplication when
/// it is r x r, or on vec(V_n) when it is rs x rs. Polynomials are summed
/// exactly; open series need the last terms to fall below tol relative to
/// the sum, otherwise NumericalError.
CMatrix borel_eval_at_operator(const MatrixSeries& v, const CMatrix& t, double tol = 1e-10);

/// Lambda(F) = A F B^{-1} on vec(Mat_{r,s}) and a delta-th root L of it,
/// with its twists jL for j in the delta-th roots of unity.
struct LevelOperator {
  int delta = 1;
  CMatrix A, B;
  CMatrix Lambda;
  CMatrix A_root, B_root;
  CMatrix L;
  std::vector<cplx> unit_roots;  // j = exp(2 pi i k / delta), k = 0..delta-1
  std::vector<CMatrix> roots;    // j L
  double root_residual = 0.0;    // max_j |(jL)^delta - Lambda| / |Lambda|
  bool near_branch_cut = false;
};

/// A^{1/delta} = A_s^{1/delta} A_u^{1/delta} (principal branch with the cut
/// rotated by branch_angle from the negative reals; unipotent part by the
/// binomial series), L = (B^{-1/delta})^T (x) A^{1/delta}.
LevelOperator level_root(const QContext& ctx, int delta, const CMatrix& A, const CMatrix& B,
                         double branch_angle = 0.0);

struct FormalSolution {
  MatrixSeries F;
  /// Least-squares curvature of log|F_n| against n, in units of
  /// log|q| / (2 delta): about 1 for generic divergence, about 0 when the
  /// series converges.
  double growth_curvature = 0.0;
  bool geometric = true;
  /// First-order bound on the round-off carried by each F_n; the recursion
  /// amplifies it like |q|^{n^2 / (2 delta)}.
  std::vector<double> error_bound;
  /// Longest prefix [0, hi] whose bound stays below 1e-9 max(1, |F|).
  Window accurate{0, -1};
};

/// Coefficients of the solution of z^delta sigma_q F - A F B^{-1} = U from
/// q^{n-delta} F_{n-delta} - A F_n B^{-1} = U_n, n = 0..order, F_n = 0 for n < 0.
FormalSolution solve_one_level_formal(const QContext& ctx, int delta, const CMatrix& A,
                                      const CMatrix& B, const MatrixSeries& U, int order);

struct BorelInvariants {
  int delta = 1;
  LevelOperator level;
  std::vector<CMatrix> values;  // B_q^(delta) U (j L), one per j
};

BorelInvariants borel_invariants(const QContext& ctx, int delta, const CMatrix& A, const CMatrix& B,
                                 const MatrixSeries& U);

/// Coefficients of X^0 .. X^{delta-1} (index = power) of sum_j w_j P_j(a, X) with
/// P_j(a, X) = sum_i (ja)^i X^{delta-1-i}. `inverse_weight` selects
/// w_j = 1 / (delta (ja)^{delta-1}) (Lagrange weights, the sum is 1);
/// otherwise w_j = delta (ja)^{delta-1}.
std::vector<cplx> partition_of_unity(int delta, cplx a, bool inverse_weight = true);

/// Projection of an entire V (polynomial in xi, coefficients acting on vec)
/// onto polynomials of degree < delta along the image of xi^delta - T^delta:
/// sum_j (delta (jT)^{delta-1})^{-1} P_j(T, xi) V(jT). Returns the delta
/// coefficient vectors (in vec form) of xi^0 .. xi^{delta-1}.
std::vector<CVector> borel_projection(const MatrixSeries& v, const CMatrix& t, int delta);

enum class Convergence { Convergent, Divergent, Inconclusive };

struct ConvergenceVerdict {
  Convergence verdict = Convergence::Convergent;
  int witness = -1;                  // index k of j = exp(2 pi i k / delta)
  std::vector<double> invariant_norms;
  double scale = 1.0;
  bool formal_geometric = true;      // ratio-test diagnostic of the formal solution
  bool consistent = true;            // verdict agrees with the diagnostic
};

/// Convergent iff every invariant is below tol * scale, scale = max(1, |U|).
/// Norms in [tol * scale, sqrt(tol) * scale] are Inconclusive.
ConvergenceVerdict convergence_criterion(const QContext& ctx, int delta, const CMatrix& A,
                                         const CMatrix& B, const MatrixSeries& U, int order = 40);

/// Residue in c at the lift xi of theta_c(a)^{-delta} G_c(a) for the one-level
/// equation c^delta sigma_q G - Lambda(G) = theta_c^delta U: for each
/// eigenvalue lambda of Lambda with xi^delta q^n = lambda, restricted to the
/// generalized eigenspace and with K = xi (Lambda / lambda)^{1/delta},
///   theta(a K^{-1})^{-delta} a^n q^{-n} (delta K^{delta-1})^{-1}
///     sum_m K^{m-n} t_{n-m} U_m.
/// U holds the degrees 0..delta-1. Zero when xi is not singular.
CMatrix closed_form_residue(const QContext& ctx, int delta, const CMatrix& A, const CMatrix& B,
                            const MatrixSeries& U, cplx xi, cplx a);

/// theta^{-delta}(K^{-1}) delta K^{delta-1} B_q^(delta)U(K) with the same K,
/// for eigenvalues with n = 0; no basepoint.
CMatrix literal_closed_form(const QContext& ctx, int delta, const CMatrix& A, const CMatrix& B,
                            const MatrixSeries& U, cplx xi);

/// The two-slope module z^mu A, z^mu U B; z^{mu+delta} B seen through its
/// normalized upper block U B^{-1} (degrees 0..delta-1). Throws
/// PreconditionError unless the module has exactly two slope blocks.
struct OneLevelData {
  int delta = 1;
  CMatrix A, B;
  MatrixSeries U;
};
OneLevelData one_level_data(const ModuleSpec& m);

}  // namespace qdiff
