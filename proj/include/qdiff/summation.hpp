#pragma once

#include <map>
#include <optional>

#include "qdiff/formal_gauge.hpp"
#include "qdiff/qmodule.hpp"

namespace qdiff {

struct SumOptions {
  /// Coefficients -window..window of each F'; 0 picks one from the decay rate.
  int window = 0;
  /// Run the entire-on-C* growth check on every stored F'.
  bool check_pole_condition = false;
};

/// S_c F^ stored as F_ij = theta_c^{mu_i - mu_j} F'_ij with F'_ij entire on C*.
struct SummedGauge {
  QContext ctx = QContext(cplx{2.0, 0.0});
  cplx c;  // the lift used for theta_c
  BlockLayout layout;
  std::vector<int> slopes;
  BlockMap entire;  // F'_ij, i < j
  int window = 0;
  bool pole_condition_ok = true;

  /// Block-unipotent value of S_c F^ at a; throws PreconditionError when
  /// a lies on -c q^Z.
  CMatrix eval(cplx a) const;
  /// Largest edge-term estimate of the truncated F' sums at a.
  double tail_bound(cplx a) const;
};

/// Window from the theta decay: W^2 log|q| / (2 delta_max) - W log R > 45.
int default_sum_window(const ModuleSpec& m, cplx c);

/// Throws ResonanceError when c lies on the singular locus (Sylvester
/// operator singular).
SummedGauge sum_in_direction(const ModuleSpec& m, cplx c, const SumOptions& opts = {});

/// max |sigma_q(F)(a) A_0(a) - A_U(a) F(a)| / (1 + scale) at the point a.
double functional_residual(const ModuleSpec& m, const SummedGauge& g, cplx a);

struct StokesElement {
  cplx c0, c, a;
  BlockMatrix matrix;
  double tail_bound = 0.0;
};

/// (S_c0 F^(a))^{-1} S_c F^(a).
StokesElement stokes_operator(const ModuleSpec& m, cplx c0, cplx c, cplx a, const SumOptions& opts = {});
StokesElement stokes_operator(const SummedGauge& s0, const SummedGauge& s, cplx a);

/// c -> log(S_{c0,c} F^(a)), with S_c0 computed once.
class LsMap {
 public:
  LsMap(const ModuleSpec& m, cplx c0, cplx a, SumOptions opts = {});
  BlockMatrix operator()(cplx c) const;
  BlockMatrix operator()(cplx c, double& tail_bound) const;
  cplx c0() const noexcept { return c0_; }
  cplx a() const noexcept { return a_; }

 private:
  const ModuleSpec* m_;
  cplx c0_, a_;
  SumOptions opts_;
  SummedGauge s0_;
};

enum class AlienMethod { Contour, ClosedForm };

struct AlienOptions {
  AlienMethod method = AlienMethod::Contour;
  std::optional<double> rho;
  int nodes = 64;
  std::optional<cplx> c0;
  SumOptions sum;
};

struct AlienDerivation {
  cplx point;  // lift of the direction in the c-plane
  cplx a;
  cplx c0;
  std::vector<int> slopes;
  BlockMatrix matrix;
  double rho = 0.0;
  int nodes = 0;
  /// Relative difference between the estimates with nodes and nodes / 2.
  double richardson = 0.0;
};

/// Residue in c at the lift xi of LS_{c,a}: contour (trapezoid rule on
/// |c - xi| = rho, halving check, node doubling up to 1024) or the closed
/// form (two slope blocks only). Zero away from the singular locus. A default
/// c0 shrinks the contour to stay outside it; a given c0 inside it throws.
AlienDerivation alien_derivation(const ModuleSpec& m, cplx xi, cplx a, const AlienOptions& opts = {});

/// Blocks with mu_j - mu_i = delta, per delta >= 1.
std::map<int, BlockMatrix> level_decompose(const AlienDerivation& d);

/// Deterministic regular direction derived from the module data, away from
/// the singular locus and from -a q^Z.
cplx default_c0(const ModuleSpec& m, cplx a);

/// Default basepoint 1, nudged to 1 + (|q| - 1) / 7 when it collides with
/// -c q^Z for one of the given lifts. Sets nudged accordingly.
cplx default_basepoint(const QContext& ctx, const std::vector<cplx>& lifts, bool* nudged = nullptr);

/// max |S_c F^_{A(x)B}(a) - G(a) P^T (S_c F^_A(a) (x) S_c F^_B(a)) P| with the
/// renormalization gauge G of the tensor product.
double tensor_compatibility_check(const ModuleSpec& m, const ModuleSpec& n, cplx c, cplx a);

/// max |Delta(A(x)B) - P^T (Delta(A) (x) I + I (x) Delta(B)) P| at xi, with a
/// common c0, relative to the largest entry (absolute when every entry is
/// below 1e-12).
double tensor_alien_residual(const ModuleSpec& m, const ModuleSpec& n, cplx xi, cplx a, cplx c0);

}  // namespace qdiff
