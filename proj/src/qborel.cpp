#include "qdiff/qborel.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "qdiff/errors.hpp"
#include "qdiff/linalg.hpp"
#include "qdiff/qmodule.hpp"

namespace qdiff {

namespace {

ThetaPower theta_for(const QContext& ctx, int delta) { return theta_power(ctx, delta, std::max(delta, 20)); }

GrowthTag borel_tag(const GrowthTag& in, bool closed, int delta) {
  if (closed) return GrowthTag::entire();
  if (in.kind == GrowthTag::Kind::QGevrey && in.delta == delta) return GrowthTag::convergent();
  if (in.kind == GrowthTag::Kind::Convergent) return GrowthTag::entire();
  return GrowthTag::unclassified();
}

// Quadratic least squares y = b0 + b1 x + b2 x^2; returns b2.
double quadratic_curvature(const std::vector<double>& x, const std::vector<double>& y) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(x.size()), 3);
  Eigen::VectorXd Y(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    X(static_cast<Eigen::Index>(i), 0) = 1.0;
    X(static_cast<Eigen::Index>(i), 1) = x[i];
    X(static_cast<Eigen::Index>(i), 2) = x[i] * x[i];
    Y(static_cast<Eigen::Index>(i)) = y[i];
  }
  const Eigen::VectorXd b = X.colPivHouseholderQr().solve(Y);
  return b(2);
}

CMatrix matrix_power(const CMatrix& m, int p) {
  CMatrix base = p >= 0 ? m : CMatrix(m.inverse());
  int e = std::abs(p);
  CMatrix r = CMatrix::Identity(m.rows(), m.cols());
  while (e) {
    if (e & 1) r = r * base;
    base = base * base;
    e >>= 1;
  }
  return r;
}

}  // namespace

Series q_borel(const QContext& ctx, const Series& f, int delta) {
  if (delta < 1) throw ValidationError("q_borel: delta must be >= 1");
  const ThetaPower tp = theta_for(ctx, delta);
  Series out(f.n_min(), f.n_max());
  for (int n = f.n_min(); n <= f.n_max(); ++n) out.set(n, tp.t(-n) * f[n]);
  out.set_closed(f.closed_below(), f.closed_above());
  out.set_growth_tag(borel_tag(f.growth_tag(), f.closed_below() && f.closed_above(), delta));
  return out;
}

MatrixSeries q_borel(const QContext& ctx, const MatrixSeries& f, int delta) {
  if (delta < 1) throw ValidationError("q_borel: delta must be >= 1");
  const ThetaPower tp = theta_for(ctx, delta);
  MatrixSeries out = f;
  for (int n = f.window().lo; n <= f.window().hi; ++n) out.coeff_ref(n) *= tp.t(-n);
  out.set_growth_tag(borel_tag(f.growth_tag(), f.closed_below() && f.closed_above(), delta));
  return out;
}

CMatrix borel_eval_at_operator(const MatrixSeries& v, const CMatrix& t, double tol) {
  const int r = v.rows(), s = v.cols();
  const bool left = t.rows() == r && t.cols() == r;
  const bool on_vec = t.rows() == static_cast<Eigen::Index>(r) * s && t.cols() == t.rows();
  if (!left && !on_vec) throw ValidationError("borel_eval_at_operator: operator size matches neither r nor r*s");
  auto act = [&](const CMatrix& op, const CMatrix& x) -> CMatrix {
    if (left) return op * x;
    return linalg::unvec(op * linalg::vec(x), r, s);
  };
  const Window w = v.window();
  CMatrix sum = CMatrix::Zero(r, s);
  std::vector<double> norms;
  for (int n = w.lo; n <= w.hi; ++n) {
    const CMatrix c = v.coeff(n);
    if (c.isZero(0.0)) {
      norms.push_back(0.0);
      continue;
    }
    const CMatrix term = act(matrix_power(t, n), c);
    sum += term;
    norms.push_back(term.cwiseAbs().maxCoeff());
  }
  const double total = std::max(sum.cwiseAbs().maxCoeff(), 1e-300);
  auto edge_ok = [&](bool closed, std::size_t i0, std::size_t i1) {
    if (closed || norms.size() < 2) return true;
    return std::max(norms[i0], norms[i1]) <= tol * std::max(total, 1.0);
  };
  if (!edge_ok(v.closed_above(), norms.size() - 1, norms.size() - 2) ||
      !edge_ok(v.closed_below(), 0, 1))
    throw NumericalError("borel_eval_at_operator: divergence detected (edge terms do not decay)");
  return sum;
}

LevelOperator level_root(const QContext& ctx, int delta, const CMatrix& A, const CMatrix& B,
                         double branch_angle) {
  if (delta < 1) throw ValidationError("level_root: delta must be >= 1");
  LevelOperator lo;
  lo.delta = delta;
  lo.A = A;
  lo.B = B;
  const CMatrix B_inv = B.inverse();
  lo.Lambda = linalg::kron(B_inv.transpose(), A);
  const cplx rot = std::polar(1.0, -branch_angle);
  const cplx unrot = std::polar(1.0, branch_angle / delta);
  auto root = [&](const CMatrix& m) {
    Eigen::ComplexEigenSolver<CMatrix> es(rot * m, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const cplx e = es.eigenvalues()(i);
      if (e.real() < 0.0 && std::abs(e.imag()) <= ctx.tol() * std::abs(e)) lo.near_branch_cut = true;
    }
    return CMatrix(unrot * linalg::principal_root(rot * m, delta, ctx.sqrt_tol()));
  };
  lo.A_root = root(A);
  lo.B_root = root(B);
  lo.L = linalg::kron(lo.B_root.inverse().transpose(), lo.A_root);
  const double scale = std::max(1.0, lo.Lambda.cwiseAbs().maxCoeff());
  for (int k = 0; k < delta; ++k) {
    const cplx j = std::polar(1.0, 2.0 * kPi * k / delta);
    lo.unit_roots.push_back(j);
    lo.roots.push_back(j * lo.L);
    const CMatrix diff = matrix_power(lo.roots.back(), delta) - lo.Lambda;
    lo.root_residual = std::max(lo.root_residual, diff.cwiseAbs().maxCoeff() / scale);
  }
  if (lo.root_residual > std::max(1e3 * ctx.tol(), 1e-8))
    throw NumericalError("level_root: L^delta differs from Lambda beyond tolerance");
  return lo;
}

FormalSolution solve_one_level_formal(const QContext& ctx, int delta, const CMatrix& A,
                                      const CMatrix& B, const MatrixSeries& U, int order) {
  if (delta < 1) throw ValidationError("solve_one_level_formal: delta must be >= 1");
  if (order < 0) throw ValidationError("solve_one_level_formal: order must be >= 0");
  const auto sup = U.support();
  if (sup && sup->lo < 0) throw ValidationError("solve_one_level_formal: U must be a power series");
  const int r = U.rows(), s = U.cols();
  const CMatrix A_inv = A.inverse();
  const double nA = A_inv.norm(), nB = B.norm();
  constexpr double eps = 2.2e-16;
  MatrixSeries F(r, s, {0, order}, GrowthTag::q_gevrey(delta));
  F.set_closed(true, false);
  // Rounding propagated through the recursion, to separate genuine growth from
  // amplified round-off.
  std::vector<double> err(static_cast<std::size_t>(order + 1), 0.0);
  for (int n = 0; n <= order; ++n) {
    CMatrix rhs = -U.coeff(n);
    double bound = eps * U.coeff(n).norm();
    if (n - delta >= 0) {
      const CMatrix prev = ctx.qpow(n - delta) * F.coeff(n - delta);
      rhs += prev;
      bound += std::pow(ctx.abs_q(), n - delta) * err[static_cast<std::size_t>(n - delta)] + eps * prev.norm();
    }
    F.set_coeff(n, A_inv * rhs * B);
    err[static_cast<std::size_t>(n)] = nA * nB * bound + eps * F.coeff(n).norm();
  }
  FormalSolution out{F, 0.0, true, err, {0, -1}};
  double fmax = 1.0;
  for (int n = 0; n <= order; ++n) {
    fmax = std::max(fmax, F.coeff(n).norm());
    if (!(err[static_cast<std::size_t>(n)] <= 1e-9 * fmax)) break;
    out.accurate.hi = n;
  }
  std::vector<double> x, y;
  for (int n = 0; n <= order; ++n) {
    const double nf = F.coeff(n).norm();
    if (!(nf > 0.0) || !std::isfinite(nf)) continue;
    if (nf < 1e3 * err[static_cast<std::size_t>(n)]) continue;
    x.push_back(n);
    y.push_back(std::log(nf));
  }
  if (x.size() >= 4) {
    out.growth_curvature = quadratic_curvature(x, y) / (ctx.log_abs_q() / (2.0 * delta));
    out.geometric = out.growth_curvature < 0.05;
  }
  return out;
}

BorelInvariants borel_invariants(const QContext& ctx, int delta, const CMatrix& A, const CMatrix& B,
                                 const MatrixSeries& U) {
  BorelInvariants out;
  out.delta = delta;
  out.level = level_root(ctx, delta, A, B);
  const MatrixSeries bu = q_borel(ctx, U, delta);
  for (const auto& jl : out.level.roots) out.values.push_back(borel_eval_at_operator(bu, jl, ctx.tol()));
  return out;
}

std::vector<cplx> partition_of_unity(int delta, cplx a, bool inverse_weight) {
  if (delta < 1) throw ValidationError("partition_of_unity: delta must be >= 1");
  std::vector<cplx> coeff(static_cast<std::size_t>(delta), 0.0);
  for (int k = 0; k < delta; ++k) {
    const cplx ja = std::polar(1.0, 2.0 * kPi * k / delta) * a;
    const cplx w0 = static_cast<double>(delta) * std::pow(ja, delta - 1);
    const cplx w = inverse_weight ? 1.0 / w0 : w0;
    cplx p = 1.0;
    for (int i = 0; i < delta; ++i) {
      coeff[static_cast<std::size_t>(delta - 1 - i)] += w * p;
      p *= ja;
    }
  }
  return coeff;
}

std::vector<CVector> borel_projection(const MatrixSeries& v, const CMatrix& t, int delta) {
  const Eigen::Index d = t.rows();
  std::vector<CVector> out(static_cast<std::size_t>(delta), CVector::Zero(d));
  for (int k = 0; k < delta; ++k) {
    const CMatrix jt = std::polar(1.0, 2.0 * kPi * k / delta) * t;
    const CVector val = linalg::vec(borel_eval_at_operator(v, jt));
    const CMatrix weight = (static_cast<double>(delta) * matrix_power(jt, delta - 1)).inverse();
    CMatrix p = CMatrix::Identity(d, d);
    for (int i = 0; i < delta; ++i) {
      out[static_cast<std::size_t>(delta - 1 - i)] += weight * p * val;
      p = p * jt;
    }
  }
  return out;
}

ConvergenceVerdict convergence_criterion(const QContext& ctx, int delta, const CMatrix& A,
                                         const CMatrix& B, const MatrixSeries& U, int order) {
  ConvergenceVerdict v;
  const BorelInvariants inv = borel_invariants(ctx, delta, A, B, U);
  v.scale = std::max(1.0, U.max_abs());
  double worst = -1.0;
  for (std::size_t k = 0; k < inv.values.size(); ++k) {
    const double n = inv.values[k].size() ? inv.values[k].cwiseAbs().maxCoeff() : 0.0;
    v.invariant_norms.push_back(n);
    if (n > worst) {
      worst = n;
      v.witness = static_cast<int>(k);
    }
  }
  if (worst < ctx.tol() * v.scale) {
    v.verdict = Convergence::Convergent;
    v.witness = -1;
  } else if (worst > ctx.sqrt_tol() * v.scale) {
    v.verdict = Convergence::Divergent;
  } else {
    v.verdict = Convergence::Inconclusive;
  }
  const FormalSolution fs = solve_one_level_formal(ctx, delta, A, B, U, order);
  v.formal_geometric = fs.geometric;
  v.consistent = v.verdict == Convergence::Inconclusive ||
                 (v.verdict == Convergence::Convergent) == fs.geometric;
  return v;
}

namespace {

struct PoleBlock {
  CMatrix Q;      // orthonormal basis of the generalized eigenspace
  CMatrix QaP;    // Q^* P, coordinates of the spectral component
  CMatrix K;      // delta-th root operator with spectrum {xi}
  int n = 0;      // q-power index: xi^delta q^n = lambda
};

std::vector<PoleBlock> pole_blocks(const QContext& ctx, int delta, const CMatrix& Lambda, cplx xi,
                                   bool only_n0) {
  std::vector<PoleBlock> out;
  const cplx xd = std::pow(xi, delta);
  for (const auto& cl : linalg::cluster_eigenvalues(Lambda, ctx.sqrt_tol())) {
    const cplx ratio = cl.center / xd;
    const int n = static_cast<int>(std::lround(std::log(std::abs(ratio)) / ctx.log_abs_q()));
    const cplx corr = ratio * ctx.qpow(-n);
    if (std::abs(corr - 1.0) > ctx.sqrt_tol()) continue;
    if (only_n0 && n != 0) continue;
    PoleBlock pb;
    pb.n = n;
    const CMatrix P = linalg::spectral_projector(Lambda, cl.center, ctx.sqrt_tol());
    pb.Q = linalg::range_basis(P);
    pb.QaP = pb.Q.adjoint() * P;
    const CMatrix restricted = pb.Q.adjoint() * Lambda * pb.Q;
    const cplx xi_exact = xi * std::pow(corr, 1.0 / delta);
    pb.K = xi_exact * linalg::unipotent_root(restricted / cl.center, delta);
    out.push_back(std::move(pb));
  }
  return out;
}

}  // namespace

CMatrix closed_form_residue(const QContext& ctx, int delta, const CMatrix& A, const CMatrix& B,
                            const MatrixSeries& U, cplx xi, cplx a) {
  const int r = U.rows(), s = U.cols();
  const CMatrix Lambda = linalg::kron(B.inverse().transpose(), A);
  const ThetaPower tp = theta_for(ctx, delta);
  CVector total = CVector::Zero(static_cast<Eigen::Index>(r) * s);
  for (const auto& pb : pole_blocks(ctx, delta, Lambda, xi, false)) {
    const CMatrix& Qa = pb.QaP;
    const Eigen::Index d = pb.K.rows();
    CVector v = CVector::Zero(d);
    for (int m = U.window().lo; m <= U.window().hi; ++m) {
      const CMatrix um = U.coeff(m);
      if (um.isZero(0.0)) continue;
      v += tp.t(pb.n - m) * (matrix_power(pb.K, m - pb.n) * (Qa * linalg::vec(um)));
    }
    const CMatrix theta = theta_power_eval_operator(ctx, delta, pb.K, a);
    const CMatrix weight = (static_cast<double>(delta) * matrix_power(pb.K, delta - 1)).inverse();
    const cplx factor = std::pow(a, pb.n) * ctx.qpow(-pb.n);
    total += pb.Q * (factor * (theta * (weight * v)));
  }
  return linalg::unvec(total, r, s);
}

CMatrix literal_closed_form(const QContext& ctx, int delta, const CMatrix& A, const CMatrix& B,
                            const MatrixSeries& U, cplx xi) {
  const int r = U.rows(), s = U.cols();
  const CMatrix Lambda = linalg::kron(B.inverse().transpose(), A);
  const ThetaPower tp = theta_for(ctx, delta);
  CVector total = CVector::Zero(static_cast<Eigen::Index>(r) * s);
  for (const auto& pb : pole_blocks(ctx, delta, Lambda, xi, true)) {
    const CMatrix& Qa = pb.QaP;
    CVector v = CVector::Zero(pb.K.rows());
    for (int m = U.window().lo; m <= U.window().hi; ++m) {
      const CMatrix um = U.coeff(m);
      if (um.isZero(0.0)) continue;
      v += tp.t(-m) * (matrix_power(pb.K, m) * (Qa * linalg::vec(um)));
    }
    const CMatrix theta = theta_power_eval_operator(ctx, delta, pb.K);
    const CMatrix weight = static_cast<double>(delta) * matrix_power(pb.K, delta - 1);
    total += pb.Q * (theta * (weight * v));
  }
  return linalg::unvec(total, r, s);
}

OneLevelData one_level_data(const ModuleSpec& m) {
  if (m.k() != 2) throw PreconditionError("one-level data needs exactly two slope blocks");
  OneLevelData d;
  d.delta = m.slope(1) - m.slope(0);
  if (d.delta < 1) throw PreconditionError("one-level data needs distinct slopes");
  d.A = m.block(0);
  d.B = m.block(1);
  const CMatrix B_inv = d.B.inverse();
  const MatrixSeries raw = m.U(0, 1);
  d.U = MatrixSeries::polynomial(m.rank(0), m.rank(1), {0, d.delta - 1});
  for (int k = 0; k < d.delta; ++k) d.U.set_coeff(k, raw.coeff(k + m.slope(0)) * B_inv);
  return d;
}

}  // namespace qdiff
