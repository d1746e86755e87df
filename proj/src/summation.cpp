#include "qdiff/summation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

#include "qdiff/errors.hpp"
#include "qdiff/linalg.hpp"
#include "qdiff/qborel.hpp"
#include "qdiff/theta.hpp"

namespace qdiff {

namespace {

CMatrix series_value(const MatrixSeries& s, cplx a) { return eval(s, a).value; }

std::vector<cplx> lifts_near(const QContext& ctx, cplx p, cplx around, int span) {
  const long long k = std::llround(std::log(std::abs(around) / std::abs(p)) / ctx.log_abs_q());
  std::vector<cplx> out;
  for (long long e = k - span; e <= k + span; ++e) out.push_back(p * ctx.qpow(e));
  return out;
}

}  // namespace

int default_sum_window(const ModuleSpec& m, cplx c) {
  const QContext& ctx = m.context();
  int dmax = 1;
  for (int i = 0; i < m.k(); ++i)
    for (int j = i + 1; j < m.k(); ++j) dmax = std::max(dmax, m.slope(j) - m.slope(i));
  double spread = 1.0;
  for (const auto& b : m.blocks()) spread = std::max({spread, b.norm(), b.inverse().norm()});
  const double log_r = std::log(ctx.abs_q() * std::max(std::abs(c), 1.0 / std::abs(c)) * spread);
  const double a2 = ctx.log_abs_q() / (2.0 * dmax);
  int w = 1;
  while (w * w * a2 - w * log_r <= 45.0 && w < 400) ++w;
  return std::clamp(w + 4, 8, 400);
}

CMatrix SummedGauge::eval(cplx a) const {
  if (a == cplx{0.0, 0.0}) throw PreconditionError("summed gauge: basepoint a must be nonzero");
  if (on_theta_zero(ctx, a / c, 1e-12))
    throw PreconditionError("summed gauge: basepoint lies on the pole spiral -c q^Z");
  CMatrix out = CMatrix::Identity(layout.total, layout.total);
  const cplx th = theta_translate_eval(ctx, c, a);
  for (const auto& [key, fp] : entire) {
    const auto [i, j] = key;
    const int e = slopes[static_cast<std::size_t>(i)] - slopes[static_cast<std::size_t>(j)];
    out.block(layout.offsets[static_cast<std::size_t>(i)], layout.offsets[static_cast<std::size_t>(j)],
              layout.sizes[static_cast<std::size_t>(i)], layout.sizes[static_cast<std::size_t>(j)]) =
        std::pow(th, e) * series_value(fp, a);
  }
  return out;
}

double SummedGauge::tail_bound(cplx a) const {
  double worst = 0.0;
  const cplx th = theta_translate_eval(ctx, c, a);
  for (const auto& [key, fp] : entire) {
    const int e = slopes[static_cast<std::size_t>(key.first)] - slopes[static_cast<std::size_t>(key.second)];
    const auto ev = qdiff::eval(fp, a);
    worst = std::max(worst, std::abs(std::pow(th, e)) * ev.tail_bound);
  }
  return worst;
}

SummedGauge sum_in_direction(const ModuleSpec& m, cplx c, const SumOptions& opts) {
  if (c == cplx{0.0, 0.0}) throw ValidationError("sum_in_direction: direction must be nonzero");
  const QContext& ctx = m.context();
  SummedGauge g;
  g.ctx = ctx;
  g.c = c;
  g.layout = m.layout();
  g.slopes = m.slopes();
  g.window = opts.window > 0 ? opts.window : default_sum_window(m, c);
  const int W = g.window;
  const int W2 = 2 * W;

  std::vector<cplx> c_pow_mu;
  std::vector<CMatrix> Ap;
  for (int i = 0; i < m.k(); ++i) {
    c_pow_mu.push_back(std::pow(c, m.slope(i)));
    Ap.push_back(c_pow_mu.back() * m.block(i));
  }
  std::map<int, ThetaPower> thetas;
  auto theta_of = [&](int e) -> const ThetaPower& {
    auto it = thetas.find(e);
    if (it == thetas.end()) it = thetas.emplace(e, theta_power(ctx, e, std::max(e, 24))).first;
    return it->second;
  };

  // U'_ik = c^{mu_i} z^{-mu_i} theta_c^{mu_k - mu_i} U_ik on [-2W, 2W].
  std::map<BlockKey, MatrixSeries> uprime;
  for (const auto& [key, u] : m.upper()) {
    const auto [i, k] = key;
    const int e = m.slope(k) - m.slope(i);
    if (e <= 0) continue;
    const ThetaPower& tp = theta_of(e);
    MatrixSeries up(u.rows(), u.cols(), {-W2, W2}, GrowthTag::entire());
    for (int deg = u.window().lo; deg <= u.window().hi; ++deg) {
      const CMatrix ud = u.coeff(deg);
      if (ud.isZero(0.0)) continue;
      const int s = deg - m.slope(i);
      for (int p = -W2; p <= W2; ++p) {
        const cplx t = tp.t(p - s);
        if (t == cplx{0.0, 0.0}) continue;
        up.coeff_ref(p) += (c_pow_mu[static_cast<std::size_t>(i)] * t * std::pow(c, -(p - s))) * ud;
      }
    }
    uprime.emplace(key, std::move(up));
  }

  for (int d = 1; d < m.k(); ++d)
    for (int i = 0; i + d < m.k(); ++i) {
      const int j = i + d;
      if (m.slope(j) == m.slope(i)) continue;
      const int ri = m.rank(i), rj = m.rank(j);
      std::vector<CMatrix> V(static_cast<std::size_t>(2 * W + 1), CMatrix::Zero(ri, rj));
      bool any = false;
      for (int k = i + 1; k <= j; ++k) {
        auto ui = uprime.find({i, k});
        if (ui == uprime.end()) continue;
        const MatrixSeries& u = ui->second;
        if (k == j) {
          for (int p = -W; p <= W; ++p) V[static_cast<std::size_t>(p + W)] += u.coeff(p);
          any = true;
          continue;
        }
        auto fk = g.entire.find({k, j});
        if (fk == g.entire.end()) continue;
        for (int r = -W2; r <= W2; ++r) {
          const CMatrix ur = u.coeff(r);
          if (ur.isZero(0.0)) continue;
          for (int p = std::max(-W, r - W); p <= std::min(W, r + W); ++p)
            V[static_cast<std::size_t>(p + W)] += ur * fk->second.coeff(p - r);
        }
        any = true;
      }
      if (!any) continue;
      MatrixSeries F(ri, rj, {-W, W}, GrowthTag::entire());
      for (int p = -W; p <= W; ++p) {
        const CMatrix& vp = V[static_cast<std::size_t>(p + W)];
        if (vp.isZero(0.0)) continue;
        try {
          F.set_coeff(p, linalg::solve_sylvester(ctx.qpow(p) * Ap[static_cast<std::size_t>(j)],
                                                 Ap[static_cast<std::size_t>(i)], vp));
        } catch (const ResonanceError&) {
          throw ResonanceError("sum_in_direction: direction on the singular locus (nonresonance condition violated)");
        }
      }
      if (!F.is_zero()) g.entire.emplace(BlockKey{i, j}, std::move(F));
    }

  if (opts.check_pole_condition) {
    for (const auto& [key, fp] : g.entire) {
      const int delta = m.slope(key.second) - m.slope(key.first);
      for (int r = 0; r < fp.rows(); ++r)
        for (int col = 0; col < fp.cols(); ++col) {
          const Series s = fp.entry(r, col);
          for (Side side : {Side::Positive, Side::Negative}) {
            try {
              if (classify_growth(ctx, s, delta, side) == GrowthFit::Fails) g.pole_condition_ok = false;
            } catch (const NumericalError&) {
              // too few nonzero coefficients: nothing to classify
            }
          }
        }
    }
  }
  return g;
}

double functional_residual(const ModuleSpec& m, const SummedGauge& g, cplx a) {
  const QContext& ctx = m.context();
  const CMatrix Fa = g.eval(a);
  const CMatrix Fqa = g.eval(ctx.q() * a);
  CMatrix A0 = CMatrix::Zero(m.total_rank(), m.total_rank());
  for (int i = 0; i < m.k(); ++i) {
    const auto o = m.layout().offsets[static_cast<std::size_t>(i)];
    A0.block(o, o, m.rank(i), m.rank(i)) = std::pow(a, m.slope(i)) * m.block(i);
  }
  const CMatrix AU = series_value(m.full_matrix(), a);
  const CMatrix lhs = Fqa * A0, rhs = AU * Fa;
  const double scale = std::max(lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff());
  return (lhs - rhs).cwiseAbs().maxCoeff() / (1.0 + scale);
}

namespace {

CMatrix enforce_unipotent(const BlockLayout& layout, CMatrix s) {
  for (int i = 0; i < layout.blocks(); ++i)
    for (int j = 0; j <= i; ++j) {
      auto b = s.block(layout.offsets[static_cast<std::size_t>(i)], layout.offsets[static_cast<std::size_t>(j)],
                       layout.sizes[static_cast<std::size_t>(i)], layout.sizes[static_cast<std::size_t>(j)]);
      if (i == j)
        b.setIdentity();
      else
        b.setZero();
    }
  return s;
}

}  // namespace

StokesElement stokes_operator(const SummedGauge& s0, const SummedGauge& s, cplx a) {
  StokesElement out;
  out.c0 = s0.c;
  out.c = s.c;
  out.a = a;
  const CMatrix x0 = s0.eval(a);
  const CMatrix x = s.eval(a);
  const CMatrix raw = x0.triangularView<Eigen::Upper>().solve(x);
  out.matrix = {s.layout, enforce_unipotent(s.layout, raw)};
  out.tail_bound = s0.tail_bound(a) + s.tail_bound(a);
  return out;
}

StokesElement stokes_operator(const ModuleSpec& m, cplx c0, cplx c, cplx a, const SumOptions& opts) {
  return stokes_operator(sum_in_direction(m, c0, opts), sum_in_direction(m, c, opts), a);
}

LsMap::LsMap(const ModuleSpec& m, cplx c0, cplx a, SumOptions opts)
    : m_(&m), c0_(c0), a_(a), opts_(opts), s0_(sum_in_direction(m, c0, opts)) {}

BlockMatrix LsMap::operator()(cplx c, double& tail_bound) const {
  const StokesElement st = stokes_operator(s0_, sum_in_direction(*m_, c, opts_), a_);
  tail_bound = st.tail_bound;
  return log_unipotent(st.matrix);
}

BlockMatrix LsMap::operator()(cplx c) const {
  double tb = 0.0;
  return (*this)(c, tb);
}

cplx default_basepoint(const QContext& ctx, const std::vector<cplx>& lifts, bool* nudged) {
  auto collides = [&](cplx a) {
    for (cplx c : lifts)
      if (on_theta_zero(ctx, a / c, 1e-6)) return true;
    return false;
  };
  cplx a = 1.0;
  bool moved = false;
  if (collides(a)) {
    a = 1.0 + (ctx.abs_q() - 1.0) / 7.0;
    moved = true;
  }
  if (nudged) *nudged = moved;
  return a;
}

cplx default_c0(const ModuleSpec& m, cplx a) {
  const QContext& ctx = m.context();
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (int s : m.slopes()) mix(&s, sizeof s);
  for (const auto& b : m.blocks())
    for (Eigen::Index i = 0; i < b.size(); ++i) mix(b.data() + i, sizeof(cplx));
  for (const auto& [key, u] : m.upper())
    for (int n = u.window().lo; n <= u.window().hi; ++n) {
      const CMatrix cn = u.coeff(n);
      for (Eigen::Index i = 0; i < cn.size(); ++i) mix(cn.data() + i, sizeof(cplx));
    }
  const SingularLocus locus = singular_locus(m);
  for (int attempt = 0; attempt < 256; ++attempt) {
    mix(&attempt, sizeof attempt);
    const double u1 = static_cast<double>(h >> 11) / 9007199254740992.0;
    const double u2 = static_cast<double>((h * 0x9E3779B97F4A7C15ULL) >> 11) / 9007199254740992.0;
    const cplx c = std::exp((0.25 + 0.5 * u1) * std::log(ctx.q())) * std::polar(1.0, 2.0 * kPi * u2);
    const EllipticPoint p(ctx, c);
    if (locus.distance(p) < 0.05) continue;
    if (a != cplx{0.0, 0.0} && p.distance(EllipticPoint(ctx, -a)) < 0.05) continue;
    return p.lift();
  }
  throw NumericalError("default_c0: no regular direction found");
}

namespace {

BlockMatrix contour_residue(const ModuleSpec& m, cplx xi, const LsMap& ls, double rho, int nodes,
                            double* richardson, int* used) {
  const BlockLayout& layout = m.layout();
  const int n0 = std::max(nodes, 4);
  std::vector<CMatrix> vals;  // values at the current fine grid, in node order
  int fine = 2 * n0;
  auto node = [&](int k, int count) { return std::polar(1.0, 2.0 * kPi * k / count); };
  for (int k = 0; k < fine; ++k) vals.push_back(ls(xi + rho * node(k, fine)).value);
  while (true) {
    CMatrix full = CMatrix::Zero(layout.total, layout.total);
    CMatrix half = CMatrix::Zero(layout.total, layout.total);
    double fmax = 0.0;
    for (int k = 0; k < fine; ++k) {
      const CMatrix term = vals[static_cast<std::size_t>(k)] * node(k, fine);
      full += term;
      if (k % 2 == 0) half += term;
      fmax = std::max(fmax, vals[static_cast<std::size_t>(k)].cwiseAbs().maxCoeff());
    }
    full *= rho / fine;
    half *= rho / (fine / 2);
    const double diff = (full - half).cwiseAbs().maxCoeff();
    const double denom = std::max({full.cwiseAbs().maxCoeff(), 1e-4 * rho * fmax, 1e-300});
    const double rel = diff / denom;
    if (rel <= 1e-8) {
      *richardson = rel;
      *used = fine;
      return {layout, full};
    }
    if (fine >= 1024)
      throw NumericalError("alien_derivation: contour estimates disagree after node doubling");
    std::vector<CMatrix> next;
    const int count = 2 * fine;
    for (int k = 0; k < count; ++k) {
      if (k % 2 == 0)
        next.push_back(vals[static_cast<std::size_t>(k / 2)]);
      else
        next.push_back(ls(xi + rho * node(k, count)).value);
    }
    vals = std::move(next);
    fine = count;
  }
}

}  // namespace

AlienDerivation alien_derivation(const ModuleSpec& m, cplx xi, cplx a, const AlienOptions& opts) {
  const QContext& ctx = m.context();
  if (xi == cplx{0.0, 0.0}) throw ValidationError("alien_derivation: direction must be nonzero");
  if (a == cplx{0.0, 0.0}) throw ValidationError("alien_derivation: basepoint a must be nonzero");
  if (on_theta_zero(ctx, a / xi, 1e-9))
    throw PreconditionError("alien_derivation: basepoint lies on -xi q^Z");
  AlienDerivation out;
  out.point = xi;
  out.a = a;
  out.slopes = m.slopes();
  out.matrix = BlockMatrix::zero(m.layout());

  if (opts.method == AlienMethod::ClosedForm) {
    const OneLevelData d = one_level_data(m);
    out.matrix.set_block(0, 1, closed_form_residue(ctx, d.delta, d.A, d.B, d.U, xi, a));
    return out;
  }

  const SingularLocus locus = singular_locus(m);
  double dist = std::abs(xi) * (ctx.abs_q() - 1.0) / 8.0;
  auto consider = [&](cplx p) {
    for (cplx l : lifts_near(ctx, p, xi, 2)) {
      const double d = std::abs(l - xi);
      if (d > 1e-9 * std::abs(xi)) dist = std::min(dist, d);
    }
  };
  for (const auto& sp : locus.points) consider(sp.point.lift());
  consider(-a);
  double rho = dist / 2.0;
  if (opts.rho) rho = std::min(*opts.rho, rho);
  out.c0 = opts.c0 ? *opts.c0 : default_c0(m, a);
  double c0_gap = std::numeric_limits<double>::infinity();
  for (cplx l : lifts_near(ctx, out.c0, xi, 2)) c0_gap = std::min(c0_gap, std::abs(l - xi));
  if (!opts.c0) rho = std::min(rho, c0_gap / 2.0);
  if (rho < 1e-8 * std::abs(xi))
    throw PreconditionError("alien_derivation: contour radius below 1e-8 |xi| (nearby singular point)");
  if (c0_gap < 2.0 * rho)
    throw PreconditionError("alien_derivation: reference direction c0 lies inside the contour");
  out.rho = rho;
  const LsMap ls(m, out.c0, a, opts.sum);
  out.matrix = contour_residue(m, xi, ls, rho, opts.nodes, &out.richardson, &out.nodes);
  return out;
}

std::map<int, BlockMatrix> level_decompose(const AlienDerivation& d) {
  std::map<int, BlockMatrix> out;
  const BlockLayout& layout = d.matrix.layout;
  for (int i = 0; i < layout.blocks(); ++i)
    for (int j = i + 1; j < layout.blocks(); ++j) {
      const int delta = d.slopes[static_cast<std::size_t>(j)] - d.slopes[static_cast<std::size_t>(i)];
      if (delta < 1) continue;
      auto it = out.find(delta);
      if (it == out.end()) it = out.emplace(delta, BlockMatrix::zero(layout)).first;
      it->second.set_block(i, j, d.matrix.block(i, j));
    }
  return out;
}

namespace {

CMatrix permute(const CMatrix& x, const std::vector<int>& position) {
  const auto n = static_cast<Eigen::Index>(position.size());
  CMatrix out(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) out(r, c) = x(position[static_cast<std::size_t>(r)], position[static_cast<std::size_t>(c)]);
  return out;
}

}  // namespace

double tensor_compatibility_check(const ModuleSpec& m, const ModuleSpec& n, cplx c, cplx a) {
  const TensorProduct t = tensor(m, n);
  const SingularLocus locus = singular_locus(t.module);
  if (locus.contains(EllipticPoint(t.module.context(), c), 1e-9))
    throw ResonanceError("tensor_compatibility_check: mixed nonresonance condition violated at c");
  const CMatrix sa = sum_in_direction(m, c).eval(a);
  const CMatrix sb = sum_in_direction(n, c).eval(a);
  const CMatrix st = sum_in_direction(t.module, c).eval(a);
  const CMatrix g = unipotent_at(t.module.layout(), t.gauge, a);
  return (st - g * permute(linalg::kron(sa, sb), t.position)).cwiseAbs().maxCoeff();
}

double tensor_alien_residual(const ModuleSpec& m, const ModuleSpec& n, cplx xi, cplx a, cplx c0) {
  const TensorProduct t = tensor(m, n);
  AlienOptions opts;
  opts.c0 = c0;
  const CMatrix da = alien_derivation(m, xi, a, opts).matrix.value;
  const CMatrix db = alien_derivation(n, xi, a, opts).matrix.value;
  const CMatrix dt = alien_derivation(t.module, xi, a, opts).matrix.value;
  const CMatrix ia = CMatrix::Identity(da.rows(), da.cols());
  const CMatrix ib = CMatrix::Identity(db.rows(), db.cols());
  const CMatrix expected = permute(linalg::kron(da, ib) + linalg::kron(ia, db), t.position);
  const double scale = std::max(expected.cwiseAbs().maxCoeff(), dt.cwiseAbs().maxCoeff());
  const double diff = (dt - expected).cwiseAbs().maxCoeff();
  return scale < 1e-12 ? diff : diff / scale;
}

}  // namespace qdiff
