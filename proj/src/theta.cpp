#include "qdiff/theta.hpp"

#include <algorithm>
#include <cmath>

#include "qdiff/errors.hpp"
#include "qdiff/linalg.hpp"

namespace qdiff {

Series theta_coeffs(const QContext& ctx, int N) {
  if (N < 0) throw ValidationError("theta_coeffs: N must be >= 0");
  Series s(-N, N, GrowthTag::entire());
  for (int n = -N; n <= N; ++n) {
    const long long e = -static_cast<long long>(n) * (n + 1) / 2;
    s.set(n, ctx.qpow(e));
  }
  return s;
}

ThetaPower::ThetaPower(QContext ctx, int delta, Series coeffs)
    : ctx_(ctx), delta_(delta), coeffs_(std::move(coeffs)) {}

cplx ThetaPower::t(int n) const {
  const int N = coeffs_.n_max();
  if (n >= -N && n <= N) return coeffs_[n];
  cplx v;
  if (n > N) {
    // t_m = t_{m-delta} q^{-m}, walking up from the last stored block.
    int m = N - delta_ + 1;
    std::vector<cplx> buf;
    for (int k = m; k <= N; ++k) buf.push_back(coeffs_[k]);
    for (int k = N + 1; k <= n; ++k) {
      const cplx next = buf[static_cast<std::size_t>(k - delta_ - m)] * ctx_.qpow(-k);
      buf.push_back(next);
    }
    v = buf.back();
  } else {
    // t_{m-delta} = q^m t_m, walking down.
    int lo = -N;
    std::vector<cplx> known;  // known[k - lo] = t_k
    for (int k = -N; k <= -N + delta_ - 1; ++k) known.push_back(coeffs_[k]);
    while (lo > n) {
      const int k = lo - 1;  // t_k = q^{k+delta} t_{k+delta}
      const cplx val = ctx_.qpow(k + delta_) * known[static_cast<std::size_t>(delta_ - 1)];
      known.insert(known.begin(), val);
      known.pop_back();
      lo = k;
    }
    v = known.front();
  }
  return v;
}

double ThetaPower::recurrence_residual() const {
  double worst = 0.0;
  const int N = coeffs_.n_max();
  for (int n = -N + delta_; n <= N; ++n) {
    const cplx lhs = coeffs_[n - delta_];
    const cplx rhs = ctx_.qpow(n) * coeffs_[n];
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    if (scale < 1e-280) continue;
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

ThetaPower theta_power(const QContext& ctx, int delta, int N) {
  if (delta < 1) throw ValidationError("theta_power: delta must be >= 1");
  if (N < delta) throw ValidationError("theta_power: N must be >= delta");
  const double l10 = std::log10(ctx.abs_q());
  const int pad = 2 + static_cast<int>(std::ceil(std::sqrt(80.0 / l10)));
  const int P = N + pad;
  const Series base = theta_coeffs(ctx, P);
  Series power = base;
  for (int k = 1; k < delta; ++k) {
    Product p = mul(power, base, {-P, P}, ctx.tol());
    if (p.reliable.lo > -N || p.reliable.hi < N)
      throw NumericalError("theta_power: reliable window smaller than requested");
    power = p.series;
  }
  Series out = power.restricted({-N, N});
  out.set_growth_tag(GrowthTag::entire());
  ThetaPower tp(ctx, delta, std::move(out));
  if (tp.recurrence_residual() > ctx.tol())
    throw NumericalError("theta_power: recurrence t_{n-delta} = q^n t_n fails; window too small");
  return tp;
}

namespace {

// Nonzero terms c_n z^n of theta, n from lo upward.
struct ThetaTerms {
  int lo = 0;
  std::vector<cplx> terms;
};

ThetaTerms theta_terms(const QContext& ctx, cplx z) {
  if (z == cplx{0.0, 0.0}) throw ValidationError("theta: evaluation point must be nonzero");
  constexpr double kRel = 1e-18;
  constexpr int kMax = 20000;
  const double peak = std::log(std::abs(z)) / ctx.log_abs_q();
  std::vector<cplx> up{1.0};
  double biggest = 1.0;
  cplx term = 1.0;
  for (int n = 0; n < kMax; ++n) {
    term *= z * ctx.qpow(-(n + 1));  // c_{n+1} z^{n+1}
    const double m = std::abs(term);
    biggest = std::max(biggest, m);
    up.push_back(term);
    if (n + 1 > peak && m < kRel * biggest) break;
    if (m == 0.0) break;
  }
  std::vector<cplx> down;
  term = 1.0;
  for (int n = 0; n > -kMax; --n) {
    term *= ctx.qpow(n) / z;  // c_{n-1} z^{n-1}
    const double m = std::abs(term);
    biggest = std::max(biggest, m);
    down.push_back(term);
    if (n - 1 < peak && m < kRel * biggest) break;
    if (m == 0.0) break;
  }
  ThetaTerms out;
  out.lo = -static_cast<int>(down.size());
  out.terms.assign(down.rbegin(), down.rend());
  out.terms.insert(out.terms.end(), up.begin(), up.end());
  return out;
}

}  // namespace

cplx theta_eval(const QContext& ctx, cplx z0) {
  const ThetaTerms tt = theta_terms(ctx, z0);
  // Sum from the smallest terms inwards.
  cplx sum = 0.0;
  std::vector<std::pair<double, cplx>> sorted;
  sorted.reserve(tt.terms.size());
  for (const cplx& t : tt.terms) sorted.emplace_back(std::abs(t), t);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [m, t] : sorted) sum += t;
  return sum;
}

cplx theta_translate_eval(const QContext& ctx, cplx c, cplx z) { return theta_eval(ctx, z / c); }

bool on_theta_zero(const QContext& ctx, cplx z, double rel) {
  if (z == cplx{0.0, 0.0}) return false;
  const cplx w = -z;
  const long long k = std::llround(std::log(std::abs(w)) / ctx.log_abs_q());
  for (long long j = k - 1; j <= k + 1; ++j) {
    if (std::abs(w * ctx.qpow(-j) - 1.0) < rel) return true;
  }
  return false;
}

std::vector<cplx> theta_taylor(const QContext& ctx, cplx z0, int order) {
  const ThetaTerms tt = theta_terms(ctx, z0);
  std::vector<cplx> out(static_cast<std::size_t>(order), 0.0);
  for (std::size_t i = 0; i < tt.terms.size(); ++i) {
    const int n = tt.lo + static_cast<int>(i);
    // d^k/dz^k z^n / k! = binom(n, k) z^{n-k}
    cplx factor = tt.terms[i];
    for (int k = 0; k < order; ++k) {
      out[static_cast<std::size_t>(k)] += factor;
      factor *= static_cast<double>(n - k) / static_cast<double>(k + 1) / z0;
    }
  }
  return out;
}

CMatrix theta_power_eval_operator(const QContext& ctx, int delta, const CMatrix& L, cplx a) {
  if (delta < 1) throw ValidationError("theta_power_eval_operator: delta must be >= 1");
  if (L.rows() != L.cols()) throw ValidationError("theta_power_eval_operator: L must be square");
  Eigen::FullPivLU<CMatrix> lu(L);
  if (!lu.isInvertible()) throw PreconditionError("theta_power_eval_operator: L is singular");
  const CMatrix inv = lu.inverse();
  const double alpha = -static_cast<double>(delta);
  auto f = [&](cplx w, int order) {
    if (on_theta_zero(ctx, a * w, ctx.sqrt_tol()))
      throw PreconditionError("theta_power_eval_operator: spectrum meets the theta zero spiral -q^Z");
    // p(h) = theta(a (w + h))
    std::vector<cplx> p = theta_taylor(ctx, a * w, order);
    cplx ak = 1.0;
    for (auto& pk : p) {
      pk *= ak;
      ak *= a;
    }
    // b = p^alpha (J.C.P. Miller recurrence)
    std::vector<cplx> b(static_cast<std::size_t>(order), 0.0);
    b[0] = std::pow(p[0], alpha);
    for (int k = 1; k < order; ++k) {
      cplx acc = 0.0;
      for (int j = 1; j <= k; ++j)
        acc += ((alpha + 1.0) * j - k) * p[static_cast<std::size_t>(j)] *
               b[static_cast<std::size_t>(k - j)];
      b[static_cast<std::size_t>(k)] = acc / (static_cast<double>(k) * p[0]);
    }
    return b;
  };
  return linalg::matrix_function(inv, f, ctx.sqrt_tol());
}

}  // namespace qdiff
