#include "qdiff/series.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qdiff/errors.hpp"

namespace qdiff {

GrowthTag coarser(const GrowthTag& a, const GrowthTag& b) {
  if (a == b) return a;
  if (a.kind == GrowthTag::Kind::QGevrey && b.kind == GrowthTag::Kind::QGevrey)
    return GrowthTag::q_gevrey(std::max(a.delta, b.delta));
  return GrowthTag::unclassified();
}

TruncatedLaurentSeries::TruncatedLaurentSeries(int n_min, int n_max, GrowthTag tag)
    : n_min_(n_min), tag_(tag) {
  if (n_max < n_min) throw ValidationError("series window must satisfy n_min <= n_max");
  coeffs_.assign(static_cast<std::size_t>(n_max - n_min + 1), cplx{0.0, 0.0});
}

TruncatedLaurentSeries::TruncatedLaurentSeries(int n_min, std::vector<cplx> coeffs,
                                               GrowthTag tag)
    : n_min_(n_min), coeffs_(std::move(coeffs)), tag_(tag) {
  if (coeffs_.empty()) throw ValidationError("series needs at least one coefficient");
}

TruncatedLaurentSeries TruncatedLaurentSeries::polynomial(int n_min, std::vector<cplx> coeffs) {
  TruncatedLaurentSeries s(n_min, std::move(coeffs), GrowthTag::convergent());
  s.set_closed(true, true);
  return s;
}

TruncatedLaurentSeries TruncatedLaurentSeries::monomial(int n, cplx c) {
  return polynomial(n, {c});
}

cplx TruncatedLaurentSeries::operator[](int n) const noexcept {
  if (n < n_min_ || n > n_max()) return {0.0, 0.0};
  return coeffs_[static_cast<std::size_t>(n - n_min_)];
}

void TruncatedLaurentSeries::set(int n, cplx value) {
  if (n < n_min_ || n > n_max()) throw ValidationError("series write outside window");
  coeffs_[static_cast<std::size_t>(n - n_min_)] = value;
}

TruncatedLaurentSeries TruncatedLaurentSeries::restricted(Window w) const {
  const int lo = std::max(w.lo, n_min());
  const int hi = std::min(w.hi, n_max());
  if (lo > hi) throw ValidationError("restriction window does not meet the series window");
  TruncatedLaurentSeries out(lo, hi, tag_);
  for (int n = lo; n <= hi; ++n) out.set(n, (*this)[n]);
  out.set_closed(lo == n_min() && closed_below_, hi == n_max() && closed_above_);
  return out;
}

Series add(const Series& a, const Series& b) {
  Series out(std::min(a.n_min(), b.n_min()), std::max(a.n_max(), b.n_max()),
             coarser(a.growth_tag(), b.growth_tag()));
  for (int n = out.n_min(); n <= out.n_max(); ++n) out.set(n, a[n] + b[n]);
  out.set_closed(a.closed_below() && b.closed_below(), a.closed_above() && b.closed_above());
  return out;
}

Series scale(const Series& a, cplx s) {
  std::vector<cplx> c = a.coeffs();
  for (auto& x : c) x *= s;
  Series out(a.n_min(), std::move(c), a.growth_tag());
  out.set_closed(a.closed_below(), a.closed_above());
  return out;
}

Series sub(const Series& a, const Series& b) { return add(a, scale(b, -1.0)); }

namespace {

// Bookkeeping shared by the scalar and matrix Cauchy products. `mag_a[m - a.lo]`
// is the magnitude of coefficient m of a.
struct Operand {
  Window w;
  std::vector<double> mag;
  bool closed_below;
  bool closed_above;

  double edge_below() const {
    double e = mag.front();
    if (mag.size() > 1) e = std::max(e, mag[1]);
    return e;
  }
  double edge_above() const {
    double e = mag.back();
    if (mag.size() > 1) e = std::max(e, mag[mag.size() - 2]);
    return e;
  }
};

// Upper bound on what the Cauchy coefficient n misses because an in-window
// coefficient of `x` pairs with an out-of-window (open side) coefficient of `y`.
// Out-of-window coefficients are bounded by the edge magnitude.
class MissingBound {
 public:
  MissingBound(const Operand& x, const Operand& y) : x_(x), y_(y) {
    prefix_.assign(x.mag.size() + 1, 0.0);
    for (std::size_t i = 0; i < x.mag.size(); ++i) prefix_[i + 1] = prefix_[i] + x.mag[i];
  }

  double operator()(int n) const {
    double total = 0.0;
    if (!y_.closed_above) {
      // partner n - m > y.hi  <=>  m < n - y.hi
      total += range_sum(x_.w.lo, n - y_.w.hi - 1) * y_.edge_above();
    }
    if (!y_.closed_below) {
      // partner n - m < y.lo  <=>  m > n - y.lo
      total += range_sum(n - y_.w.lo + 1, x_.w.hi) * y_.edge_below();
    }
    return total;
  }

 private:
  double range_sum(int lo, int hi) const {
    lo = std::max(lo, x_.w.lo);
    hi = std::min(hi, x_.w.hi);
    if (lo > hi) return 0.0;
    return prefix_[static_cast<std::size_t>(hi - x_.w.lo + 1)] -
           prefix_[static_cast<std::size_t>(lo - x_.w.lo)];
  }

  const Operand& x_;
  const Operand& y_;
  std::vector<double> prefix_;
};

Window reliable_run(const Operand& a, const Operand& b, Window out,
                    const std::vector<double>& out_mag, double tol) {
  MissingBound from_a(a, b);
  MissingBound from_b(b, a);
  constexpr double kNegligible = 1e-290;
  int best_lo = 0, best_len = 0, run_lo = 0, run_len = 0;
  for (int n = out.lo; n <= out.hi; ++n) {
    const double miss = from_a(n) + from_b(n);
    const double c = out_mag[static_cast<std::size_t>(n - out.lo)];
    const bool ok = miss == 0.0 || miss <= tol * c || miss < kNegligible;
    if (ok) {
      if (run_len == 0) run_lo = n;
      ++run_len;
      if (run_len > best_len) {
        best_len = run_len;
        best_lo = run_lo;
      }
    } else {
      run_len = 0;
    }
  }
  if (best_len == 0) throw NumericalError("mul: empty reliable subwindow");
  return {best_lo, best_lo + best_len - 1};
}

}  // namespace

Product mul(const Series& a, const Series& b, Window out_window, double tol) {
  if (out_window.hi < out_window.lo) throw ValidationError("mul: empty output window");
  Series out(out_window.lo, out_window.hi,
             coarser(a.growth_tag(), b.growth_tag()));
  for (int n = out_window.lo; n <= out_window.hi; ++n) {
    const int m_lo = std::max(a.n_min(), n - b.n_max());
    const int m_hi = std::min(a.n_max(), n - b.n_min());
    cplx acc{0.0, 0.0};
    for (int m = m_lo; m <= m_hi; ++m) acc += a[m] * b[n - m];
    out.set(n, acc);
  }

  Operand oa{a.window(), {}, a.closed_below(), a.closed_above()};
  Operand ob{b.window(), {}, b.closed_below(), b.closed_above()};
  for (const auto& c : a.coeffs()) oa.mag.push_back(std::abs(c));
  for (const auto& c : b.coeffs()) ob.mag.push_back(std::abs(c));
  std::vector<double> out_mag;
  for (const auto& c : out.coeffs()) out_mag.push_back(std::abs(c));
  const Window rel = reliable_run(oa, ob, out_window, out_mag, tol);

  const bool full_lo = a.closed_below() && b.closed_below() &&
                       out_window.lo <= a.n_min() + b.n_min();
  const bool full_hi = a.closed_above() && b.closed_above() &&
                       out_window.hi >= a.n_max() + b.n_max();
  out.set_closed(full_lo, full_hi);
  return {std::move(out), rel};
}

Series sigma_q(const QContext& ctx, const Series& a) {
  Series out = a;
  for (int n = a.n_min(); n <= a.n_max(); ++n) out.set(n, a[n] * ctx.qpow(n));
  return out;
}

Series shift(const Series& a, int k) {
  Series out(a.n_min() + k, a.coeffs(), a.growth_tag());
  out.set_closed(a.closed_below(), a.closed_above());
  return out;
}

namespace {

// Geometric tail estimate from the two outermost terms |c_n z^n| on one side.
double side_tail(double outer, double inner) {
  if (outer == 0.0) return 0.0;
  if (inner == 0.0) return outer;
  const double r = outer / inner;
  if (r >= 1.0) return std::numeric_limits<double>::infinity();
  return outer * r / (1.0 - r);
}

}  // namespace

Evaluation eval(const Series& a, cplx z0) {
  if (z0 == cplx{0.0, 0.0}) throw ValidationError("eval: z0 must be nonzero");
  cplx sum{0.0, 0.0};
  const double logr = std::log(std::abs(z0));
  const double arg = std::arg(z0);
  auto term = [&](int n) { return a[n] * std::polar(std::exp(n * logr), n * arg); };
  for (int n = a.n_min(); n <= a.n_max(); ++n) {
    if (a[n] != cplx{0.0, 0.0}) sum += term(n);
  }
  double tail = 0.0;
  const int lo = a.n_min(), hi = a.n_max();
  if (!a.closed_above()) tail += side_tail(std::abs(term(hi)), hi > lo ? std::abs(term(hi - 1)) : 0.0);
  if (!a.closed_below()) tail += side_tail(std::abs(term(lo)), hi > lo ? std::abs(term(lo + 1)) : 0.0);
  return {sum, tail};
}

GrowthFit classify_growth(const QContext& ctx, const Series& a, int delta, Side side) {
  if (delta < 1) throw ValidationError("classify_growth: delta must be >= 1");
  std::vector<double> xs, ys;
  for (int n = a.n_min(); n <= a.n_max(); ++n) {
    const int m = side == Side::Positive ? n : -n;
    if (m < 0) continue;
    const double mag = std::abs(a[n]);
    if (mag == 0.0 || !std::isfinite(mag)) continue;
    xs.push_back(m);
    ys.push_back(std::log(mag) + static_cast<double>(m) * m * ctx.log_abs_q() / (2.0 * delta));
  }
  if (xs.size() < 8) throw NumericalError("classify_growth: fewer than 8 nonzero coefficients");

  const double xmax = *std::max_element(xs.begin(), xs.end());
  const Eigen::Index N = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd X(N, 3);
  Eigen::VectorXd Y(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const double t = xs[static_cast<std::size_t>(i)] / xmax;
    X(i, 0) = 1.0;
    X(i, 1) = t;
    X(i, 2) = t * t;
    Y(i) = ys[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d quad = X.colPivHouseholderQr().solve(Y);
  const double curvature = quad(2) / (xmax * xmax);
  // Curvature threshold is relative to the level's own quadratic rate.
  const double level_rate = ctx.log_abs_q() / (2.0 * delta);
  if (curvature > 0.05 * level_rate) return GrowthFit::Fails;

  const Eigen::Vector2d lin = X.leftCols(2).colPivHouseholderQr().solve(Y);
  const double slope = lin(1) / xmax;
  if (slope <= 10.0 * ctx.tol()) return GrowthFit::FitsQGevreyStrict;
  return GrowthFit::FitsQGevreyLoose;
}

// ---------------------------------------------------------------------------

MatrixSeries::MatrixSeries(int rows, int cols, Window w, GrowthTag tag)
    : rows_(rows), cols_(cols), window_(w), tag_(tag) {
  if (rows < 0 || cols < 0) throw ValidationError("MatrixSeries: negative shape");
  if (w.hi < w.lo) throw ValidationError("MatrixSeries: empty window");
  coeffs_.assign(static_cast<std::size_t>(w.size()), CMatrix::Zero(rows, cols));
}

MatrixSeries MatrixSeries::polynomial(int rows, int cols, Window w) {
  MatrixSeries m(rows, cols, w, GrowthTag::convergent());
  m.set_closed(true, true);
  return m;
}

MatrixSeries MatrixSeries::constant(const CMatrix& c) {
  MatrixSeries m = polynomial(static_cast<int>(c.rows()), static_cast<int>(c.cols()), {0, 0});
  m.set_coeff(0, c);
  return m;
}

CMatrix MatrixSeries::coeff(int n) const {
  if (!window_.contains(n)) return CMatrix::Zero(rows_, cols_);
  return coeffs_[static_cast<std::size_t>(n - window_.lo)];
}

CMatrix& MatrixSeries::coeff_ref(int n) {
  if (!window_.contains(n)) throw ValidationError("MatrixSeries write outside window");
  return coeffs_[static_cast<std::size_t>(n - window_.lo)];
}

void MatrixSeries::set_coeff(int n, const CMatrix& m) {
  if (m.rows() != rows_ || m.cols() != cols_) throw ValidationError("MatrixSeries: shape mismatch");
  coeff_ref(n) = m;
}

Series MatrixSeries::entry(int r, int c) const {
  Series s(window_.lo, window_.hi, tag_);
  for (int n = window_.lo; n <= window_.hi; ++n) s.set(n, coeff(n)(r, c));
  s.set_closed(closed_below_, closed_above_);
  return s;
}

bool MatrixSeries::is_zero() const {
  for (const auto& c : coeffs_)
    if (!c.isZero(0.0)) return false;
  return true;
}

double MatrixSeries::max_abs() const {
  double m = 0.0;
  for (const auto& c : coeffs_)
    if (c.size() > 0) m = std::max(m, c.cwiseAbs().maxCoeff());
  return m;
}

std::optional<Window> MatrixSeries::support() const {
  std::optional<Window> s;
  for (int n = window_.lo; n <= window_.hi; ++n) {
    if (coeff(n).isZero(0.0)) continue;
    if (!s) s = Window{n, n};
    s->hi = n;
  }
  return s;
}

MatrixSeries MatrixSeries::restricted(Window w) const {
  const int lo = std::max(w.lo, window_.lo);
  const int hi = std::min(w.hi, window_.hi);
  if (lo > hi) throw ValidationError("restriction window does not meet the series window");
  MatrixSeries out(rows_, cols_, {lo, hi}, tag_);
  for (int n = lo; n <= hi; ++n) out.set_coeff(n, coeff(n));
  out.set_closed(lo == window_.lo && closed_below_, hi == window_.hi && closed_above_);
  return out;
}

MatrixSeries add(const MatrixSeries& a, const MatrixSeries& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ValidationError("add: shape mismatch");
  const Window w{std::min(a.window().lo, b.window().lo), std::max(a.window().hi, b.window().hi)};
  MatrixSeries out(a.rows(), a.cols(), w, coarser(a.growth_tag(), b.growth_tag()));
  for (int n = w.lo; n <= w.hi; ++n) out.set_coeff(n, a.coeff(n) + b.coeff(n));
  out.set_closed(a.closed_below() && b.closed_below(), a.closed_above() && b.closed_above());
  return out;
}

MatrixSeries scale(const MatrixSeries& a, cplx s) {
  MatrixSeries out = a;
  for (int n = a.window().lo; n <= a.window().hi; ++n) out.coeff_ref(n) *= s;
  return out;
}

MatrixProduct mul(const MatrixSeries& a, const MatrixSeries& b, Window out_window, double tol) {
  if (a.cols() != b.rows()) throw ValidationError("mul: inner dimension mismatch");
  if (out_window.hi < out_window.lo) throw ValidationError("mul: empty output window");
  MatrixSeries out(a.rows(), b.cols(), out_window, coarser(a.growth_tag(), b.growth_tag()));
  const Window wa = a.window(), wb = b.window();
  std::vector<bool> nz_a, nz_b;
  for (int m = wa.lo; m <= wa.hi; ++m) nz_a.push_back(!a.coeff(m).isZero(0.0));
  for (int m = wb.lo; m <= wb.hi; ++m) nz_b.push_back(!b.coeff(m).isZero(0.0));
  for (int n = out_window.lo; n <= out_window.hi; ++n) {
    const int m_lo = std::max(wa.lo, n - wb.hi);
    const int m_hi = std::min(wa.hi, n - wb.lo);
    CMatrix acc = CMatrix::Zero(a.rows(), b.cols());
    for (int m = m_lo; m <= m_hi; ++m) {
      if (!nz_a[static_cast<std::size_t>(m - wa.lo)] ||
          !nz_b[static_cast<std::size_t>(n - m - wb.lo)])
        continue;
      acc.noalias() += a.coeff(m) * b.coeff(n - m);
    }
    out.set_coeff(n, acc);
  }

  auto magnitudes = [](const MatrixSeries& s) {
    std::vector<double> v;
    for (int n = s.window().lo; n <= s.window().hi; ++n) {
      const CMatrix c = s.coeff(n);
      v.push_back(c.size() ? c.cwiseAbs().maxCoeff() : 0.0);
    }
    return v;
  };
  Operand oa{wa, magnitudes(a), a.closed_below(), a.closed_above()};
  Operand ob{wb, magnitudes(b), b.closed_below(), b.closed_above()};
  // Matrix entries: bound with the inner dimension as a norm factor.
  const double inner = std::max(1, a.cols());
  for (auto& m : oa.mag) m *= inner;
  const Window rel = reliable_run(oa, ob, out_window, magnitudes(out), tol);

  const bool full_lo = a.closed_below() && b.closed_below() && out_window.lo <= wa.lo + wb.lo;
  const bool full_hi = a.closed_above() && b.closed_above() && out_window.hi >= wa.hi + wb.hi;
  out.set_closed(full_lo, full_hi);
  return {std::move(out), rel};
}

MatrixSeries sigma_q(const QContext& ctx, const MatrixSeries& a) {
  MatrixSeries out = a;
  for (int n = a.window().lo; n <= a.window().hi; ++n) out.coeff_ref(n) *= ctx.qpow(n);
  return out;
}

MatrixSeries shift(const MatrixSeries& a, int k) {
  MatrixSeries out(a.rows(), a.cols(), {a.window().lo + k, a.window().hi + k}, a.growth_tag());
  for (int n = a.window().lo; n <= a.window().hi; ++n) out.set_coeff(n + k, a.coeff(n));
  out.set_closed(a.closed_below(), a.closed_above());
  return out;
}

MatrixSeries left_mul(const CMatrix& m, const MatrixSeries& a) {
  MatrixSeries out(static_cast<int>(m.rows()), a.cols(), a.window(), a.growth_tag());
  for (int n = a.window().lo; n <= a.window().hi; ++n) out.set_coeff(n, m * a.coeff(n));
  out.set_closed(a.closed_below(), a.closed_above());
  return out;
}

MatrixSeries right_mul(const MatrixSeries& a, const CMatrix& m) {
  MatrixSeries out(a.rows(), static_cast<int>(m.cols()), a.window(), a.growth_tag());
  for (int n = a.window().lo; n <= a.window().hi; ++n) out.set_coeff(n, a.coeff(n) * m);
  out.set_closed(a.closed_below(), a.closed_above());
  return out;
}

MatrixEvaluation eval(const MatrixSeries& a, cplx z0) {
  if (z0 == cplx{0.0, 0.0}) throw ValidationError("eval: z0 must be nonzero");
  const double logr = std::log(std::abs(z0));
  const double arg = std::arg(z0);
  auto zpow = [&](int n) { return std::polar(std::exp(n * logr), n * arg); };
  CMatrix sum = CMatrix::Zero(a.rows(), a.cols());
  const Window w = a.window();
  for (int n = w.lo; n <= w.hi; ++n) {
    const CMatrix c = a.coeff(n);
    if (!c.isZero(0.0)) sum += c * zpow(n);
  }
  auto mag = [&](int n) {
    const CMatrix c = a.coeff(n);
    return c.size() ? c.cwiseAbs().maxCoeff() * std::abs(zpow(n)) : 0.0;
  };
  double tail = 0.0;
  if (!a.closed_above()) tail += side_tail(mag(w.hi), w.hi > w.lo ? mag(w.hi - 1) : 0.0);
  if (!a.closed_below()) tail += side_tail(mag(w.lo), w.hi > w.lo ? mag(w.lo + 1) : 0.0);
  return {sum, tail};
}

}  // namespace qdiff
