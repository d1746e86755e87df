#pragma once

#include "qdiff/qcontext.hpp"
#include "qdiff/series.hpp"

namespace qdiff {

/// Coefficients q^{-n(n+1)/2} of theta(z) = sum_n q^{-n(n+1)/2} z^n for |n| <= N.
Series theta_coeffs(const QContext& ctx, int N);

/// theta^delta = sum_n t_n z^n on |n| <= N.
class ThetaPower {
 public:
  ThetaPower(QContext ctx, int delta, Series coeffs);

  int delta() const noexcept { return delta_; }
  int N() const noexcept { return coeffs_.n_max(); }
  const Series& coeffs() const noexcept { return coeffs_; }
  const QContext& context() const noexcept { return ctx_; }

  /// t_n for any n: stored values inside the window, continued outside it by
  /// t_{n-delta} = q^n t_n (exact, underflows to 0 far out).
  cplx t(int n) const;

  /// Largest relative residual of the recurrence over the window, ignoring
  /// pairs whose magnitude has underflowed.
  double recurrence_residual() const;

 private:
  QContext ctx_;
  int delta_;
  Series coeffs_;
};

/// theta^delta by padded convolution of theta_coeffs; the recurrence is
/// checked afterwards. Throws NumericalError if it fails beyond tol.
ThetaPower theta_power(const QContext& ctx, int delta, int N);

/// theta(z0) by summation from the peak outwards until terms drop below
/// machine precision relative to the largest term. Throws on z0 = 0.
cplx theta_eval(const QContext& ctx, cplx z0);

/// theta_c(z) = theta(z / c).
cplx theta_translate_eval(const QContext& ctx, cplx c, cplx z);

/// True when z lies on the zero spiral -q^Z within relative distance rel.
bool on_theta_zero(const QContext& ctx, cplx z, double rel);

/// Taylor coefficients of h -> theta(z0 + h), orders 0..order-1.
std::vector<cplx> theta_taylor(const QContext& ctx, cplx z0, int order);

/// theta(a X)^{-delta} at X = L^{-1} by holomorphic functional calculus.
/// Throws PreconditionError when a * spectrum(L^{-1}) meets -q^Z within sqrt(tol).
CMatrix theta_power_eval_operator(const QContext& ctx, int delta, const CMatrix& L,
                                  cplx a = 1.0);

}  // namespace qdiff
