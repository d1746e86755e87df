#pragma once

#include <cmath>

#include "qdiff/errors.hpp"
#include "qdiff/types.hpp"

namespace qdiff {

/// The fixed base q (|q| > 1) together with the working tolerance.
class QContext {
 public:
  explicit QContext(cplx q, double tol = 1e-10) : q_(q), tol_(tol) {
    if (!(std::abs(q) > 1.0)) throw ValidationError("QContext: |q| must be > 1");
    if (!(tol > 0.0)) throw ValidationError("QContext: tol must be > 0");
    q_inv_ = 1.0 / q_;
    log_abs_q_ = std::log(std::abs(q_));
  }

  cplx q() const noexcept { return q_; }
  cplx q_inv() const noexcept { return q_inv_; }
  double log_abs_q() const noexcept { return log_abs_q_; }
  double abs_q() const noexcept { return std::abs(q_); }
  double tol() const noexcept { return tol_; }
  double sqrt_tol() const noexcept { return std::sqrt(tol_); }

  /// q^n for integer n, by repeated squaring (exact for q a power of two).
  cplx qpow(long long n) const {
    cplx base = n >= 0 ? q_ : q_inv_;
    unsigned long long e = n >= 0 ? static_cast<unsigned long long>(n)
                                  : static_cast<unsigned long long>(-n);
    cplx r = 1.0;
    while (e) {
      if (e & 1ULL) r *= base;
      base *= base;
      e >>= 1ULL;
    }
    return r;
  }

 private:
  cplx q_;
  double tol_;
  cplx q_inv_;
  double log_abs_q_;
};

}  // namespace qdiff
