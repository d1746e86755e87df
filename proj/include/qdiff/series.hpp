#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "qdiff/qcontext.hpp"
#include "qdiff/types.hpp"

namespace qdiff {

/// Advisory growth metadata. Producers set it; nothing consults it implicitly
/// except tag propagation and tail estimates.
struct GrowthTag {
  enum class Kind { Convergent, EntireOnCStar, QGevrey, Unclassified };
  Kind kind = Kind::Unclassified;
  int delta = 0;  // only meaningful for QGevrey

  static GrowthTag convergent() { return {Kind::Convergent, 0}; }
  static GrowthTag entire() { return {Kind::EntireOnCStar, 0}; }
  static GrowthTag q_gevrey(int d) { return {Kind::QGevrey, d}; }
  static GrowthTag unclassified() { return {}; }

  friend bool operator==(const GrowthTag&, const GrowthTag&) = default;
};

/// Coarser of two tags: equal tags are kept, two q-Gevrey tags keep the larger
/// level, anything else degrades to Unclassified.
GrowthTag coarser(const GrowthTag& a, const GrowthTag& b);

/// Integer index window [lo, hi], inclusive.
struct Window {
  int lo = 0;
  int hi = 0;
  bool contains(int n) const noexcept { return lo <= n && n <= hi; }
  int size() const noexcept { return hi - lo + 1; }
  friend bool operator==(const Window&, const Window&) = default;
};

/// Finite window of a (possibly infinite) Laurent series sum c_n z^n.
///
/// `closed_below` / `closed_above` record that every coefficient beyond the
/// corresponding edge is known to be zero (Laurent polynomial on that side).
/// Open sides are truncations; products track which coefficients are still
/// trustworthy (see mul()).
class TruncatedLaurentSeries {
 public:
  TruncatedLaurentSeries() : TruncatedLaurentSeries(0, 0) {}
  TruncatedLaurentSeries(int n_min, int n_max, GrowthTag tag = {});
  TruncatedLaurentSeries(int n_min, std::vector<cplx> coeffs, GrowthTag tag = {});

  /// Laurent polynomial (closed on both sides).
  static TruncatedLaurentSeries polynomial(int n_min, std::vector<cplx> coeffs);
  static TruncatedLaurentSeries monomial(int n, cplx c = 1.0);
  static TruncatedLaurentSeries zero() { return polynomial(0, {0.0}); }

  int n_min() const noexcept { return n_min_; }
  int n_max() const noexcept { return n_min_ + static_cast<int>(coeffs_.size()) - 1; }
  Window window() const noexcept { return {n_min(), n_max()}; }
  const std::vector<cplx>& coeffs() const noexcept { return coeffs_; }

  /// Out-of-window reads return 0.
  cplx operator[](int n) const noexcept;
  /// Out-of-window writes throw.
  void set(int n, cplx value);

  GrowthTag growth_tag() const noexcept { return tag_; }
  void set_growth_tag(GrowthTag t) noexcept { tag_ = t; }
  bool closed_below() const noexcept { return closed_below_; }
  bool closed_above() const noexcept { return closed_above_; }
  void set_closed(bool below, bool above) noexcept {
    closed_below_ = below;
    closed_above_ = above;
  }

  /// Copy restricted to `w` (must intersect); sides cut off become open.
  TruncatedLaurentSeries restricted(Window w) const;

 private:
  int n_min_;
  std::vector<cplx> coeffs_;
  GrowthTag tag_;
  bool closed_below_ = false;
  bool closed_above_ = false;
};

using Series = TruncatedLaurentSeries;

/// Product result: the coefficients on the requested window plus the
/// subwindow on which truncation of the inputs cannot have changed them
/// beyond tol (relative).
struct Product {
  Series series;
  Window reliable;
};

Series add(const Series& a, const Series& b);
Series scale(const Series& a, cplx s);
Series sub(const Series& a, const Series& b);

/// Cauchy product restricted to `out_window`. Throws NumericalError when no
/// output coefficient is reliable.
Product mul(const Series& a, const Series& b, Window out_window, double tol = 1e-10);

/// f(z) -> f(qz): coefficient n times q^n.
Series sigma_q(const QContext& ctx, const Series& a);
/// Multiplication by z^k.
Series shift(const Series& a, int k);

struct Evaluation {
  cplx value;
  double tail_bound;
};

/// Partial sum over the window, plus a geometric tail estimate from the last
/// two coefficients on each open side (0 for closed sides). Throws on z0 = 0.
Evaluation eval(const Series& a, cplx z0);

enum class GrowthFit { FitsQGevreyStrict, FitsQGevreyLoose, Fails };
enum class Side { Positive, Negative };

/// Regression heuristic for ||G_n|| = O(R^n |q|^{-n^2/(2 delta)}).
///
/// Fits y_n = log|G_n| + n^2 log|q| / (2 delta) by least squares with a
/// quadratic model b + s n + k n^2 on the requested side (n -> +inf, or
/// n -> -inf read as index -n). Fails if k > threshold (slower than level
/// delta); Strict if the fitted geometric rate s (or curvature k) is <= the
/// threshold, i.e. no R > 1 is needed; Loose otherwise. A numerical
/// heuristic, not a proof. Throws NumericalError with fewer than 8 nonzero
/// coefficients on the side.
GrowthFit classify_growth(const QContext& ctx, const Series& a, int delta,
                          Side side = Side::Positive);

// ---------------------------------------------------------------------------

/// Matrix of Laurent series sharing one window, stored coefficient-major.
class MatrixSeries {
 public:
  MatrixSeries() = default;
  MatrixSeries(int rows, int cols, Window w, GrowthTag tag = {});

  static MatrixSeries polynomial(int rows, int cols, Window w);
  static MatrixSeries constant(const CMatrix& m);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  Window window() const noexcept { return window_; }

  /// Coefficient matrix at z^n; zero matrix outside the window.
  CMatrix coeff(int n) const;
  CMatrix& coeff_ref(int n);
  void set_coeff(int n, const CMatrix& m);

  Series entry(int r, int c) const;

  GrowthTag growth_tag() const noexcept { return tag_; }
  void set_growth_tag(GrowthTag t) noexcept { tag_ = t; }
  bool closed_below() const noexcept { return closed_below_; }
  bool closed_above() const noexcept { return closed_above_; }
  void set_closed(bool below, bool above) noexcept {
    closed_below_ = below;
    closed_above_ = above;
  }

  bool is_zero() const;
  double max_abs() const;
  /// Smallest window containing every nonzero coefficient (nullopt if zero).
  std::optional<Window> support() const;

  MatrixSeries restricted(Window w) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  Window window_{0, -1};
  std::vector<CMatrix> coeffs_;
  GrowthTag tag_;
  bool closed_below_ = false;
  bool closed_above_ = false;
};

struct MatrixProduct {
  MatrixSeries series;
  Window reliable;
};

MatrixSeries add(const MatrixSeries& a, const MatrixSeries& b);
MatrixSeries scale(const MatrixSeries& a, cplx s);
MatrixProduct mul(const MatrixSeries& a, const MatrixSeries& b, Window out_window,
                  double tol = 1e-10);
MatrixSeries sigma_q(const QContext& ctx, const MatrixSeries& a);
MatrixSeries shift(const MatrixSeries& a, int k);
/// Left/right multiplication by a constant matrix.
MatrixSeries left_mul(const CMatrix& m, const MatrixSeries& a);
MatrixSeries right_mul(const MatrixSeries& a, const CMatrix& m);

struct MatrixEvaluation {
  CMatrix value;
  double tail_bound;
};
MatrixEvaluation eval(const MatrixSeries& a, cplx z0);

}  // namespace qdiff
