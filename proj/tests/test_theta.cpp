#include <doctest.h>

#include <cmath>
#include <random>

#include "qdiff/errors.hpp"
#include "qdiff/linalg.hpp"
#include "qdiff/theta.hpp"

using namespace qdiff;

TEST_CASE("theta coefficients") {
  const QContext ctx(cplx{2.0, 0.5});
  const Series th = theta_coeffs(ctx, 10);
  CHECK(std::abs(th[0] - 1.0) == 0.0);
  CHECK(std::abs(th[1] - 1.0 / ctx.q()) < 1e-16);
  CHECK(std::abs(th[-1] - 1.0) == 0.0);
  CHECK(th.growth_tag() == GrowthTag::entire());
  const Series lhs = sigma_q(ctx, th);
  const Series rhs = shift(th, 1);
  for (int n = -9; n <= 10; ++n) CHECK(std::abs(lhs[n] - rhs[n]) <= 1e-14 * std::abs(rhs[n]));
}

TEST_CASE("theta power: delta 1 is theta, delta 2 central coefficient") {
  const QContext ctx(cplx{2.0, 0.0});
  const ThetaPower t1 = theta_power(ctx, 1, 12);
  const Series th = theta_coeffs(ctx, 12);
  for (int n = -12; n <= 12; ++n) CHECK(t1.t(n) == th[n]);

  const ThetaPower t2 = theta_power(ctx, 2, 12);
  double oracle = 0.0;
  for (int m = -60; m <= 60; ++m) oracle += std::pow(2.0, -0.5 * m * (m + 1)) * std::pow(2.0, -0.5 * (-m) * (-m + 1));
  CHECK(std::abs(t2.t(0) - oracle) < 1e-14 * oracle);
}

TEST_CASE("theta power recurrence and continuation") {
  for (cplx q : {cplx{2.0, 0.0}, cplx{1.5, 0.5}, cplx{3.0, 0.0}}) {
    const QContext ctx(q);
    for (int delta : {1, 2, 3}) {
      const ThetaPower tp = theta_power(ctx, delta, 15 + delta);
      CHECK(tp.recurrence_residual() < 1e-12);
      for (int n = -15; n <= 15; ++n) {
        const cplx lhs = tp.t(n - delta), rhs = ctx.qpow(n) * tp.t(n);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
      }
      // continuation beyond the stored window keeps the recurrence
      const int N = tp.N();
      for (int n = N + 1; n <= N + 6; ++n)
        CHECK(std::abs(tp.t(n - delta) - ctx.qpow(n) * tp.t(n)) <= 1e-12 * std::abs(tp.t(n - delta)));
      for (int n = -N - 6; n < -N + delta; ++n)
        CHECK(std::abs(tp.t(n - delta) - ctx.qpow(n) * tp.t(n)) <= 1e-12 * std::abs(tp.t(n - delta)));
    }
  }
}

TEST_CASE("theta power coefficients decay at level delta") {
  const QContext ctx(cplx{2.0, 0.0});
  for (int delta : {1, 2, 3}) {
    const ThetaPower tp = theta_power(ctx, delta, 30);
    const GrowthFit pos = classify_growth(ctx, tp.coeffs(), delta, Side::Positive);
    const GrowthFit neg = classify_growth(ctx, tp.coeffs(), delta, Side::Negative);
    CHECK(pos != GrowthFit::Fails);
    CHECK(neg != GrowthFit::Fails);
  }
}

TEST_CASE("theta functional equation and zeros") {
  for (cplx q : {cplx{2.0, 0.0}, cplx{1.5, 0.5}}) {
    const QContext ctx(q);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
      const double r = std::pow(ctx.abs_q(), u(rng));
      const cplx z = std::polar(r, 2.0 * kPi * u(rng));
      const cplx th = theta_eval(ctx, z);
      CHECK(std::abs(theta_eval(ctx, q * z) - z * th) < 1e-10 * (1.0 + std::abs(z * th)));
    }
    CHECK(std::abs(theta_eval(ctx, -1.0)) < ctx.sqrt_tol());
    CHECK(std::abs(theta_eval(ctx, -q)) < ctx.sqrt_tol());
    CHECK(on_theta_zero(ctx, -q * q, 1e-9));
    CHECK_FALSE(on_theta_zero(ctx, 1.0, 1e-9));
    const cplx c{1.2, 0.4}, z{0.3, 0.8};
    CHECK(std::abs(theta_translate_eval(ctx, c, q * z) - (z / c) * theta_translate_eval(ctx, c, z)) <
          1e-12 * (1.0 + std::abs(theta_translate_eval(ctx, c, z))));
  }
  CHECK_THROWS_AS(theta_eval(QContext(cplx{2.0, 0.0}), 0.0), ValidationError);
}

TEST_CASE("theta against a direct partial sum") {
  const QContext ctx(cplx{2.0, 0.0});
  double oracle = 0.0;
  for (int n = -40; n <= 40; ++n) oracle += std::pow(2.0, -0.5 * n * (n + 1));
  CHECK(std::abs(theta_eval(ctx, 1.0) - oracle) < 1e-14 * oracle);
}

TEST_CASE("theta Taylor coefficients match finite differences") {
  const QContext ctx(cplx{1.7, 0.3});
  const cplx z0{0.8, 0.5};
  const auto t = theta_taylor(ctx, z0, 3);
  const double h = 1e-4;
  const cplx d1 = (theta_eval(ctx, z0 + h) - theta_eval(ctx, z0 - h)) / (2.0 * h);
  const cplx d2 = (theta_eval(ctx, z0 + h) - 2.0 * theta_eval(ctx, z0) + theta_eval(ctx, z0 - h)) / (h * h);
  CHECK(std::abs(t[0] - theta_eval(ctx, z0)) < 1e-13);
  CHECK(std::abs(t[1] - d1) < 1e-6);
  CHECK(std::abs(t[2] - d2 / 2.0) < 1e-4);
}

TEST_CASE("theta power of an operator") {
  const QContext ctx(cplx{2.0, 0.0});
  const cplx lam{1.3, 0.4};
  for (int delta : {1, 2}) {
    const CMatrix L = lam * CMatrix::Identity(2, 2);
    const CMatrix M = theta_power_eval_operator(ctx, delta, L);
    const cplx s = std::pow(theta_eval(ctx, 1.0 / lam), -delta);
    CHECK((M - s * CMatrix::Identity(2, 2)).norm() < 1e-12 * std::abs(s));
  }
  CMatrix D = CMatrix::Zero(2, 2);
  D(0, 0) = {1.3, 0.4};
  D(1, 1) = {0.7, -1.1};
  const CMatrix Md = theta_power_eval_operator(ctx, 1, D);
  CHECK(std::abs(Md(0, 0) - 1.0 / theta_eval(ctx, 1.0 / D(0, 0))) < 1e-12);
  CHECK(std::abs(Md(1, 1) - 1.0 / theta_eval(ctx, 1.0 / D(1, 1))) < 1e-12);
  CHECK(std::abs(Md(0, 1)) < 1e-14);

  // Jordan block against a perturbed, diagonalizable neighbour.
  CMatrix J(2, 2);
  J << lam, 1.0, 0.0, lam;
  CMatrix Jp = J;
  Jp(1, 1) += 1e-6;
  for (int delta : {1, 2}) {
    const CMatrix a = theta_power_eval_operator(ctx, delta, J);
    const CMatrix b = theta_power_eval_operator(ctx, delta, Jp);
    CHECK((a - b).norm() < 1e-4 * (1.0 + a.norm()));
  }

  // basepoint variant: theta(a L^{-1})^{-delta}
  const cplx a{0.6, 0.2};
  const CMatrix Ma = theta_power_eval_operator(ctx, 2, lam * CMatrix::Identity(1, 1), a);
  CHECK(std::abs(Ma(0, 0) - std::pow(theta_eval(ctx, a / lam), -2)) < 1e-12);

  CHECK_THROWS_AS(theta_power_eval_operator(ctx, 1, -1.0 * CMatrix::Identity(1, 1)), PreconditionError);
}

TEST_CASE("theta power of an operator commutes with similarity") {
  const QContext ctx(cplx{1.5, 0.5});
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    CMatrix L(3, 3), P(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        L(i, j) = cplx{g(rng), g(rng)} * 0.3;
        P(i, j) = cplx{g(rng), g(rng)} * 0.2;
      }
    L += CMatrix::Identity(3, 3) * cplx{1.4, 0.3};
    P += CMatrix::Identity(3, 3);
    const CMatrix lhs = theta_power_eval_operator(ctx, 2, P * L * P.inverse());
    const CMatrix rhs = P * theta_power_eval_operator(ctx, 2, L) * P.inverse();
    CHECK((lhs - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));
  }
}
