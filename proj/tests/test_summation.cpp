#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "qdiff/errors.hpp"
#include "qdiff/phi_a.hpp"
#include "qdiff/summation.hpp"
#include "qdiff/theta.hpp"

using namespace qdiff;
using fixtures::scalar;

namespace {

/// Summed solution of beta z f(qz) - alpha f(z) = u in direction c:
/// f = g / theta(z / c) with g_p = u c^{-p} q^{-p(p+1)/2} / (beta c q^p - alpha).
cplx rank1_sum(cplx q, cplx alpha, cplx beta, cplx u, cplx c, cplx a) {
  cplx g = 0.0, th = 0.0;
  for (int p = -60; p <= 60; ++p) {
    const cplx w = std::pow(q, -0.5 * p * (p + 1));
    g += u * std::pow(c, -p) * w / (beta * c * std::pow(q, p) - alpha) * std::pow(a, p);
    th += w * std::pow(a / c, p);
  }
  return g / th;
}

/// Residue at xi = alpha / (beta q^p) of c -> f_c(a).
cplx rank1_residue(cplx q, cplx alpha, cplx beta, cplx u, int p, cplx a) {
  const cplx xi = alpha / (beta * std::pow(q, p));
  cplx th = 0.0;
  for (int n = -60; n <= 60; ++n) th += std::pow(q, -0.5 * n * (n + 1)) * std::pow(a / xi, n);
  return u * std::pow(xi, -p) * std::pow(q, -0.5 * p * (p + 1)) * std::pow(a, p) / (beta * std::pow(q, p) * th);
}

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

ModuleSpec delta2() {
  CMatrix A(2, 2);
  A << 1.3, 0.2, 0.1, 1.7;
  CMatrix u0(2, 1), u1(2, 1);
  u0 << 1.0, 0.5;
  u1 << -0.3, 0.8;
  return fixtures::one_level(cplx{2.0, 0.3}, 2, A, scalar(1.0), {u0, u1});
}

}  // namespace

TEST_CASE("zero upper blocks sum to the identity") {
  const ModuleSpec m(QContext(cplx{2.0, 0.0}), {0, 2}, {scalar(1.5), scalar(1.2)});
  const SummedGauge g = sum_in_direction(m, cplx{1.1, 0.4});
  CHECK(max_abs(g.eval(cplx{0.7, 0.2}) - CMatrix::Identity(2, 2)) == 0.0);
  const StokesElement s = stokes_operator(m, cplx{1.1, 0.4}, cplx{-1.3, 0.2}, 1.0);
  CHECK(max_abs(s.matrix.value - CMatrix::Identity(2, 2)) == 0.0);
}

TEST_CASE("rank-one summed gauge matches its explicit series") {
  const cplx q = 3.0, alpha = 2.0, beta = 1.0, u = 3.0;
  const ModuleSpec m = fixtures::rank1(q, alpha, beta, u);
  for (cplx c : {cplx{1.3, 0.4}, cplx{-1.5, 1.0}, cplx{0.2, -2.1}}) {
    const SummedGauge g = sum_in_direction(m, c);
    for (cplx a : {cplx{1.0, 0.0}, cplx{0.4, 0.7}, cplx{-2.2, 0.3}}) {
      const cplx expect = rank1_sum(q, alpha, beta, u, c, a);
      CHECK(std::abs(g.eval(a)(0, 1) - expect) < 1e-12 * (1.0 + std::abs(expect)));
    }
  }
}

TEST_CASE("summed gauges solve the functional equation and depend on c mod q") {
  const std::vector<ModuleSpec> ms = {fixtures::tschakaloff(2.0), delta2(), fixtures::two_level(),
                                      fixtures::rank1(3.0, 2.0, 1.0, 3.0)};
  for (const auto& m : ms) {
    const cplx c = default_c0(m, 1.0);
    const SummedGauge g = sum_in_direction(m, c);
    for (cplx a : {cplx{1.0, 0.0}, cplx{0.6, -0.5}, cplx{-1.4, 0.9}}) CHECK(functional_residual(m, g, a) < 1e-9);
    const SummedGauge gq = sum_in_direction(m, c * m.context().q());
    const cplx a{0.6, -0.5};
    CHECK(max_abs(g.eval(a) - gq.eval(a)) < 1e-10 * max_abs(g.eval(a)));
  }
}

TEST_CASE("direction on the singular locus is rejected") {
  CHECK_THROWS_AS(sum_in_direction(fixtures::rank1(3.0, 2.0, 1.0, 3.0), 2.0), ResonanceError);
  CHECK_THROWS_AS(sum_in_direction(fixtures::rank1(3.0, 2.0, 1.0, 3.0), 6.0), ResonanceError);
  const SummedGauge g = sum_in_direction(fixtures::rank1(3.0, 2.0, 1.0, 3.0), 1.5);
  CHECK_THROWS_AS(g.eval(-1.5), PreconditionError);
}

TEST_CASE("Stokes operators satisfy the cocycle relation and LS is strictly upper") {
  const std::vector<ModuleSpec> ms = {delta2(), fixtures::two_level()};
  for (const auto& m : ms) {
    const cplx c1{1.05, 0.35}, c2{-1.2, 0.5}, c3{0.3, -1.6}, a{0.9, 0.2};
    const CMatrix s12 = stokes_operator(m, c1, c2, a).matrix.value;
    const CMatrix s23 = stokes_operator(m, c2, c3, a).matrix.value;
    const CMatrix s13 = stokes_operator(m, c1, c3, a).matrix.value;
    CHECK(max_abs(s12 * s23 - s13) < 1e-8 * (1.0 + max_abs(s13)));
    const LsMap ls(m, c1, a);
    const BlockMatrix l = ls(c3);
    const BlockLayout& lay = l.layout;
    for (int i = 0; i < lay.blocks(); ++i)
      for (int j = 0; j <= i; ++j) CHECK(max_abs(l.block(i, j)) == 0.0);
    CHECK(max_abs(exp_nilpotent(l).value - s13) < 1e-8 * (1.0 + max_abs(s13)));
  }
}

TEST_CASE("alien derivation of the rank-one module") {
  const cplx q = 3.0, alpha = 2.0, beta = 1.0, u = 3.0;
  const ModuleSpec m = fixtures::rank1(q, alpha, beta, u);
  for (cplx a : {cplx{1.0, 0.0}, cplx{0.5, 0.8}}) {
    for (int p : {0, 1, -1}) {
      const cplx xi = alpha / (beta * std::pow(q, p));
      const AlienDerivation d = alien_derivation(m, xi, a);
      const cplx expect = rank1_residue(q, alpha, beta, u, p, a);
      CHECK(std::abs(d.matrix.block(0, 1)(0, 0) - expect) < 1e-8 * std::abs(expect));
      CHECK(max_abs(d.matrix.block(0, 0)) == 0.0);
      AlienOptions closed;
      closed.method = AlienMethod::ClosedForm;
      if (p == 0) CHECK(std::abs(alien_derivation(m, xi, a, closed).matrix.block(0, 1)(0, 0) - expect) < 1e-12 * std::abs(expect));
    }
  }
  const AlienDerivation off = alien_derivation(m, cplx{1.4, 0.9}, 1.0);
  CHECK(max_abs(off.matrix.value) < 1e-9);
}

TEST_CASE("alien derivation vanishes off the locus") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi), rad(1.05, 1.9);
  for (const auto& m : {delta2(), fixtures::two_level()}) {
    const SingularLocus locus = singular_locus(m);
    for (int t = 0; t < 4; ++t) {
      const cplx xi = std::polar(rad(rng), ang(rng));
      if (locus.distance(EllipticPoint(m.context(), xi)) < 0.05) continue;
      CHECK(max_abs(alien_derivation(m, xi, 1.0).matrix.value) < 1e-9);
    }
  }
}

TEST_CASE("alien derivation is linear in the upper block") {
  const CMatrix A = (CMatrix(2, 2) << 1.3, 0.2, 0.1, 1.7).finished();
  std::mt19937_64 rng(32);
  const CMatrix u0 = fixtures::random_matrix(rng, 2, 1), u1 = fixtures::random_matrix(rng, 2, 1);
  const CMatrix v0 = fixtures::random_matrix(rng, 2, 1), v1 = fixtures::random_matrix(rng, 2, 1);
  const cplx q{2.0, 0.3};
  const ModuleSpec mu = fixtures::one_level(q, 2, A, scalar(1.0), {u0, u1});
  const ModuleSpec mv = fixtures::one_level(q, 2, A, scalar(1.0), {v0, v1});
  const ModuleSpec mw = fixtures::one_level(q, 2, A, scalar(1.0), {u0 + 2.0 * v0, u1 + 2.0 * v1});
  for (const auto& sp : singular_locus(mu).points) {
    const cplx xi = sp.point.lift();
    AlienOptions o;
    o.c0 = cplx{1.1, 1.0};
    const CMatrix du = alien_derivation(mu, xi, 1.0, o).matrix.value;
    const CMatrix dv = alien_derivation(mv, xi, 1.0, o).matrix.value;
    const CMatrix dw = alien_derivation(mw, xi, 1.0, o).matrix.value;
    CHECK(max_abs(dw - du - 2.0 * dv) < 1e-8 * (1.0 + max_abs(dw)));
  }
}

TEST_CASE("basepoint covariance: Delta(qa) = A_0(a) Delta(a) A_0(a)^{-1}") {
  for (const auto& m : {delta2(), fixtures::two_level()}) {
    const cplx a{0.8, 0.3};
    const cplx q = m.context().q();
    const MatrixSeries a0 = graded(m).full_matrix();
    const CMatrix A0 = eval(a0, a).value;
    for (const auto& sp : singular_locus(m).points) {
      AlienOptions o;
      o.c0 = default_c0(m, a);
      const cplx xi = sp.point.lift();
      const CMatrix d1 = alien_derivation(m, xi, a, o).matrix.value;
      const CMatrix d2 = alien_derivation(m, xi, q * a, o).matrix.value;
      const CMatrix expect = A0 * d1 * A0.inverse();
      CHECK(max_abs(d2 - expect) < 1e-7 * (1.0 + max_abs(expect)));
    }
  }
}

TEST_CASE("reference direction: irrelevant for one level, level-one blocks for several") {
  const ModuleSpec m = delta2();
  for (const auto& sp : singular_locus(m).points) {
    AlienOptions o1, o2;
    o1.c0 = cplx{1.1, 1.0};
    o2.c0 = cplx{-1.6, -0.4};
    const CMatrix d1 = alien_derivation(m, sp.point.lift(), 1.0, o1).matrix.value;
    const CMatrix d2 = alien_derivation(m, sp.point.lift(), 1.0, o2).matrix.value;
    CHECK(max_abs(d1 - d2) < 1e-8 * (1.0 + max_abs(d1)));
  }
  const ModuleSpec t = fixtures::two_level();
  for (const auto& sp : singular_locus(t).points) {
    AlienOptions o1, o2;
    o1.c0 = std::polar(1.4, 1.2);
    o2.c0 = std::polar(1.4, -1.2);
    const AlienDerivation d1 = alien_derivation(t, sp.point.lift(), 1.0, o1);
    const AlienDerivation d2 = alien_derivation(t, sp.point.lift(), 1.0, o2);
    const auto l1 = level_decompose(d1), l2 = level_decompose(d2);
    CHECK(max_abs(l1.at(1).value - l2.at(1).value) < 1e-8 * (1.0 + max_abs(l1.at(1).value)));
  }
}

TEST_CASE("level decomposition of a three-slope module") {
  const ModuleSpec t = fixtures::two_level();
  const AlienDerivation d = alien_derivation(t, singular_locus(t).points.front().point.lift(), 1.0);
  const auto levels = level_decompose(d);
  std::vector<int> keys;
  for (const auto& [k, v] : levels) keys.push_back(k);
  CHECK(keys == std::vector<int>{1, 2, 3});
  CMatrix sum = CMatrix::Zero(3, 3);
  for (const auto& [k, v] : levels) sum += v.value;
  CHECK(max_abs(sum - d.matrix.value) == 0.0);
  CHECK(max_abs(levels.at(1).block(0, 2)) == 0.0);
  CHECK(max_abs(levels.at(3).block(0, 1)) == 0.0);
}

TEST_CASE("contour radius and preconditions") {
  const ModuleSpec m = fixtures::rank1(3.0, 2.0, 1.0, 3.0);
  const AlienDerivation base = alien_derivation(m, 2.0, 1.0);
  AlienOptions big;
  big.rho = 100.0;
  CHECK(alien_derivation(m, 2.0, 1.0, big).rho == base.rho);
  AlienOptions small;
  small.rho = 1e-3;
  const AlienDerivation ds = alien_derivation(m, 2.0, 1.0, small);
  CHECK(ds.rho == 1e-3);
  CHECK(std::abs(ds.matrix.value(0, 1) - base.matrix.value(0, 1)) < 1e-8 * std::abs(base.matrix.value(0, 1)));
  AlienOptions tiny;
  tiny.rho = 1e-12;
  CHECK_THROWS_AS(alien_derivation(m, 2.0, 1.0, tiny), PreconditionError);
  CHECK_THROWS_AS(alien_derivation(m, 2.0, -2.0), PreconditionError);
  AlienOptions inside;
  inside.c0 = cplx{2.0 + 1e-3, 0.0};
  CHECK_THROWS_AS(alien_derivation(m, 2.0, 1.0, inside), PreconditionError);
  AlienOptions closed;
  closed.method = AlienMethod::ClosedForm;
  CHECK_THROWS_AS(alien_derivation(fixtures::two_level(), 1.3, 1.0, closed), PreconditionError);
}

TEST_CASE("default directions and basepoint") {
  for (const auto& m : {delta2(), fixtures::two_level(), fixtures::tschakaloff(2.0)}) {
    const cplx c0 = default_c0(m, 1.0);
    CHECK(singular_locus(m).distance(EllipticPoint(m.context(), c0)) >= 0.05);
    CHECK(default_c0(m, 1.0) == c0);
  }
  const QContext ctx(cplx{2.0, 0.0});
  bool nudged = true;
  CHECK(default_basepoint(ctx, {cplx{1.5, 0.0}}, &nudged) == cplx{1.0, 0.0});
  CHECK(!nudged);
  const cplx b = default_basepoint(ctx, {cplx{-1.0, 0.0}}, &nudged);
  CHECK(nudged);
  CHECK(std::abs(b - cplx{1.0 + 1.0 / 7.0, 0.0}) < 1e-15);
}

TEST_CASE("tensor products: summation and alien derivations are compatible") {
  const ModuleSpec r = fixtures::rank1(3.0, 2.0, 1.0, 3.0);
  const ModuleSpec s = fixtures::one_level(3.0, 1, scalar(cplx{1.2, 0.5}), scalar(1.0), {scalar(cplx{0.4, -1.0})});
  const cplx c{1.1, 1.7}, a{0.9, 0.25};
  CHECK(tensor_compatibility_check(r, s, c, a) < 1e-9);
  const TensorProduct t = tensor(r, s);
  const cplx c0 = default_c0(t.module, a);
  for (const auto& sp : singular_locus(t.module).points)
    CHECK(tensor_alien_residual(r, s, sp.point.lift(), a, c0) < 1e-7);
}

TEST_CASE("contour and closed form agree at every singular lift") {
  const PhiAReport rep = phi_a_compare(delta2(), 1.0);
  CHECK(rep.points.size() == singular_locus(delta2()).points.size());
  CHECK(rep.max_deviation < 1e-7);
  for (const auto& p : rep.points) {
    if (max_abs(p.literal) == 0.0) continue;
    CHECK(p.literal_spread < 1e-8);
    CHECK(std::abs(p.literal_ratio - std::pow(2.0 * p.xi, 2)) < 1e-8 * std::abs(p.literal_ratio));
  }
  CHECK(residue_deviation(scalar(1e-14), scalar(-1e-14)) < 1e-13);
  CHECK(residue_deviation(scalar(1.0), scalar(1.0 + 1e-9)) < 2e-9);
}
