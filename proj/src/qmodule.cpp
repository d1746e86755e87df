#include "qdiff/qmodule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

#include "qdiff/errors.hpp"
#include "qdiff/linalg.hpp"

namespace qdiff {

// ---------------------------------------------------------------------------
// EllipticPoint

EllipticPoint::EllipticPoint(const QContext& ctx, cplx z) : ctx_(ctx) {
  if (z == cplx{0.0, 0.0} || !std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw ValidationError("EllipticPoint: lift must be a finite nonzero complex number");
  int m = static_cast<int>(std::floor(std::log(std::abs(z)) / ctx.log_abs_q()));
  cplx c = z * ctx.qpow(-m);
  while (std::abs(c) < 1.0) {
    c *= ctx.q();
    --m;
  }
  while (std::abs(c) >= ctx.abs_q()) {
    c *= ctx.q_inv();
    ++m;
  }
  lift_ = c;
  power_ = -m;
}

double EllipticPoint::distance(const EllipticPoint& other) const {
  double best = std::numeric_limits<double>::infinity();
  for (int e = -1; e <= 1; ++e)
    best = std::min(best, std::abs(lift_ - other.lift_ * ctx_.qpow(e)) / std::abs(lift_));
  return best;
}

// ---------------------------------------------------------------------------
// Layout and Laurent polynomial helpers

BlockLayout::BlockLayout(std::vector<int> s) : sizes(std::move(s)) {
  for (int n : sizes) {
    offsets.push_back(total);
    total += n;
  }
}

MatrixSeries zero_poly(int rows, int cols) {
  MatrixSeries z = MatrixSeries::polynomial(rows, cols, {0, 0});
  return z;
}

MatrixSeries poly_mul(const MatrixSeries& a, const MatrixSeries& b) {
  if (a.cols() != b.rows()) throw ValidationError("poly_mul: inner dimension mismatch");
  const auto sa = a.support(), sb = b.support();
  if (!sa || !sb) return zero_poly(a.rows(), b.cols());
  const MatrixSeries ra = a.restricted(*sa), rb = b.restricted(*sb);
  MatrixSeries ca = ra, cb = rb;
  ca.set_closed(true, true);
  cb.set_closed(true, true);
  MatrixSeries out = mul(ca, cb, {sa->lo + sb->lo, sa->hi + sb->hi}).series;
  out.set_growth_tag(GrowthTag::convergent());
  out.set_closed(true, true);
  return out;
}

MatrixSeries poly_add(const MatrixSeries& a, const MatrixSeries& b) {
  MatrixSeries out = add(a, b);
  out.set_growth_tag(GrowthTag::convergent());
  out.set_closed(true, true);
  return out;
}

namespace {

MatrixSeries poly_kron(const MatrixSeries& a, const MatrixSeries& b) {
  const auto sa = a.support(), sb = b.support();
  const int rows = a.rows() * b.rows(), cols = a.cols() * b.cols();
  if (!sa || !sb) return zero_poly(rows, cols);
  MatrixSeries out = MatrixSeries::polynomial(rows, cols, {sa->lo + sb->lo, sa->hi + sb->hi});
  for (int m = sa->lo; m <= sa->hi; ++m) {
    const CMatrix x = a.coeff(m);
    if (x.isZero(0.0)) continue;
    for (int n = sb->lo; n <= sb->hi; ++n) {
      const CMatrix y = b.coeff(n);
      if (y.isZero(0.0)) continue;
      out.coeff_ref(m + n) += linalg::kron(x, y);
    }
  }
  return out;
}

MatrixSeries monomial_matrix(const CMatrix& m, int degree) {
  MatrixSeries s = MatrixSeries::polynomial(static_cast<int>(m.rows()), static_cast<int>(m.cols()),
                                            {degree, degree});
  s.set_coeff(degree, m);
  return s;
}

std::string key_name(int i, int j) {
  std::ostringstream os;
  os << "U[" << i + 1 << "," << j + 1 << "]";
  return os.str();
}

bool invertible(const CMatrix& m) {
  if (m.rows() == 0 || m.rows() != m.cols()) return false;
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1) > 1e-13 * std::max(1.0, sv(0));
}

}  // namespace

CMatrix unipotent_at(const BlockLayout& layout, const BlockMap& blocks, cplx z) {
  CMatrix out = CMatrix::Identity(layout.total, layout.total);
  for (const auto& [key, s] : blocks) {
    const auto [i, j] = key;
    out.block(layout.offsets[static_cast<std::size_t>(i)], layout.offsets[static_cast<std::size_t>(j)],
              layout.sizes[static_cast<std::size_t>(i)], layout.sizes[static_cast<std::size_t>(j)]) =
        eval(s, z).value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// ModuleSpec

ModuleSpec::ModuleSpec(QContext ctx, std::vector<int> slopes, std::vector<CMatrix> blocks,
                       BlockMap upper)
    : ctx_(ctx), slopes_(std::move(slopes)), blocks_(std::move(blocks)) {
  if (slopes_.empty()) throw ValidationError("module needs at least one slope block");
  if (slopes_.size() != blocks_.size())
    throw ValidationError("number of slopes and diagonal blocks differ");
  for (std::size_t i = 1; i < slopes_.size(); ++i)
    if (slopes_[i] < slopes_[i - 1]) throw ValidationError("slopes must be non-decreasing");
  std::vector<int> sizes;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (!invertible(blocks_[i])) {
      std::ostringstream os;
      os << "blocks[" << i + 1 << "] must be square and invertible";
      throw ValidationError(os.str());
    }
    sizes.push_back(static_cast<int>(blocks_[i].rows()));
  }
  layout_ = BlockLayout(sizes);

  for (const auto& [key, s] : upper) {
    const auto [i, j] = key;
    if (i < 0 || j >= k() || i >= j)
      throw ValidationError(key_name(i, j) + ": block index must satisfy 1 <= i < j <= k");
    if (s.rows() != rank(i) || s.cols() != rank(j))
      throw ValidationError(key_name(i, j) + ": shape must be r_i x r_j");
    const auto sup = s.support();
    if (!sup) continue;
    const int lo = slope(i), hi = slope(j) - 1;
    if (sup->lo < lo || sup->hi > hi) {
      std::ostringstream os;
      os << key_name(i, j) << ": degrees must lie in [" << lo << ", " << slope(j)
         << ") (Birkhoff-Guenther support), found degree " << (sup->lo < lo ? sup->lo : sup->hi);
      throw ValidationError(os.str());
    }
    MatrixSeries stored = MatrixSeries::polynomial(rank(i), rank(j), {lo, hi});
    for (int n = lo; n <= hi; ++n) stored.set_coeff(n, s.coeff(n));
    upper_.emplace(key, std::move(stored));
  }
}

std::vector<int> ModuleSpec::ranks() const { return layout_.sizes; }

MatrixSeries ModuleSpec::U(int i, int j) const {
  auto it = upper_.find({i, j});
  if (it != upper_.end()) return it->second;
  return zero_poly(rank(i), rank(j));
}

MatrixSeries ModuleSpec::full_matrix() const {
  int lo = slopes_.front(), hi = slopes_.back();
  MatrixSeries out = MatrixSeries::polynomial(total_rank(), total_rank(), {lo, hi});
  for (int i = 0; i < k(); ++i)
    out.coeff_ref(slope(i)).block(layout_.offsets[i], layout_.offsets[i], rank(i), rank(i)) = block(i);
  for (const auto& [key, s] : upper_) {
    const auto [i, j] = key;
    for (int n = s.window().lo; n <= s.window().hi; ++n)
      out.coeff_ref(n).block(layout_.offsets[i], layout_.offsets[j], rank(i), rank(j)) = s.coeff(n);
  }
  return out;
}

NewtonData newton(const ModuleSpec& m) {
  NewtonData out;
  for (int i = 0; i < m.k(); ++i) out[m.slope(i)] += m.rank(i);
  return out;
}

ModuleSpec graded(const ModuleSpec& m) { return ModuleSpec(m.context(), m.slopes(), m.blocks()); }

// ---------------------------------------------------------------------------
// Singular locus

bool SingularLocus::contains(const EllipticPoint& c, double rel) const {
  return distance(c) <= rel;
}

double SingularLocus::distance(const EllipticPoint& c) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points) best = std::min(best, p.point.distance(c));
  return best;
}

namespace {

std::vector<cplx> distinct_eigenvalues(const CMatrix& a, double radius) {
  std::vector<cplx> out;
  for (const auto& c : linalg::cluster_eigenvalues(a, radius)) out.push_back(c.center);
  return out;
}

bool in_q_lattice(const QContext& ctx, cplx ratio, double rel) {
  const EllipticPoint p(ctx, ratio);
  const EllipticPoint one(ctx, 1.0);
  return p.distance(one) <= rel;
}

}  // namespace

void check_equal_slope_resonance(const ModuleSpec& m) {
  const QContext& ctx = m.context();
  for (int i = 0; i < m.k(); ++i)
    for (int j = i + 1; j < m.k(); ++j) {
      if (m.slope(i) != m.slope(j)) continue;
      for (cplx a : distinct_eigenvalues(m.block(i), ctx.sqrt_tol()))
        for (cplx b : distinct_eigenvalues(m.block(j), ctx.sqrt_tol()))
          if (in_q_lattice(ctx, a / b, ctx.sqrt_tol())) {
            std::ostringstream os;
            os << "resonance: blocks " << i + 1 << " and " << j + 1 << " share slope " << m.slope(i)
               << " and have eigenvalues " << a << ", " << b
               << " congruent modulo q^Z (nonresonance condition violated)";
            throw ResonanceError(os.str());
          }
    }
}

SingularLocus singular_locus(const ModuleSpec& m0) {
  check_equal_slope_resonance(m0);
  const QContext& ctx = m0.context();
  const double dedupe = std::max(1e-9, 100.0 * ctx.tol());
  SingularLocus locus;
  for (int i = 0; i < m0.k(); ++i)
    for (int j = i + 1; j < m0.k(); ++j) {
      const int delta = m0.slope(j) - m0.slope(i);
      if (delta == 0) continue;
      for (cplx alpha : distinct_eigenvalues(m0.block(i), ctx.sqrt_tol()))
        for (cplx beta : distinct_eigenvalues(m0.block(j), ctx.sqrt_tol()))
          for (int mq = 0; mq < delta; ++mq) {
            const cplx base = std::pow((alpha / beta) * ctx.qpow(mq), 1.0 / delta);
            for (int r = 0; r < delta; ++r) {
              const cplx zeta = std::polar(1.0, 2.0 * kPi * r / delta);
              SingularPoint sp{EllipticPoint(ctx, zeta * base), i, j, alpha, beta, r, mq};
              if (locus.contains(sp.point, dedupe)) continue;
              locus.points.push_back(sp);
            }
          }
    }
  return locus;
}

// ---------------------------------------------------------------------------
// Renormalization

Renormalized renormalize(const QContext& ctx, const std::vector<int>& slopes,
                         const std::vector<CMatrix>& blocks, const BlockMap& raw_upper) {
  const int k = static_cast<int>(slopes.size());
  BlockMap A;
  for (const auto& [key, s] : raw_upper)
    if (s.support()) A.emplace(key, s);
  BlockMap G;

  for (int d = 1; d < k; ++d) {
    for (int i = 0; i + d < k; ++i) {
      const int j = i + d;
      auto it = A.find({i, j});
      if (it == A.end()) continue;
      const int mu_i = slopes[static_cast<std::size_t>(i)], mu_j = slopes[static_cast<std::size_t>(j)];
      const CMatrix& Ai = blocks[static_cast<std::size_t>(i)];
      const CMatrix& Aj = blocks[static_cast<std::size_t>(j)];
      const auto sup = it->second.support();
      if (!sup) continue;
      if (mu_i == mu_j)
        throw ValidationError(key_name(i, j) + ": nonzero block between equal slopes");

      std::map<int, CMatrix> W;
      for (int n = sup->lo; n <= sup->hi; ++n) W[n] = it->second.coeff(n);
      const int rows = static_cast<int>(Ai.rows()), cols = static_cast<int>(Aj.rows());
      auto at = [&](int n) -> CMatrix& {
        auto f = W.find(n);
        if (f == W.end()) f = W.emplace(n, CMatrix::Zero(rows, cols)).first;
        return f->second;
      };
      std::map<int, CMatrix> g;
      auto gadd = [&](int p, const CMatrix& x) {
        auto f = g.find(p);
        if (f == g.end()) g.emplace(p, x);
        else f->second += x;
      };
      const CMatrix Aj_inv = Aj.inverse(), Ai_inv = Ai.inverse();
      // Degrees >= mu_j: g_p = -q^{-p} W_n A_j^{-1}, p = n - mu_j; feeds degree n - delta.
      for (int n = W.rbegin()->first; n >= mu_j; --n) {
        auto f = W.find(n);
        if (f == W.end() || f->second.isZero(0.0)) continue;
        const int p = n - mu_j;
        const CMatrix X = -ctx.qpow(-p) * f->second * Aj_inv;
        gadd(p, X);
        f->second.setZero();
        at(p + mu_i) -= Ai * X;
      }
      // Degrees < mu_i: g_p = A_i^{-1} W_n, p = n - mu_i; feeds degree n + delta.
      for (int n = W.begin()->first; n < mu_i; ++n) {
        auto f = W.find(n);
        if (f == W.end() || f->second.isZero(0.0)) continue;
        const int p = n - mu_i;
        const CMatrix X = Ai_inv * f->second;
        gadd(p, X);
        f->second.setZero();
        at(p + mu_j) += ctx.qpow(p) * X * Aj;
      }
      if (g.empty()) continue;

      MatrixSeries canon = MatrixSeries::polynomial(rows, cols, {mu_i, mu_j - 1});
      for (int n = mu_i; n < mu_j; ++n)
        if (W.count(n)) canon.set_coeff(n, W[n]);
      MatrixSeries gs = MatrixSeries::polynomial(rows, cols, {g.begin()->first, g.rbegin()->first});
      for (const auto& [p, x] : g) gs.set_coeff(p, x);
      const MatrixSeries sgs = sigma_q(ctx, gs);

      // A <- sigma_q(E) A E^{-1} with E = I + g e_ij.
      for (int l = j + 1; l < k; ++l) {
        auto jl = A.find({j, l});
        if (jl == A.end()) continue;
        MatrixSeries term = poly_mul(sgs, jl->second);
        auto il = A.find({i, l});
        if (il == A.end()) A.emplace(BlockKey{i, l}, term);
        else il->second = poly_add(il->second, term);
      }
      for (int m = 0; m < i; ++m) {
        auto mi = A.find({m, i});
        if (mi == A.end()) continue;
        MatrixSeries term = scale(poly_mul(mi->second, gs), -1.0);
        auto mj = A.find({m, j});
        if (mj == A.end()) A.emplace(BlockKey{m, j}, term);
        else mj->second = poly_add(mj->second, term);
      }
      it = A.find({i, j});
      it->second = canon;

      // G <- E G
      for (int l = j + 1; l < k; ++l) {
        auto jl = G.find({j, l});
        if (jl == G.end()) continue;
        MatrixSeries term = poly_mul(gs, jl->second);
        auto il = G.find({i, l});
        if (il == G.end()) G.emplace(BlockKey{i, l}, term);
        else il->second = poly_add(il->second, term);
      }
      auto ij = G.find({i, j});
      if (ij == G.end()) G.emplace(BlockKey{i, j}, gs);
      else ij->second = poly_add(ij->second, gs);
    }
  }
  return {ModuleSpec(ctx, slopes, blocks, A), G};
}

// ---------------------------------------------------------------------------
// Eigenvalue normalization

EigenNormalization normalize_eigenvalues(const ModuleSpec& m) {
  const QContext& ctx = m.context();
  const int k = m.k();
  std::vector<std::vector<int>> powers(static_cast<std::size_t>(k));
  std::vector<CMatrix> bases, new_blocks;
  std::vector<std::vector<int>> cluster_sizes(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const CMatrix& A = m.block(i);
    const auto clusters = linalg::cluster_eigenvalues(A, ctx.sqrt_tol());
    CMatrix P(A.rows(), 0);
    for (const auto& cl : clusters) {
      const CMatrix basis = linalg::range_basis(linalg::spectral_projector(A, cl.center, ctx.sqrt_tol()));
      CMatrix grown(A.rows(), P.cols() + basis.cols());
      grown << P, basis;
      P = grown;
      powers[static_cast<std::size_t>(i)].push_back(EllipticPoint(ctx, cl.center).reduction_power());
      cluster_sizes[static_cast<std::size_t>(i)].push_back(static_cast<int>(basis.cols()));
    }
    if (P.cols() != A.rows()) throw NumericalError("normalize_eigenvalues: characteristic subspaces do not span");
    CMatrix D = P.inverse() * A * P;
    int off = 0;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const int sz = cluster_sizes[static_cast<std::size_t>(i)][c];
      D.middleRows(off, sz) *= ctx.qpow(powers[static_cast<std::size_t>(i)][c]);
      off += sz;
    }
    // Off-cluster entries vanish up to rounding; keep the block diagonal structure exact.
    off = 0;
    CMatrix Dc = CMatrix::Zero(D.rows(), D.cols());
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const int sz = cluster_sizes[static_cast<std::size_t>(i)][c];
      Dc.block(off, off, sz, sz) = D.block(off, off, sz, sz);
      off += sz;
    }
    bases.push_back(P);
    new_blocks.push_back(Dc);
  }

  BlockMap raw;
  for (const auto& [key, s] : m.upper()) {
    const auto [i, j] = key;
    const CMatrix Pi_inv = bases[static_cast<std::size_t>(i)].inverse();
    const CMatrix& Pj = bases[static_cast<std::size_t>(j)];
    const auto& pi = powers[static_cast<std::size_t>(i)];
    const auto& pj = powers[static_cast<std::size_t>(j)];
    const auto& si = cluster_sizes[static_cast<std::size_t>(i)];
    const auto& sj = cluster_sizes[static_cast<std::size_t>(j)];
    const MatrixSeries conj = right_mul(left_mul(Pi_inv, s), Pj);
    MatrixSeries acc = zero_poly(s.rows(), s.cols());
    int oa = 0;
    for (std::size_t a = 0; a < si.size(); ++a) {
      int ob = 0;
      for (std::size_t b = 0; b < sj.size(); ++b) {
        MatrixSeries part = MatrixSeries::polynomial(s.rows(), s.cols(), conj.window());
        for (int n = conj.window().lo; n <= conj.window().hi; ++n) {
          CMatrix c = CMatrix::Zero(s.rows(), s.cols());
          c.block(oa, ob, si[a], sj[b]) = conj.coeff(n).block(oa, ob, si[a], sj[b]) * ctx.qpow(pi[a]);
          part.set_coeff(n, c);
        }
        acc = poly_add(acc, shift(part, pi[a] - pj[b]));
        ob += sj[b];
      }
      oa += si[a];
    }
    raw.emplace(key, acc);
  }
  Renormalized r = renormalize(ctx, m.slopes(), new_blocks, raw);
  return {std::move(r.module), std::move(powers), std::move(bases)};
}

// ---------------------------------------------------------------------------
// Tensor product

TensorProduct tensor(const ModuleSpec& m, const ModuleSpec& n) {
  if (std::abs(m.context().q() - n.context().q()) > 0.0)
    throw ValidationError("tensor: modules must share q");
  const QContext& ctx = m.context();
  struct Pair {
    int i, j, slope;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < m.k(); ++i)
    for (int j = 0; j < n.k(); ++j) pairs.push_back({i, j, m.slope(i) + n.slope(j)});
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.slope < b.slope; });

  std::vector<std::vector<Pair>> groups;
  for (const auto& p : pairs) {
    if (groups.empty() || groups.back().front().slope != p.slope) groups.emplace_back();
    groups.back().push_back(p);
  }

  const int nb = n.total_rank();
  std::vector<int> slopes, position;
  std::vector<CMatrix> blocks;
  std::vector<std::vector<int>> local_offset(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    int size = 0;
    for (const auto& p : groups[g]) {
      local_offset[g].push_back(size);
      size += m.rank(p.i) * n.rank(p.j);
    }
    CMatrix D = CMatrix::Zero(size, size);
    for (std::size_t t = 0; t < groups[g].size(); ++t) {
      const auto& p = groups[g][t];
      const int sz = m.rank(p.i) * n.rank(p.j);
      D.block(local_offset[g][t], local_offset[g][t], sz, sz) = linalg::kron(m.block(p.i), n.block(p.j));
      for (int a = 0; a < m.rank(p.i); ++a)
        for (int b = 0; b < n.rank(p.j); ++b)
          position.push_back((m.layout().offsets[p.i] + a) * nb + n.layout().offsets[p.j] + b);
    }
    slopes.push_back(groups[g].front().slope);
    blocks.push_back(D);
  }

  auto entry = [](const ModuleSpec& s, int i, int i2) -> std::optional<MatrixSeries> {
    if (i == i2) return monomial_matrix(s.block(i), s.slope(i));
    if (i < i2) {
      auto it = s.upper().find({i, i2});
      if (it != s.upper().end()) return it->second;
    }
    return std::nullopt;
  };

  BlockMap raw;
  for (std::size_t g1 = 0; g1 < groups.size(); ++g1)
    for (std::size_t g2 = g1 + 1; g2 < groups.size(); ++g2) {
      const int rows = static_cast<int>(blocks[g1].rows()), cols = static_cast<int>(blocks[g2].rows());
      MatrixSeries acc = zero_poly(rows, cols);
      bool any = false;
      for (std::size_t t1 = 0; t1 < groups[g1].size(); ++t1)
        for (std::size_t t2 = 0; t2 < groups[g2].size(); ++t2) {
          const auto& p1 = groups[g1][t1];
          const auto& p2 = groups[g2][t2];
          const auto ea = entry(m, p1.i, p2.i);
          const auto eb = entry(n, p1.j, p2.j);
          if (!ea || !eb) continue;
          const MatrixSeries kr = poly_kron(*ea, *eb);
          const auto sup = kr.support();
          if (!sup) continue;
          MatrixSeries placed = MatrixSeries::polynomial(rows, cols, *sup);
          for (int d = sup->lo; d <= sup->hi; ++d)
            placed.coeff_ref(d).block(local_offset[g1][t1], local_offset[g2][t2], kr.rows(), kr.cols()) =
                kr.coeff(d);
          acc = poly_add(acc, placed);
          any = true;
        }
      if (any) raw.emplace(BlockKey{static_cast<int>(g1), static_cast<int>(g2)}, acc);
    }

  Renormalized r = renormalize(ctx, slopes, blocks, raw);
  return {std::move(r.module), std::move(position), std::move(r.gauge)};
}

}  // namespace qdiff
