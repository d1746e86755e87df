#include "qdiff/formal_gauge.hpp"

#include <algorithm>
#include <cmath>

#include "qdiff/errors.hpp"

namespace qdiff {

MatrixSeries GaugeMatrix::block(int i, int j) const {
  auto it = blocks.find({i, j});
  if (it != blocks.end()) return it->second;
  return zero_poly(layout.sizes[static_cast<std::size_t>(i)], layout.sizes[static_cast<std::size_t>(j)]);
}

CMatrix BlockMatrix::block(int i, int j) const {
  return value.block(layout.offsets[static_cast<std::size_t>(i)], layout.offsets[static_cast<std::size_t>(j)],
                     layout.sizes[static_cast<std::size_t>(i)], layout.sizes[static_cast<std::size_t>(j)]);
}

void BlockMatrix::set_block(int i, int j, const CMatrix& m) {
  value.block(layout.offsets[static_cast<std::size_t>(i)], layout.offsets[static_cast<std::size_t>(j)],
              layout.sizes[static_cast<std::size_t>(i)], layout.sizes[static_cast<std::size_t>(j)]) = m;
}

BlockMatrix BlockMatrix::identity(const BlockLayout& layout) {
  return {layout, CMatrix::Identity(layout.total, layout.total)};
}

BlockMatrix BlockMatrix::zero(const BlockLayout& layout) {
  return {layout, CMatrix::Zero(layout.total, layout.total)};
}

int default_formal_order(const ModuleSpec& m) {
  const int gap = m.slopes().back() - m.slopes().front();
  return std::clamp(4 * gap, 16, 200);
}

namespace {

bool finite(const CMatrix& m) { return m.allFinite(); }

}  // namespace

GaugeMatrix formal_gauge(const ModuleSpec& m, int order) {
  const int gap = m.slopes().back() - m.slopes().front();
  if (order < gap) throw ValidationError("formal_gauge: order must be at least the largest slope gap");
  if (order < 0) throw ValidationError("formal_gauge: order must be >= 0");
  const QContext& ctx = m.context();
  GaugeMatrix out;
  out.kind = GaugeKind::Formal;
  out.layout = m.layout();
  int reliable_hi = order;

  for (int d = 1; d < m.k(); ++d)
    for (int i = 0; i + d < m.k(); ++i) {
      const int j = i + d;
      const int mu_i = m.slope(i), mu_j = m.slope(j), delta = mu_j - mu_i;
      const int ri = m.rank(i), rj = m.rank(j);
      // W = sum_{i<k<j} U_ik F_kj + U_ij, needed at degrees mu_i .. mu_i + order.
      std::vector<CMatrix> W(static_cast<std::size_t>(order + 1), CMatrix::Zero(ri, rj));
      bool any = false;
      auto accumulate = [&](const MatrixSeries& u, const MatrixSeries* f) {
        const auto su = u.support();
        if (!su) return;
        for (int deg = su->lo; deg <= su->hi; ++deg) {
          const CMatrix ud = u.coeff(deg);
          if (ud.isZero(0.0)) continue;
          for (int mm = 0; mm <= order; ++mm) {
            const int n = mm + mu_i;
            if (f == nullptr) {
              if (n == deg) W[static_cast<std::size_t>(mm)] += ud;
            } else {
              const int idx = n - deg;
              if (idx < 0 || idx > order) continue;
              W[static_cast<std::size_t>(mm)] += ud * f->coeff(idx);
            }
          }
          any = true;
        }
      };
      for (int k = i + 1; k < j; ++k) {
        auto fk = out.blocks.find({k, j});
        if (fk == out.blocks.end()) continue;
        accumulate(m.U(i, k), &fk->second);
      }
      accumulate(m.U(i, j), nullptr);
      if (!any) continue;
      if (delta == 0) throw ResonanceError("formal_gauge: coupling between equal slopes");

      const CMatrix Ai_inv = m.block(i).inverse();
      const CMatrix& Aj = m.block(j);
      MatrixSeries F(ri, rj, {0, order}, GrowthTag::q_gevrey(delta));
      F.set_closed(true, false);
      for (int mm = 0; mm <= order; ++mm) {
        CMatrix rhs = -W[static_cast<std::size_t>(mm)];
        if (mm - delta >= 0) rhs += ctx.qpow(mm - delta) * F.coeff(mm - delta) * Aj;
        const CMatrix fm = Ai_inv * rhs;
        F.set_coeff(mm, fm);
        if (!finite(fm) || fm.cwiseAbs().maxCoeff() > 1e300) reliable_hi = std::min(reliable_hi, mm - 1);
      }
      if (!F.is_zero()) out.blocks.emplace(BlockKey{i, j}, std::move(F));
    }
  out.reliable = {0, reliable_hi};
  if (reliable_hi < 0) throw NumericalError("formal_gauge: no finite coefficients");
  return out;
}

double verify_gauge(const ModuleSpec& m, const GaugeMatrix& f, int order) {
  const QContext& ctx = m.context();
  const int top = std::min(order, f.reliable.hi);
  double worst = 0.0;
  for (int i = 0; i < m.k(); ++i)
    for (int j = i + 1; j < m.k(); ++j) {
      const int mu_i = m.slope(i), mu_j = m.slope(j);
      const MatrixSeries F = f.block(i, j);
      const CMatrix& Ai = m.block(i);
      const CMatrix& Aj = m.block(j);
      const MatrixSeries Uij = m.U(i, j);
      for (int n = mu_i; n <= mu_i + top; ++n) {
        CMatrix r = CMatrix::Zero(m.rank(i), m.rank(j));
        double scale = 0.0;
        auto term = [&](const CMatrix& t, double sign) {
          r += sign * t;
          scale = std::max(scale, t.cwiseAbs().maxCoeff());
        };
        term(ctx.qpow(n - mu_j) * F.coeff(n - mu_j) * Aj, 1.0);
        term(Ai * F.coeff(n - mu_i), -1.0);
        for (int k = i + 1; k < j; ++k) {
          const MatrixSeries Uik = m.U(i, k);
          const MatrixSeries Fkj = f.block(k, j);
          CMatrix acc = CMatrix::Zero(m.rank(i), m.rank(j));
          for (int deg = Uik.window().lo; deg <= Uik.window().hi; ++deg) {
            const CMatrix u = Uik.coeff(deg);
            if (u.isZero(0.0)) continue;
            acc += u * Fkj.coeff(n - deg);
          }
          term(acc, -1.0);
        }
        term(Uij.coeff(n), -1.0);
        worst = std::max(worst, r.cwiseAbs().maxCoeff() / (1.0 + scale));
      }
    }
  return worst;
}

namespace {

void require_unipotent(const BlockMatrix& f) {
  const BlockLayout& L = f.layout;
  const double scale = std::max(1.0, f.value.cwiseAbs().maxCoeff());
  for (int i = 0; i < L.blocks(); ++i)
    for (int j = 0; j <= i; ++j) {
      CMatrix b = f.block(i, j);
      if (i == j) b -= CMatrix::Identity(b.rows(), b.cols());
      if (b.size() && b.cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw PreconditionError("log_unipotent: input is not block unipotent");
    }
}

}  // namespace

BlockMatrix log_unipotent(const BlockMatrix& f) {
  require_unipotent(f);
  const int n = f.layout.total;
  CMatrix N = f.value - CMatrix::Identity(n, n);
  // Structural zeros on and below the block diagonal.
  for (int i = 0; i < f.layout.blocks(); ++i)
    for (int j = 0; j <= i; ++j)
      N.block(f.layout.offsets[i], f.layout.offsets[j], f.layout.sizes[i], f.layout.sizes[j]).setZero();
  CMatrix acc = CMatrix::Zero(n, n);
  CMatrix power = N;
  for (int p = 1; p < f.layout.blocks(); ++p) {
    acc += ((p % 2 == 1) ? 1.0 : -1.0) / p * power;
    power = power * N;
  }
  return {f.layout, acc};
}

BlockMatrix exp_nilpotent(const BlockMatrix& nm) {
  const int n = nm.layout.total;
  CMatrix acc = CMatrix::Identity(n, n);
  CMatrix power = CMatrix::Identity(n, n);
  double fact = 1.0;
  for (int p = 1; p < std::max(2, nm.layout.blocks()); ++p) {
    power = power * nm.value;
    fact *= p;
    acc += power / fact;
  }
  return {nm.layout, acc};
}

}  // namespace qdiff
