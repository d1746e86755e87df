#include "qdiff/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "qdiff/errors.hpp"

namespace qdiff::linalg {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CVector vec(const CMatrix& m) {
  return Eigen::Map<const CVector>(m.data(), m.size());
}

CMatrix unvec(const CVector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const CMatrix>(v.data(), rows, cols);
}

CMatrix solve_sylvester(const CMatrix& b, const CMatrix& c, const CMatrix& v, double rel_tol) {
  const Eigen::Index r = c.rows(), s = b.rows();
  if (v.rows() != r || v.cols() != s) throw ValidationError("solve_sylvester: shape mismatch");
  // vec(XB - CX) = (B^T (x) I_r - I_s (x) C) vec X
  const CMatrix op = kron(b.transpose(), CMatrix::Identity(r, r)) -
                     kron(CMatrix::Identity(s, s), c);
  Eigen::JacobiSVD<CMatrix> svd(op, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return CMatrix::Zero(r, s);
  if (sv(sv.size() - 1) <= rel_tol * sv(0))
    throw ResonanceError("Sylvester operator X -> XB - CX is singular: spectra of B and C meet");
  return unvec(svd.solve(vec(v)), r, s);
}

std::vector<EigenCluster> cluster_eigenvalues(const CMatrix& m, double radius) {
  Eigen::ComplexEigenSolver<CMatrix> es(m, false);
  std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  const std::size_t n = ev.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(ev[i] - ev[j]) <= radius) parent[find(i)] = find(j);

  std::vector<EigenCluster> out;
  std::vector<std::size_t> root_of;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    auto it = std::find(root_of.begin(), root_of.end(), r);
    if (it == root_of.end()) {
      root_of.push_back(r);
      out.push_back({ev[i], 1});
    } else {
      auto& cl = out[static_cast<std::size_t>(it - root_of.begin())];
      cl.center += ev[i];
      ++cl.multiplicity;
    }
  }
  for (auto& cl : out) cl.center /= static_cast<double>(cl.multiplicity);
  // Deterministic order: by real part, then imaginary part.
  std::sort(out.begin(), out.end(), [](const EigenCluster& a, const EigenCluster& b) {
    if (a.center.real() != b.center.real()) return a.center.real() < b.center.real();
    return a.center.imag() < b.center.imag();
  });
  return out;
}

namespace {

// Hermite interpolation in Newton form on nodes repeated by multiplicity.
CMatrix hermite_apply(const CMatrix& m, const std::vector<EigenCluster>& clusters,
                      const TaylorFn& f) {
  std::vector<cplx> nodes;
  std::vector<std::size_t> owner;
  std::vector<std::vector<cplx>> taylor;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    taylor.push_back(f(clusters[c].center, clusters[c].multiplicity));
    for (int k = 0; k < clusters[c].multiplicity; ++k) {
      nodes.push_back(clusters[c].center);
      owner.push_back(c);
    }
  }
  const std::size_t n = nodes.size();
  // dd[i][j] = f[x_i, ..., x_j]
  std::vector<std::vector<cplx>> dd(n, std::vector<cplx>(n));
  for (std::size_t len = 0; len < n; ++len) {
    for (std::size_t i = 0; i + len < n; ++i) {
      const std::size_t j = i + len;
      if (owner[i] == owner[j]) {
        dd[i][j] = taylor[owner[i]][len];
      } else {
        dd[i][j] = (dd[i + 1][j] - dd[i][j - 1]) / (nodes[j] - nodes[i]);
      }
    }
  }
  const Eigen::Index dim = m.rows();
  const CMatrix id = CMatrix::Identity(dim, dim);
  CMatrix result = CMatrix::Zero(dim, dim);
  CMatrix basis = id;
  for (std::size_t k = 0; k < n; ++k) {
    result += dd[0][k] * basis;
    basis = basis * (m - nodes[k] * id);
  }
  return result;
}

}  // namespace

CMatrix matrix_function(const CMatrix& m, const TaylorFn& f, double cluster_radius) {
  if (m.rows() != m.cols()) throw ValidationError("matrix_function: matrix must be square");
  if (m.rows() == 0) return m;
  const auto clusters = cluster_eigenvalues(m, cluster_radius);
  const bool simple = std::all_of(clusters.begin(), clusters.end(),
                                  [](const EigenCluster& c) { return c.multiplicity == 1; });
  if (simple) {
    Eigen::ComplexEigenSolver<CMatrix> es(m);
    const CMatrix& vecs = es.eigenvectors();
    Eigen::JacobiSVD<CMatrix> svd(vecs);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) > 1e-8 * sv(0)) {
      CVector fd(m.rows());
      for (Eigen::Index i = 0; i < m.rows(); ++i) fd(i) = f(es.eigenvalues()(i), 1)[0];
      return vecs * fd.asDiagonal() * vecs.inverse();
    }
  }
  return hermite_apply(m, clusters, f);
}

CMatrix spectral_projector(const CMatrix& m, cplx lambda, double cluster_radius) {
  const auto clusters = cluster_eigenvalues(m, cluster_radius);
  std::size_t target = clusters.size();
  double best = 0.0;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const double d = std::abs(clusters[c].center - lambda);
    if (target == clusters.size() || d < best) {
      target = c;
      best = d;
    }
  }
  if (target == clusters.size() || best > cluster_radius * std::max(1.0, std::abs(lambda)) * 10.0)
    return CMatrix::Zero(m.rows(), m.cols());
  const cplx center = clusters[target].center;
  return hermite_apply(m, clusters, [&](cplx x, int order) {
    std::vector<cplx> t(static_cast<std::size_t>(order), 0.0);
    if (x == center) t[0] = 1.0;
    return t;
  });
}

Dunford dunford(const CMatrix& m, double cluster_radius) {
  const auto clusters = cluster_eigenvalues(m, cluster_radius);
  CMatrix s = CMatrix::Zero(m.rows(), m.cols());
  for (const auto& cl : clusters) {
    s += cl.center * hermite_apply(m, clusters, [&](cplx x, int order) {
           std::vector<cplx> t(static_cast<std::size_t>(order), 0.0);
           if (x == cl.center) t[0] = 1.0;
           return t;
         });
  }
  for (const auto& cl : clusters)
    if (std::abs(cl.center) == 0.0) throw PreconditionError("dunford: matrix is singular");
  CMatrix u = s.inverse() * m;
  return {s, u};
}

CMatrix unipotent_root(const CMatrix& u, int d) {
  if (d < 1) throw ValidationError("unipotent_root: d must be >= 1");
  const Eigen::Index n = u.rows();
  const CMatrix id = CMatrix::Identity(n, n);
  const CMatrix nil = u - id;
  CMatrix result = id;
  CMatrix power = id;
  double binom = 1.0;
  const double alpha = 1.0 / d;
  for (Eigen::Index k = 1; k <= n; ++k) {
    binom *= (alpha - static_cast<double>(k - 1)) / static_cast<double>(k);
    power = power * nil;
    result += binom * power;
  }
  return result;
}

CMatrix principal_root(const CMatrix& m, int d, double cluster_radius) {
  if (d == 1) return m;
  const auto clusters = cluster_eigenvalues(m, cluster_radius);
  CMatrix s_root = CMatrix::Zero(m.rows(), m.cols());
  for (const auto& cl : clusters) {
    s_root += std::pow(cl.center, 1.0 / d) * hermite_apply(m, clusters, [&](cplx x, int order) {
                std::vector<cplx> t(static_cast<std::size_t>(order), 0.0);
                if (x == cl.center) t[0] = 1.0;
                return t;
              });
  }
  const Dunford dn = dunford(m, cluster_radius);
  return s_root * unipotent_root(dn.unipotent, d);
}

CMatrix range_basis(const CMatrix& projector, double rel_tol) {
  Eigen::JacobiSVD<CMatrix> svd(projector, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  const double top = sv.size() ? sv(0) : 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * std::max(top, 1.0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace qdiff::linalg
