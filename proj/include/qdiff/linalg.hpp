#pragma once

#include <functional>
#include <vector>

#include "qdiff/types.hpp"

namespace qdiff::linalg {

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Column-major vectorisation and its inverse.
CVector vec(const CMatrix& m);
CMatrix unvec(const CVector& v, Eigen::Index rows, Eigen::Index cols);

/// Solves X B - C X = V (the map X -> XB - CX is invertible iff Sp(B) and
/// Sp(C) are disjoint). Throws ResonanceError when the smallest singular
/// value of the Kronecker form falls below `rel_tol` times the largest.
CMatrix solve_sylvester(const CMatrix& b, const CMatrix& c, const CMatrix& v,
                        double rel_tol = 1e-12);

struct EigenCluster {
  cplx center;
  int multiplicity = 0;
};

/// Eigenvalues grouped by single-linkage within `radius`; center is the mean.
std::vector<EigenCluster> cluster_eigenvalues(const CMatrix& m, double radius);

/// Taylor coefficients f^(k)(x)/k!, k = 0..order-1.
using TaylorFn = std::function<std::vector<cplx>(cplx x, int order)>;

/// f(M) for f holomorphic near the spectrum. Diagonalizable input with
/// well-separated eigenvalues goes through the eigendecomposition; otherwise
/// Hermite interpolation on the clustered spectrum with derivative matching.
CMatrix matrix_function(const CMatrix& m, const TaylorFn& f, double cluster_radius);

/// Riesz projector onto the generalized eigenspace of the cluster containing
/// `lambda`.
CMatrix spectral_projector(const CMatrix& m, cplx lambda, double cluster_radius);

struct Dunford {
  CMatrix semisimple;
  CMatrix unipotent;  // semisimple * unipotent = m, and they commute
};
/// Multiplicative Dunford decomposition of an invertible matrix.
Dunford dunford(const CMatrix& m, double cluster_radius);

/// (I + N)^{1/d} by the binomial series, exact for nilpotent N.
CMatrix unipotent_root(const CMatrix& u, int d);

/// M^{1/d} = M_s^{1/d} M_u^{1/d}, principal branch on the eigenvalues.
CMatrix principal_root(const CMatrix& m, int d, double cluster_radius);

/// Orthonormal basis of the column space of a projector (rank by SVD).
CMatrix range_basis(const CMatrix& projector, double rel_tol = 1e-8);

double max_abs(const CMatrix& m);

}  // namespace qdiff::linalg
