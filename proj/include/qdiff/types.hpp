#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace qdiff {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace qdiff
