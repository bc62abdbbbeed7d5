#pragma once

#include <complex>
#include <cstdint>
#include <Eigen/Dense>

namespace qgraph {

using cplx = std::complex<double>;

using MatC = Eigen::MatrixXcd;
using MatR = Eigen::MatrixXd;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;
using VecI = Eigen::VectorXi;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qgraph
