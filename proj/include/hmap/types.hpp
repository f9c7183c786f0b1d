#pragma once

#include <array>

#include <Eigen/Core>

namespace hmap {

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3T = Eigen::Matrix<Scalar, 3, 3>;

using Vec3 = Vec3T<double>;
using Mat3 = Mat3T<double>;

// Christoffel symbols of the second kind, indexed gamma[k](i, j) = Γ^k_ij.
template <typename Scalar>
using ChristoffelT = std::array<Mat3T<Scalar>, 3>;
using Christoffel = ChristoffelT<double>;

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace hmap
