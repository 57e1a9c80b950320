#pragma once

#include <Eigen/Dense>
#include <complex>

namespace emt {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;
using CMat3 = Eigen::Matrix3cd;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using CMat6 = Eigen::Matrix<cplx, 6, 6>;
using CVec6 = Eigen::Matrix<cplx, 6, 1>;
using CMatX = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

// Axis-aligned box used for the transport domain and the estimator grid.
struct Box {
    Vec3 lo = Vec3::Constant(-1.0);
    Vec3 hi = Vec3::Constant(1.0);

    bool contains(const Vec3& x) const {
        return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    }
    double size() const { return (hi - lo).maxCoeff(); }
};

}  // namespace emt
