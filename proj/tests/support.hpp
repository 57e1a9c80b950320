#pragma once

#include <random>

#include "emt/types.hpp"

namespace emt::testing {

inline CMat6 random_k0(std::mt19937_64& rng, bool with_xi = true) {
    std::normal_distribution<double> g;
    CMat6 a;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) a(i, j) = cplx(g(rng), g(rng));
    if (!with_xi) {
        a.topRightCorner<3, 3>().setZero();
        a.bottomLeftCorner<3, 3>().setZero();
    }
    CMat6 k0 = a * a.adjoint() / 6.0 + 0.5 * CMat6::Identity();
    return 0.5 * (k0 + k0.adjoint());
}

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vec3 v(g(rng), g(rng), g(rng));
    return v.normalized();
}

inline CMatX random_psd(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> g;
    CMatX a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
    CMatX w = a * a.adjoint();
    return w / w.trace().real();
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace emt::testing
