#pragma once

#include <vector>

#include "emt/types.hpp"

namespace emt {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Legendre nodes on [a, b].
QuadratureRule gauss_legendre(int order, double a = -1.0, double b = 1.0);

struct SphereNode {
    Vec3 direction;
    double weight;  // weights sum to 4 pi
};

// Gauss-Legendre in cos(theta) about `pole` times uniform trapezoid in phi.
std::vector<SphereNode> sphere_product_rule(const Vec3& pole, int order_theta, int order_phi);

// Octahedrally symmetric Lebedev rules with 26 or 50 points.
std::vector<SphereNode> lebedev_rule(int points);

}  // namespace emt
