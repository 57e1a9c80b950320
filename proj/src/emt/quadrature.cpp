#include "emt/quadrature.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>

#include "emt/dispersion.hpp"
#include "emt/error.hpp"

namespace emt {

QuadratureRule gauss_legendre(int order, double a, double b) {
    if (order < 1) throw Error(ErrorCode::InvalidArgument, "quadrature order must be >= 1");
    std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)> table(
        gsl_integration_glfixed_table_alloc(static_cast<std::size_t>(order)),
        &gsl_integration_glfixed_table_free);
    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(order));
    rule.weights.resize(static_cast<std::size_t>(order));
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        gsl_integration_glfixed_point(a, b, i, &rule.nodes[i], &rule.weights[i], table.get());
    return rule;
}

std::vector<SphereNode> sphere_product_rule(const Vec3& pole, int order_theta, int order_phi) {
    const Vec3 axis = pole.normalized();
    const auto [e1, e2] = transverse_frame(axis);
    const QuadratureRule gl = gauss_legendre(order_theta);
    std::vector<SphereNode> out;
    out.reserve(static_cast<std::size_t>(order_theta) * static_cast<std::size_t>(order_phi));
    const double dphi = 2.0 * kPi / order_phi;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double ct = gl.nodes[i], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int j = 0; j < order_phi; ++j) {
            const double phi = (j + 0.5) * dphi;
            const Vec3 d = st * std::cos(phi) * e1 + st * std::sin(phi) * e2 + ct * axis;
            out.push_back({d, gl.weights[i] * dphi});
        }
    }
    return out;
}

namespace {

// All sign and permutation images of (a, b, c), deduplicated.
void add_orbit(std::vector<SphereNode>& out, double a, double b, double c, double weight) {
    const double base[3] = {a, b, c};
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    std::vector<Vec3> seen;
    for (const auto& p : perms)
        for (int signs = 0; signs < 8; ++signs) {
            Vec3 v(base[p[0]], base[p[1]], base[p[2]]);
            for (int d = 0; d < 3; ++d)
                if (signs & (1 << d)) v[d] = -v[d];
            bool dup = false;
            for (const Vec3& s : seen) dup = dup || (s - v).norm() < 1e-14;
            if (dup) continue;
            seen.push_back(v);
            out.push_back({v, 4.0 * kPi * weight});
        }
}

}  // namespace

std::vector<SphereNode> lebedev_rule(int points) {
    std::vector<SphereNode> out;
    const double r2 = 1.0 / std::sqrt(2.0), r3 = 1.0 / std::sqrt(3.0);
    if (points == 26) {
        add_orbit(out, 1, 0, 0, 1.0 / 21.0);
        add_orbit(out, r2, r2, 0, 4.0 / 105.0);
        add_orbit(out, r3, r3, r3, 9.0 / 280.0);
    } else if (points == 50) {
        add_orbit(out, 1, 0, 0, 4.0 / 315.0);
        add_orbit(out, r2, r2, 0, 64.0 / 2835.0);
        add_orbit(out, r3, r3, r3, 27.0 / 1280.0);
        add_orbit(out, 1.0 / std::sqrt(11.0), 1.0 / std::sqrt(11.0), 3.0 / std::sqrt(11.0), 14641.0 / 725760.0);
    } else {
        throw Error(ErrorCode::InvalidArgument, "Lebedev rules are available for 26 and 50 points");
    }
    return out;
}

}  // namespace emt
