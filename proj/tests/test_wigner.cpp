#include <doctest.h>

#include <random>

#include "emt/error.hpp"
#include "emt/wigner.hpp"

using namespace emt;

namespace {

LineGrid unit_grid(double epsilon, int per_eps = 4, double length = 1.0) {
    LineGrid g;
    g.n = static_cast<int>(std::lround(per_eps * length / epsilon));
    g.spacing = length / g.n;
    g.origin = 0.0;
    return g;
}

double bump(double x, double center, double width) { return std::exp(-0.5 * std::pow((x - center) / width, 2)); }

}  // namespace

TEST_CASE("Lebedev rules") {
    for (int n : {26, 50}) {
        const auto rule = lebedev_rule(n);
        REQUIRE(rule.size() == static_cast<std::size_t>(n));
        double sum = 0.0;
        for (const auto& node : rule) {
            sum += node.weight;
            CHECK(std::abs(node.direction.norm() - 1.0) <= 1e-15);
        }
        CHECK(sum == doctest::Approx(4.0 * kPi).epsilon(1e-14));
        // Exact for low-degree polynomials: <z^2> = 1/3, <x^2 y^2> = 1/15.
        double z2 = 0.0, x2y2 = 0.0;
        for (const auto& node : rule) {
            z2 += node.weight * std::pow(node.direction.z(), 2);
            x2y2 += node.weight * std::pow(node.direction.x() * node.direction.y(), 2);
        }
        CHECK(z2 / (4 * kPi) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
        CHECK(x2y2 / (4 * kPi) == doctest::Approx(1.0 / 15.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(lebedev_rule(38), Error);
}

TEST_CASE("WKB sampling") {
    const double eps = 1.0 / 32.0;
    const LineGrid g = unit_grid(eps);
    const auto one = wkb_field([](double) { return 1.0; }, [](double) { return 0.0; }, eps, g);
    for (const cplx& v : one.values) CHECK(v == cplx(1.0, 0.0));

    const auto packet = complex_wkb_field([](double x) { return 0.8 * bump(x, 0.5, 0.05); },
                                          [](double x) { return 3.0 * x; }, eps, g);
    double peak = 0.0;
    for (const cplx& v : packet.values) peak = std::max(peak, std::abs(v));
    CHECK(peak == doctest::Approx(0.8).epsilon(1e-12));

    LineGrid coarse = g;
    coarse.n /= 2;
    coarse.spacing *= 2;
    CHECK_THROWS_AS(wkb_field([](double) { return 1.0; }, [](double) { return 0.0; }, eps, coarse), Error);

    // Phase averaging: |Re(a e^{iS/eps})|^2 integrates to half of a^2.
    const double e64 = 1.0 / 64.0;
    const auto a = [](double x) { return bump(x, 0.5, 0.08); };
    const auto real = wkb_field(a, [](double x) { return 2.0 * x + 0.5 * x * x; }, e64, unit_grid(e64));
    const double half = 0.5 * 0.08 * std::sqrt(kPi);
    CHECK(std::abs(field_energy(real) / half - 1.0) <= 0.02);
}

TEST_CASE("exact k-marginal identity") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    const double eps = 0.05;
    LineGrid g;
    g.n = 128;
    g.spacing = eps / 4.0;
    const auto u = sample_field([&](double) { return cplx(n(rng), n(rng)); }, eps, g);
    const auto v = sample_field([&](double) { return cplx(n(rng), n(rng)); }, eps, g);
    const auto w = discrete_wigner(u, v);
    const auto marginal = k_marginal(w);
    double worst = 0.0;
    for (int i = 0; i < g.n; ++i) {
        const cplx expected = u.values[i] * std::conj(v.values[i]);
        worst = std::max(worst, std::abs(marginal[i] - expected) / (1.0 + std::abs(expected)));
    }
    CHECK(worst <= 1e-13);
}

TEST_CASE("pure phase concentrates on its wavenumber") {
    const double eps = 1.0 / 32.0;
    const LineGrid g = unit_grid(eps);
    const PhaseSpaceGrid probe = discrete_wigner(sample_field([](double) { return cplx(1.0); }, eps, g));
    const double k0 = probe.k[static_cast<std::size_t>(g.n / 2 + 5)];  // on the k grid
    const auto u = sample_field([&](double x) { return std::exp(cplx(0.0, k0 * x / eps)); }, eps, g);
    const auto w = discrete_wigner(u);
    const double frac = concentration_fraction(w, [&](double) { return k0; }, 1.01 * w.dk());
    CHECK(frac >= 0.99);

    const auto zero = sample_field([](double) { return cplx(0.0); }, eps, g);
    CHECK(discrete_wigner(zero).values.norm() == 0.0);
}

TEST_CASE("sesquilinearity and grid checks") {
    const double eps = 0.05;
    LineGrid g;
    g.n = 64;
    g.spacing = eps / 4.0;
    const auto u = sample_field([](double x) { return std::exp(cplx(-x, 3.0 * x)); }, eps, g);
    const auto v = sample_field([](double x) { return cplx(std::cos(5 * x), x); }, eps, g);
    const cplx a(0.3, -1.2), b(2.0, 0.4);
    SampledField au = u, bv = v;
    for (auto& z : au.values) z *= a;
    for (auto& z : bv.values) z *= b;
    const CMatX lhs = discrete_wigner(au, bv).values;
    const CMatX rhs = a * std::conj(b) * discrete_wigner(u, v).values;
    CHECK((lhs - rhs).norm() <= 1e-13 * rhs.norm());

    LineGrid other = g;
    other.n = 32;
    const auto small = sample_field([](double) { return cplx(1.0); }, eps, other);
    CHECK_THROWS_AS(discrete_wigner(u, small), Error);
}

TEST_CASE("free transport is a shift in phase space") {
    const double eps = 1.0 / 32.0;
    LineGrid g = unit_grid(eps, 4, 4.0);
    g.origin = -2.0;
    const auto u0 = complex_wkb_field([](double x) { return bump(x, -0.5, 0.2); }, [](double x) { return 2.0 * x; },
                                      eps, g);
    CHECK(free_transport_check(u0, 1.0, 0.0) <= 1e-14);
    const double d = free_transport_check(u0, 1.0, 1.0);
    MESSAGE("shift distance " << d);
    CHECK(d <= 1e-3);
    CHECK(free_transport_check(u0, 1.0, 0.37) <= 1e-3);
}

TEST_CASE("counter-propagating packets each carry half the mass") {
    const double eps = 1.0 / 32.0, k0 = 2.0;
    LineGrid g = unit_grid(eps, 4, 4.0);
    g.origin = -2.0;
    for (double t : {0.0, 0.5, 1.0}) {
        // d'Alembert split of a standing packet: one half moves right with +k0, the other left with -k0.
        const auto u = sample_field(
            [&](double x) {
                return 0.5 * bump(x - t, 0.0, 0.15) * std::exp(cplx(0.0, k0 * (x - t) / eps)) +
                       0.5 * bump(x + t, 0.0, 0.15) * std::exp(cplx(0.0, -k0 * (x + t) / eps));
            },
            eps, g);
        const auto w = discrete_wigner(u);
        double plus = 0.0, minus = 0.0;
        for (Eigen::Index i = 0; i < w.values.rows(); ++i)
            for (Eigen::Index c = 0; c < w.values.cols(); ++c) {
                const double val = w.values(i, c).real();
                (w.k[static_cast<std::size_t>(c)] > 0 ? plus : minus) += val;
            }
        const double total = plus + minus;
        CHECK(plus / total == doctest::Approx(0.5).epsilon(0.02));
        CHECK(minus / total == doctest::Approx(0.5).epsilon(0.02));
    }
}

TEST_CASE("WKB concentration sharpens as epsilon decreases") {
    const auto a = [](double x) { return bump(x, 0.5, 0.08); };
    const auto phase = [](double x) { return 2.0 * x + 0.5 * x * x; };
    const auto slope = [](double x) { return 2.0 + x; };
    // Fixed window: three k-cells of the coarsest grid.
    const double window = 3.0 * 2.0 * kPi * (1.0 / 16.0);
    double previous = 0.0;
    for (double eps : {1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0}) {
        const auto w = discrete_wigner(complex_wkb_field(a, phase, eps, unit_grid(eps)));
        const double frac = concentration_fraction(w, slope, window);
        MESSAGE("eps " << eps << " fraction " << frac);
        CHECK(frac >= previous - 1e-12);
        previous = frac;
    }
}

TEST_CASE("Kirchhoff spherical means") {
    const Vec3 x(0.2, -0.1, 0.3);
    for (int n : {26, 50})
        CHECK(kirchhoff_spherical_mean([](const Vec3&) { return 1.7; }, x, 1.3, 0.8, n) ==
              doctest::Approx(0.8 * 1.7).epsilon(1e-12));
    // Support strictly inside the sphere of radius c t.
    auto inner = [&](const Vec3& y) { return std::max(0.0, 1.0 - (y - x).squaredNorm() / 0.25); };
    CHECK(kirchhoff_spherical_mean(inner, x, 1.0, 1.0, 26) == 0.0);
    CHECK(kirchhoff_spherical_mean(inner, x, 1.0, 1.0, 50) == 0.0);

    const Vec3 center(0.4, 0.2, -0.3);
    auto gauss = [&](const Vec3& y) { return std::exp(-(y - center).squaredNorm() / (2.0 * 0.8)); };
    const double ref = kirchhoff_spherical_mean(gauss, x, 1.0, 1.0, sphere_product_rule(Vec3::UnitZ(), 64, 128));
    const double e26 = std::abs(kirchhoff_spherical_mean(gauss, x, 1.0, 1.0, 26) - ref);
    const double e50 = std::abs(kirchhoff_spherical_mean(gauss, x, 1.0, 1.0, 50) - ref);
    MESSAGE("errors " << e26 << " " << e50);
    CHECK(e26 >= 4.0 * e50);
    CHECK_THROWS_AS(kirchhoff_spherical_mean(gauss, x, 1.0, 0.0, 26), Error);
}
