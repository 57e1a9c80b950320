#include <doctest.h>

#include "emt/dispersion.hpp"
#include "support.hpp"

using namespace emt;
using emt::testing::random_k0;
using emt::testing::random_unit;

TEST_CASE("maxwell symbol applies the curl structure") {
    CVec6 u = CVec6::Zero();
    u(0) = 1.0;
    const CVec6 mu = maxwell_symbol(Vec3(0, 0, 1)).cast<cplx>() * u;
    CVec6 expected = CVec6::Zero();
    expected(4) = 1.0;
    CHECK((mu - expected).norm() == 0.0);
    CHECK(maxwell_symbol(Vec3::Zero()).isZero(0.0));

    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const Vec3 k = random_unit(rng) * 3.7;
        const Mat6 m = maxwell_symbol(k);
        CHECK((m - m.transpose()).norm() == 0.0);
        CHECK((maxwell_symbol(2.0 * k) - 2.0 * m).norm() == 0.0);
    }
}

TEST_CASE("generic solver on an isotropic medium") {
    const auto d = eigen_decompose(OpticalResponse::isotropic(1, 1).k0_reference(), Vec3(0, 0, 2));
    const auto ev = d.eigenvalues();
    const double expected[6] = {-2, -2, 0, 0, 2, 2};
    REQUIRE(ev.size() == 6);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(ev[i] - expected[i]) <= 1e-12);
    CHECK(d.branches.size() == 3);
}

TEST_CASE("generic solver on a chiral medium") {
    const auto d = eigen_decompose(OpticalResponse::chiral(1, 1, 0.5).k0_reference(), Vec3(0.6, 0, 0.8));
    const auto ev = d.eigenvalues();
    const double expected[6] = {-2, -2.0 / 3.0, 0, 0, 2.0 / 3.0, 2};
    for (int i = 0; i < 6; ++i) CHECK(std::abs(ev[i] - expected[i]) <= 1e-12);
    int simple = 0;
    for (const auto& br : d.branches) simple += br.multiplicity == 1;
    CHECK(simple == 4);
}

TEST_CASE("random positive-definite media: spectral algebra") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const CMat6 k0 = random_k0(rng);
        const Vec3 k = random_unit(rng) * (0.5 + trial * 0.01);
        const auto d = eigen_decompose(k0, k);
        const CMat6 l0 = k0.llt().solve(maxwell_symbol(k).cast<cplx>());
        CHECK(d.orthonormality_residual() <= 1e-10);
        CHECK((d.identity_sum() - CMat6::Identity()).norm() / std::sqrt(6.0) <= 1e-10);
        CHECK((d.reconstruct() - l0).norm() / l0.norm() <= 1e-10);
        const auto& null = d.branches[static_cast<std::size_t>(d.null_index())];
        CHECK(null.multiplicity == 2);
        for (const auto& br : d.branches) CHECK((br.c - k0 * br.b).norm() <= 1e-12);
    }
}

TEST_CASE("non positive-definite response is rejected") {
    CMat6 k0 = CMat6::Identity();
    k0(2, 2) = -1.0;
    CHECK_THROWS_AS(eigen_decompose(k0, Vec3(0, 0, 1)), Error);
    try {
        eigen_decompose(k0, Vec3(0, 0, 1));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonPositiveDefinite);
    }
    try {
        eigen_decompose(CMat6::Identity(), Vec3::Zero());
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ZeroWaveVector);
    }
}

TEST_CASE("isotropic branches in closed form") {
    const auto d = isotropic_branches(1, 1, Vec3(0, 0, 1));
    const auto& plus = d.branches[1];
    CHECK(plus.label == "+");
    CVec6 expected = CVec6::Zero();
    expected(0) = 1.0 / std::sqrt(2.0);
    expected(4) = 1.0 / std::sqrt(2.0);
    CHECK((plus.b.col(0) - expected).norm() <= 1e-15);

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const double eps = 0.5 + trial * 0.03, mu = 2.0 - trial * 0.02;
        const Vec3 k = random_unit(rng) * 1.3;
        const auto an = isotropic_branches(eps, mu, k);
        CHECK(an.orthonormality_residual() <= 1e-14);
        const auto num = eigen_decompose(an.k0, k);
        for (const auto& br : an.branches) {
            bool matched = false;
            for (const auto& nb : num.branches) {
                if (std::abs(nb.omega - br.omega) < 1e-9) {
                    CHECK((nb.projector() - br.projector()).norm() <= 1e-10);
                    matched = true;
                }
            }
            CHECK(matched);
        }
    }
    const auto pole = isotropic_branches(1, 1, Vec3(0, 0, -3));
    CHECK(pole.orthonormality_residual() <= 1e-14);
}

TEST_CASE("chiral branches") {
    const auto d = chiral_branches(1, 1, 0.5, Vec3(0, 0, 1));
    const double expected[5] = {0, 2.0 / 3.0, -2.0 / 3.0, 2.0, -2.0};
    for (int i = 0; i < 5; ++i) CHECK(std::abs(d.branches[i].omega - expected[i]) <= 1e-12);

    std::mt19937_64 rng(9);
    for (double kappa : {-0.7, -0.2, 0.0, 0.1, 0.5, 0.9}) {
        const Vec3 k = random_unit(rng) * 0.8;
        const auto an = chiral_branches(1.3, 0.7, kappa, k);
        CHECK(an.orthonormality_residual() <= 1e-13);
        const CMat6 l0 = an.k0.llt().solve(maxwell_symbol(k).cast<cplx>());
        CHECK((an.reconstruct() - l0).norm() <= 1e-12);
        for (std::size_t j = 1; j < 5; ++j)
            CHECK(std::abs((an.branches[j].c.adjoint() * an.branches[j].b)(0) - 1.0) <= 1e-13);
        const auto num = eigen_decompose(an.k0, k);
        for (const auto& br : an.branches)
            for (const auto& nb : num.branches)
                if (std::abs(nb.omega - br.omega) < 1e-9 && nb.multiplicity == br.multiplicity)
                    CHECK((nb.projector() - br.projector()).norm() <= 1e-10);
    }

    const Vec3 k(0.3, -0.4, 0.5);
    const auto c0 = chiral_branches(1.1, 0.9, 0.0, k);
    const auto iso = isotropic_branches(1.1, 0.9, k);
    const CMat6 p13 = c0.branches[1].projector() + c0.branches[3].projector();
    CHECK((p13 - iso.branches[1].projector()).norm() <= 1e-12);

    CHECK_THROWS_AS(chiral_branches(1, 1, 1.2, k), Error);
}

TEST_CASE("null mode basis") {
    const auto b = null_mode_basis(OpticalResponse::isotropic(2.0, 3.0).k0_reference(), Vec3(0, 0, 5));
    CHECK(std::abs(b(2, 0) - 1.0 / std::sqrt(2.0)) <= 1e-15);
    CHECK(std::abs(b(5, 1) - 1.0 / std::sqrt(3.0)) <= 1e-15);
    CHECK(b.col(0).tail<3>().norm() == 0.0);

    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const CMat6 k0 = random_k0(rng);
        const Vec3 k = random_unit(rng) * 2.0;
        const CMatX nb = null_mode_basis(k0, k);
        const CMat6 l0 = k0.llt().solve(maxwell_symbol(k).cast<cplx>());
        CHECK((l0 * nb).norm() <= 1e-12);
        CHECK((nb.adjoint() * k0 * nb - CMatX::Identity(2, 2)).norm() <= 1e-12);
    }
}

TEST_CASE("parity and homogeneity of the implemented media") {
    std::mt19937_64 rng(2);
    const OpticalResponse media[3] = {OpticalResponse::isotropic(1.5, 0.8),
                                      OpticalResponse::lorentz(1.0, 1.0, 1.0, 0.2, 0.1),
                                      OpticalResponse::chiral(1.2, 1.0, 0.3)};
    for (const auto& m : media) {
        const Vec3 k = random_unit(rng);
        const auto ev = eigen_decompose(m.k0_reference(), k).eigenvalues();
        for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(ev[i] + ev[5 - i]) <= 1e-12);
        const auto ev3 = eigen_decompose(m.k0_reference(), 3.0 * k).eigenvalues();
        for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(ev3[i] - 3.0 * ev[i]) <= 1e-12);
    }
}

TEST_CASE("optical response validation") {
    CHECK_NOTHROW(OpticalResponse::lorentz(1, 1, 1, 0, 0.1).validate());
    auto bad = OpticalResponse::chiral(1, 1, 1.2);
    try {
        bad.validate();
        FAIL("expected ChiralityOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ChiralityOutOfRange);
    }
    auto lz = OpticalResponse::lorentz(2, 1, 1, 0.5, 0.2);
    const CMat6 kd = lz.kd(Vec3::Zero(), 0.7);
    const cplx expected = 2.0 * 1.0 / cplx(-0.49 + 0.25, 0.7 * 0.2);
    CHECK(std::abs(kd(0, 0) - expected) <= 1e-14);
    CHECK(std::abs(kd(3, 3)) == 0.0);
}
