#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "emt/error.hpp"
#include "emt/types.hpp"

namespace emt {

// eps_d(omega) = eps0 * omega_p^2 / (-omega^2 + i omega gamma + omega_0^2)
struct LorentzModel {
    double omega_p = 0.0;
    double omega_0 = 0.0;
    double gamma = 0.0;

    cplx relative(double omega) const;
};

// Tabulated omega -> K_d(omega); linear interpolation, conjugate-symmetric extension to -omega.
struct SusceptibilityTable {
    std::vector<double> omega;
    std::vector<CMat6> kernel;
};

using SusceptibilityModel = std::variant<std::monostate, LorentzModel, SusceptibilityTable>;

// Scalar speed factor s(x) = 1 + gradient.(x - origin); every block of K0 is divided by s.
struct SpeedProfile {
    Vec3 gradient = Vec3::Zero();
    Vec3 origin = Vec3::Zero();

    double value(const Vec3& x) const { return 1.0 + gradient.dot(x - origin); }
    bool is_constant() const { return gradient.isZero(0.0); }
};

enum class MediumFamily { Generic, Isotropic, Chiral };

struct OpticalResponse {
    CMat3 permittivity = CMat3::Identity();
    CMat3 permeability = CMat3::Identity();
    CMat3 magnetoelectric = CMat3::Zero();
    SusceptibilityModel susceptibility;
    SpeedProfile profile;
    MediumFamily family = MediumFamily::Generic;
    double kappa = 0.0;

    static OpticalResponse isotropic(double eps, double mu);
    static OpticalResponse lorentz(double eps, double mu, double omega_p, double omega_0, double gamma);
    static OpticalResponse chiral(double eps, double mu, double kappa);
    static OpticalResponse generic(const CMat3& eps, const CMat3& mu, const CMat3& xi);

    // Throws NonPositiveDefinite / ChiralityOutOfRange / InvalidArgument.
    void validate() const;

    double eps_scalar() const { return permittivity(0, 0).real(); }
    double mu_scalar() const { return permeability(0, 0).real(); }
    double reference_speed() const { return 1.0 / std::sqrt(eps_scalar() * mu_scalar()); }
    double speed_factor(const Vec3& x) const { return profile.value(x); }
    bool homogeneous() const { return profile.is_constant(); }
    bool has_damping() const { return !std::holds_alternative<std::monostate>(susceptibility); }

    CMat6 k0_reference() const;
    CMat6 k0(const Vec3& x) const;
    CMat6 kd(const Vec3& x, double omega) const;
};

struct Branch {
    double omega = 0.0;
    int multiplicity = 0;
    CMatX b;  // 6 x A right eigenvectors
    CMatX c;  // 6 x A left eigenvectors, c = K0 b
    std::string label;

    CMat6 projector() const { return b * c.adjoint(); }
};

struct ModeDecomposition {
    Vec3 k = Vec3::Zero();
    CMat6 k0 = CMat6::Identity();
    std::vector<Branch> branches;

    int null_index() const;
    CMat6 identity_sum() const;
    CMat6 reconstruct() const;
    double orthonormality_residual() const;
    std::vector<double> eigenvalues() const;  // sorted, with multiplicity
};

Mat6 maxwell_symbol(const Vec3& k);

std::pair<Vec3, Vec3> transverse_frame(const Vec3& khat);

// Generic solver for M(k) b = omega K0 b.
ModeDecomposition eigen_decompose(const CMat6& k0, const Vec3& k, double degeneracy_tol = 1e-8);

// Analytic families. Branch order is fixed: isotropic {0,+,-}; chiral {0,1,2,3,4}.
ModeDecomposition isotropic_branches(double eps, double mu, const Vec3& k);
ModeDecomposition chiral_branches(double eps, double mu, double kappa, const Vec3& k);

CMatX null_mode_basis(const CMat6& k0, const Vec3& k);

// Decomposition of the medium at x: analytic for the isotropic and chiral families.
ModeDecomposition decompose(const OpticalResponse& medium, const Vec3& x, const Vec3& k);

}  // namespace emt
