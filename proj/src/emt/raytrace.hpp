#pragma once

#include <optional>

#include "emt/dispersion.hpp"

namespace emt {

enum class GradientMethod { Auto, Analytic, FiniteDifference };
enum class GaugeChoice { Auto, Analytic, ParallelTransport, None };

struct RayOptions {
    Box domain;
    double fd_x_rel = 1e-5;  // h_x = fd_x_rel * domain size
    double fd_k_rel = 1e-5;  // h_k = fd_k_rel * |k|
    GradientMethod gradients = GradientMethod::Auto;
    GaugeChoice gauge = GaugeChoice::Auto;
    double degeneracy_tol = 1e-8;
};

enum class RayStatus { Active, LeftDomain, Absorbed };

struct RayState {
    Vec3 x = Vec3::Zero();
    Vec3 k = Vec3::UnitZ();
    double t = 0.0;
    int mode = 0;
    CMatX R;
    CMatX w;
    double weight = 1.0;
    RayStatus status = RayStatus::Active;
    double omega_start = 0.0;
    double max_drift = 0.0;  // max |omega(t) - omega(0)| / |omega(0)|
};

struct HamiltonianGradients {
    Vec3 grad_x = Vec3::Zero();
    Vec3 grad_k = Vec3::Zero();
};

// Eigenvalue and eigenvectors of one branch at (x, k).
struct BranchSample {
    double omega = 0.0;
    CMatX b;
    CMatX c;
};

BranchSample branch_at(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k,
                       const RayOptions& opts = {});

// Follows the branch nearest to `reference` in eigenvalue; aligns the basis to it when
// `align` is set (polar factor of c_ref* b).
BranchSample tracked_branch(const OpticalResponse& medium, const BranchSample& reference,
                            const Vec3& x, const Vec3& k, bool align, const RayOptions& opts);

double hamiltonian(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k,
                   const RayOptions& opts = {});

HamiltonianGradients hamiltonian_gradients(const OpticalResponse& medium, int mode, const Vec3& x,
                                           const Vec3& k, const RayOptions& opts = {});

RayState make_ray(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k,
                  const CMatX& w_initial, const RayOptions& opts = {});

RayState advance_ray(const OpticalResponse& medium, RayState state, double dt,
                     const RayOptions& opts = {});

// l = c*(i w K0^-1 K_d(x, w)) b at the given frequency.
CMatX coupling_matrix_l(const OpticalResponse& medium, const BranchSample& branch, const Vec3& x,
                        double omega);
// Same, evaluated at w = -omega_alpha(x, k).
CMatX coupling_matrix_l(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k,
                        const RayOptions& opts = {});
inline CMatX symmetric_part(const CMatX& m) { return 0.5 * (m + m.adjoint()); }

// Re{i w eps_1(w)} for the Lorentz model: the trace decay rate of the propagating modes.
double lorentz_damping_rate(const LorentzModel& model, double omega);

CMatX skew_matrix_n(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k,
                    const RayOptions& opts = {});

// Optional constant generator is added to l + n (used by the Monte Carlo flights).
RayState propagate_coherence(const OpticalResponse& medium, RayState initial, double horizon,
                             double dt, const RayOptions& opts = {},
                             const std::optional<CMatX>& extra_generator = std::nullopt);

// Symmetrize and clip eigenvalues below -tol * tr back to zero.
void project_psd(CMatX& w, double tol = 1e-12);

}  // namespace emt
