#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>

#include "emt/dispersion.hpp"
#include "emt/media.hpp"

namespace emt {

// Rank-4 mode tensor stored as an (A*A) x (B*B) matrix: row a*A + a', column b*B + b'.
struct ModeTensor {
    int a_dim = 0;
    int b_dim = 0;
    CMatX data;

    ModeTensor() = default;
    ModeTensor(int a, int b) : a_dim(a), b_dim(b), data(CMatX::Zero(a * a, b * b)) {}

    cplx& operator()(int a, int ap, int b, int bp) { return data(a * a_dim + ap, b * b_dim + bp); }
    cplx operator()(int a, int ap, int b, int bp) const { return data(a * a_dim + ap, b * b_dim + bp); }

    // [T:w]_{aa'} = sum_{bb'} T_{aa'bb'} w_{bb'}
    CMatX apply(const CMatX& w) const;
};

struct ScatteringKernel {
    int alpha = 0;  // target mode at k
    int beta = 0;   // source mode at p
    Vec3 k = Vec3::Zero();
    Vec3 p = Vec3::Zero();
    double omega_alpha = 0.0;
    double omega_beta = 0.0;
    ModeTensor sigma;

    CMatX apply(const CMatX& w) const { return sigma.apply(w); }
};

ModeTensor mode_psd_contraction(const ModeDecomposition& at_k, int alpha, const ModeDecomposition& at_p,
                                int beta, const SpectralModel& model);

ScatteringKernel differential_xsection(const ModeDecomposition& at_k, int alpha, const ModeDecomposition& at_p,
                                       int beta, const SpectralModel& model);

// Closed-form 2x2 Lorentz kernel for same-sign propagating modes.
struct LorentzKernel {
    CMatX t;  // T_ab = e_a(k).e_b(p)
    CMatX x;  // X_ab = (k x e_a).(p x e_b)
    double prefactor = 0.0;  // (pi/2) c0^2 |k||p|
    double r_eps = 0.0, r_mu = 0.0, r_eps_mu = 0.0, r_mu_eps = 0.0;

    CMatX apply(const CMatX& w) const;
};

LorentzKernel lorentz_kernel(const Vec3& k, const Vec3& p, double r_eps, double r_mu, double r_eps_mu,
                             double r_mu_eps, double c0);

struct TotalCrossSection {
    CMatX real_part;
    std::optional<CMatX> pv_part;  // the -(i/2pi) PV term, isotropic family only
    std::string pv_status;         // "evaluated" or "not-evaluated"
};

struct ShellOptions {
    int order_theta = 64;
    int order_phi = 128;
    bool with_pv = false;
    int pv_order_theta = 24;
    int pv_order_phi = 48;
};

// Shell quadrature of one outgoing branch: 1/2 Int_{shell} sigma_ab(k,p):I dmu(p).
CMatX shell_integral(const OpticalResponse& medium, const Vec3& x, int alpha, const Vec3& k, int beta,
                     const SpectralModel& model, const ShellOptions& opts = {});

TotalCrossSection total_xsection(const OpticalResponse& medium, const Vec3& x, int alpha, const Vec3& k,
                                 const SpectralModel& model, const ShellOptions& opts = {});

using RadialFunction = std::function<double(double)>;

double lorentz_total_closed_form(double k_norm, double c0, const RadialFunction& r_eps, const RadialFunction& r_mu,
                               const RadialFunction& r_eps_mu, int order = 64);

std::array<double, 4> chiral_total(double k_norm, double kappa, double c0, const RadialFunction& r_a,
                                   const RadialFunction& r_b, const RadialFunction& r_ab, int order = 64);

}  // namespace emt
