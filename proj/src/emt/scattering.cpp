#include "emt/scattering.hpp"

#include <cmath>

#include "emt/quadrature.hpp"

namespace emt {

namespace {

void require_same_medium(const ModeDecomposition& a, const ModeDecomposition& b) {
    if ((a.k0 - b.k0).norm() > 1e-12 * (1.0 + a.k0.norm()))
        throw Error(ErrorCode::MixedMedia, "decompositions belong to different optical responses");
}

const Branch& branch_of(const ModeDecomposition& d, int index) {
    if (index < 0 || index >= static_cast<int>(d.branches.size()))
        throw Error(ErrorCode::InvalidArgument, "mode index out of range");
    return d.branches[static_cast<std::size_t>(index)];
}

// Outgoing shell for branch beta in direction phat: radius and Jacobian r^2 / |d omega / dr|.
struct ShellPoint {
    bool open = false;
    double radius = 0.0;
    double jacobian = 0.0;
};

ShellPoint shell_point(double omega_alpha, double omega_unit) {
    ShellPoint s;
    const double scale = std::abs(omega_alpha);
    if (scale == 0.0 || omega_unit * omega_alpha <= 0.0 || std::abs(omega_unit) <= 1e-12 * scale) return s;
    s.open = true;
    s.radius = omega_alpha / omega_unit;
    s.jacobian = s.radius * s.radius / std::abs(omega_unit);
    return s;
}

// Matrix-valued principal value: PV Int_0^inf g(r) / (r - r0) dr.
template <class G>
CMatX principal_value(G g, double r0, int order) {
    const QuadratureRule inner = gauss_legendre(order, 0.0, 2.0 * r0);
    const CMatX g0 = g(r0);
    CMatX acc = CMatX::Zero(g0.rows(), g0.cols());
    for (std::size_t i = 0; i < inner.nodes.size(); ++i) {
        const double r = inner.nodes[i];
        acc += inner.weights[i] * (g(r) - g0) / (r - r0);
    }
    // Tail: r = 2 r0 + s / (1 - s), s in [0, 1).
    const QuadratureRule tail = gauss_legendre(order, 0.0, 1.0);
    for (std::size_t i = 0; i < tail.nodes.size(); ++i) {
        const double s = tail.nodes[i];
        const double r = 2.0 * r0 + s / (1.0 - s);
        const double dr = 1.0 / ((1.0 - s) * (1.0 - s));
        acc += tail.weights[i] * dr * g(r) / (r - r0);
    }
    return acc;
}

template <class G>
CMatX regular_integral(G g, double shift, int order) {
    // Int_0^inf g(r) / (r + shift) dr, r = s / (1 - s).
    const QuadratureRule rule = gauss_legendre(2 * order, 0.0, 1.0);
    CMatX acc;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double s = rule.nodes[i];
        const double r = s / (1.0 - s);
        const CMatX term = rule.weights[i] / ((1.0 - s) * (1.0 - s)) * g(r) / (r + shift);
        if (acc.size() == 0) acc = term; else acc += term;
    }
    return acc;
}

}  // namespace

CMatX ModeTensor::apply(const CMatX& w) const {
    if (w.rows() != b_dim || w.cols() != b_dim)
        throw Error(ErrorCode::InvalidArgument, "coherence matrix size does not match the source mode");
    Eigen::VectorXcd vec(b_dim * b_dim);
    for (int b = 0; b < b_dim; ++b)
        for (int bp = 0; bp < b_dim; ++bp) vec(b * b_dim + bp) = w(b, bp);
    const Eigen::VectorXcd out = data * vec;
    CMatX r(a_dim, a_dim);
    for (int a = 0; a < a_dim; ++a)
        for (int ap = 0; ap < a_dim; ++ap) r(a, ap) = out(a * a_dim + ap);
    return r;
}

ModeTensor mode_psd_contraction(const ModeDecomposition& at_k, int alpha, const ModeDecomposition& at_p,
                                int beta, const SpectralModel& model) {
    require_same_medium(at_k, at_p);
    const Branch& ba = branch_of(at_k, alpha);
    const Branch& bb = branch_of(at_p, beta);
    const int na = ba.multiplicity, nb = bb.multiplicity;
    ModeTensor out(na, nb);
    const std::size_t nc = model.size();
    if (nc == 0 || model.sigma == 0.0) return out;

    const CMatX r = model.scaled_channel_matrix(at_k.k - at_p.k);
    std::vector<CMatX> s(nc), t(nc);
    for (std::size_t c = 0; c < nc; ++c) {
        const CMat6& pc = model.channels[c].structure;
        s[c] = ba.c.adjoint() * pc * bb.b;  // A x B
        t[c] = bb.c.adjoint() * pc * ba.b;  // B x A
    }
    for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t cp = 0; cp < nc; ++cp) {
            const cplx rc = r(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(cp));
            if (rc == 0.0) continue;
            for (int a = 0; a < na; ++a)
                for (int ap = 0; ap < na; ++ap)
                    for (int b = 0; b < nb; ++b)
                        for (int bp = 0; bp < nb; ++bp) out(a, ap, b, bp) += rc * s[c](a, b) * t[cp](bp, ap);
        }
    }
    return out;
}

ScatteringKernel differential_xsection(const ModeDecomposition& at_k, int alpha, const ModeDecomposition& at_p,
                                       int beta, const SpectralModel& model) {
    ScatteringKernel kern;
    kern.alpha = alpha;
    kern.beta = beta;
    kern.k = at_k.k;
    kern.p = at_p.k;
    kern.omega_alpha = branch_of(at_k, alpha).omega;
    kern.omega_beta = branch_of(at_p, beta).omega;
    kern.sigma = mode_psd_contraction(at_k, alpha, at_p, beta, model);
    kern.sigma.data *= 2.0 * kPi * kern.omega_alpha * kern.omega_beta;
    return kern;
}

CMatX LorentzKernel::apply(const CMatX& w) const {
    return prefactor * (r_eps * t * w * t.adjoint() + r_mu * x * w * x.adjoint() +
                        r_eps_mu * t * w * x.adjoint() + r_mu_eps * x * w * t.adjoint());
}

LorentzKernel lorentz_kernel(const Vec3& k, const Vec3& p, double r_eps, double r_mu, double r_eps_mu,
                             double r_mu_eps, double c0) {
    const Vec3 kh = k.normalized(), ph = p.normalized();
    const auto [ke1, ke2] = transverse_frame(kh);
    const auto [pe1, pe2] = transverse_frame(ph);
    const Vec3 ek[2] = {ke1, ke2}, ep[2] = {pe1, pe2};
    LorentzKernel out;
    out.t = CMatX::Zero(2, 2);
    out.x = CMatX::Zero(2, 2);
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            out.t(a, b) = ek[a].dot(ep[b]);
            out.x(a, b) = kh.cross(ek[a]).dot(ph.cross(ep[b]));
        }
    }
    out.prefactor = 0.5 * kPi * c0 * c0 * k.norm() * p.norm();
    out.r_eps = r_eps;
    out.r_mu = r_mu;
    out.r_eps_mu = r_eps_mu;
    out.r_mu_eps = r_mu_eps;
    return out;
}

CMatX shell_integral(const OpticalResponse& medium, const Vec3& x, int alpha, const Vec3& k, int beta,
                     const SpectralModel& model, const ShellOptions& opts) {
    const ModeDecomposition at_k = decompose(medium, x, k);
    const Branch& ba = branch_of(at_k, alpha);
    const int na = ba.multiplicity;
    CMatX acc = CMatX::Zero(na, na);
    if (model.is_zero()) return acc;
    for (const SphereNode& node : sphere_product_rule(k, opts.order_theta, opts.order_phi)) {
        const ModeDecomposition unit = decompose(medium, x, node.direction);
        if (beta >= static_cast<int>(unit.branches.size()))
            throw Error(ErrorCode::BranchTrackingLost, "branch count changes across the shell");
        const double omega_unit = unit.branches[static_cast<std::size_t>(beta)].omega;
        if (omega_unit != 0.0 && std::abs(omega_unit) <= 1e-12 * std::abs(ba.omega))
            throw Error(ErrorCode::VanishingGroupSpeed, "radial group speed vanishes on the shell");
        const ShellPoint sp = shell_point(ba.omega, omega_unit);
        if (!sp.open) continue;
        const ModeDecomposition at_p = decompose(medium, x, sp.radius * node.direction);
        const int nb = at_p.branches[static_cast<std::size_t>(beta)].multiplicity;
        const ScatteringKernel kern = differential_xsection(at_k, alpha, at_p, beta, model);
        acc += 0.5 * node.weight * sp.jacobian * kern.apply(CMatX::Identity(nb, nb));
    }
    return acc;
}

TotalCrossSection total_xsection(const OpticalResponse& medium, const Vec3& x, int alpha, const Vec3& k,
                                 const SpectralModel& model, const ShellOptions& opts) {
    const ModeDecomposition at_k = decompose(medium, x, k);
    const Branch& ba = branch_of(at_k, alpha);
    TotalCrossSection out;
    out.real_part = CMatX::Zero(ba.multiplicity, ba.multiplicity);
    for (int beta = 0; beta < static_cast<int>(at_k.branches.size()); ++beta)
        out.real_part += shell_integral(medium, x, alpha, k, beta, model, opts);
    out.pv_status = "not-evaluated";
    if (!opts.with_pv || medium.family != MediumFamily::Isotropic) return out;

    // Isotropic background: omega_beta depends on |p| only, so the PV integral is radial.
    const double c = medium.reference_speed() * medium.speed_factor(x);
    const double r0 = std::abs(ba.omega) / c;
    const double sign = ba.omega > 0.0 ? 1.0 : -1.0;
    CMatX pv = CMatX::Zero(ba.multiplicity, ba.multiplicity);
    if (ba.omega != 0.0 && !model.is_zero()) {
        const auto nodes = sphere_product_rule(k, opts.pv_order_theta, opts.pv_order_phi);
        for (int beta = 0; beta < static_cast<int>(at_k.branches.size()); ++beta) {
            const double beta_sign = at_k.branches[static_cast<std::size_t>(beta)].omega;
            if (beta_sign == 0.0) continue;
            auto angular = [&](double r) {
                CMatX acc = CMatX::Zero(ba.multiplicity, ba.multiplicity);
                if (r <= 0.0) return acc;
                for (const SphereNode& node : nodes) {
                    const ModeDecomposition at_p = decompose(medium, x, r * node.direction);
                    const int nb = at_p.branches[static_cast<std::size_t>(beta)].multiplicity;
                    acc += node.weight * differential_xsection(at_k, alpha, at_p, beta, model)
                                             .apply(CMatX::Identity(nb, nb));
                }
                return CMatX(acc * r * r);
            };
            if (beta_sign * sign > 0.0) {
                // omega_beta - omega_alpha = sign * c (r - r0)
                pv += sign / c * principal_value(angular, r0, opts.order_theta);
            } else {
                // omega_beta - omega_alpha = -sign * c (r + r0)
                pv += -sign / c * regular_integral(angular, r0, opts.order_theta);
            }
        }
    }
    out.pv_part = CMatX(-kI / (2.0 * kPi) * pv);
    out.pv_status = "evaluated";
    return out;
}

double lorentz_total_closed_form(double k_norm, double c0, const RadialFunction& r_eps, const RadialFunction& r_mu,
                               const RadialFunction& r_eps_mu, int order) {
    const QuadratureRule gl = gauss_legendre(order);
    double acc = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double th = gl.nodes[i];
        const double q = k_norm * std::sqrt(2.0 * (1.0 - th));
        acc += gl.weights[i] * ((1.0 + th * th) * (r_eps(q) + r_mu(q)) + 4.0 * th * r_eps_mu(q));
    }
    return kPi * kPi * c0 * std::pow(k_norm, 4) / 4.0 * acc;
}

std::array<double, 4> chiral_total(double k_norm, double kappa, double c0, const RadialFunction& r_a,
                                   const RadialFunction& r_b, const RadialFunction& r_ab, int order) {
    if (!(std::abs(kappa) < 1.0))
        throw Error(ErrorCode::ChiralityOutOfRange, "chirality out of range: |kappa| must be < 1");
    const QuadratureRule gl = gauss_legendre(order);
    double plus = 0.0, minus = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double th = gl.nodes[i];
        const double q = k_norm * std::sqrt(2.0 * (1.0 - th));
        const double w = gl.weights[i] * (1.0 + th) * (1.0 + th);
        plus += w * (r_a(q) + r_b(q) + 2.0 * r_ab(q));
        minus += w * (r_a(q) + r_b(q) - 2.0 * r_ab(q));
    }
    const double base = kPi * kPi * c0 * std::pow(k_norm, 4) / 2.0;
    const double s12 = base / (1.0 + kappa) * plus, s34 = base / (1.0 - kappa) * minus;
    return {s12, s12, s34, s34};
}

}  // namespace emt
