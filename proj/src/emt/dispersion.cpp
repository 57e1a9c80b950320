#include "emt/dispersion.hpp"

#include <algorithm>
#include <cmath>

namespace emt {

namespace {

Mat3 cross_matrix(const Vec3& k) {
    Mat3 m;
    m << 0.0, -k.z(), k.y(),
         k.z(), 0.0, -k.x(),
         -k.y(), k.x(), 0.0;
    return m;
}

Vec3 unit_or_throw(const Vec3& k) {
    const double n = k.norm();
    if (!(n > 0.0)) throw Error(ErrorCode::ZeroWaveVector, "wavevector must be nonzero");
    return k / n;
}

// Eigen's cross() conjugates complex results; the bilinear product is needed here.
CVec3 cross(const CVec3& a, const CVec3& b) {
    return CVec3(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0));
}

CVec6 stack(const CVec3& e, const CVec3& h) {
    CVec6 v;
    v << e, h;
    return v;
}

}  // namespace

cplx LorentzModel::relative(double omega) const {
    const cplx denom(-omega * omega + omega_0 * omega_0, omega * gamma);
    return omega_p * omega_p / denom;
}

OpticalResponse OpticalResponse::isotropic(double eps, double mu) {
    OpticalResponse r;
    r.permittivity = CMat3::Identity() * eps;
    r.permeability = CMat3::Identity() * mu;
    r.family = MediumFamily::Isotropic;
    return r;
}

OpticalResponse OpticalResponse::lorentz(double eps, double mu, double omega_p, double omega_0,
                                         double gamma) {
    OpticalResponse r = isotropic(eps, mu);
    r.susceptibility = LorentzModel{omega_p, omega_0, gamma};
    return r;
}

OpticalResponse OpticalResponse::chiral(double eps, double mu, double kappa) {
    OpticalResponse r = isotropic(eps, mu);
    r.family = MediumFamily::Chiral;
    r.kappa = kappa;
    const double chi = kappa * std::sqrt(eps * mu);
    r.magnetoelectric = CMat3::Identity() * cplx(0.0, chi);
    return r;
}

OpticalResponse OpticalResponse::generic(const CMat3& eps, const CMat3& mu, const CMat3& xi) {
    OpticalResponse r;
    r.permittivity = eps;
    r.permeability = mu;
    r.magnetoelectric = xi;
    r.family = MediumFamily::Generic;
    return r;
}

void OpticalResponse::validate() const {
    auto hermitian = [](const CMat3& a) {
        return (a - a.adjoint()).norm() <= 1e-12 * (1.0 + a.norm());
    };
    if (!hermitian(permittivity) || !hermitian(permeability))
        throw Error(ErrorCode::InvalidArgument, "permittivity and permeability must be Hermitian");
    if (family == MediumFamily::Chiral && !(std::abs(kappa) < 1.0))
        throw Error(ErrorCode::ChiralityOutOfRange, "chirality out of range: |kappa| must be < 1");
    if (family != MediumFamily::Generic) {
        const double e = eps_scalar(), m = mu_scalar();
        if ((permittivity - CMat3::Identity() * e).norm() > 1e-14 * e ||
            (permeability - CMat3::Identity() * m).norm() > 1e-14 * m)
            throw Error(ErrorCode::InvalidArgument, "analytic families need scalar eps and mu");
    }
    if (const auto* lz = std::get_if<LorentzModel>(&susceptibility)) {
        if (lz->omega_p < 0.0 || lz->gamma < 0.0)
            throw Error(ErrorCode::InvalidArgument, "Lorentz model needs omega_p >= 0 and gamma >= 0");
    }
    if (const auto* tb = std::get_if<SusceptibilityTable>(&susceptibility)) {
        if (tb->omega.size() < 2 || tb->omega.size() != tb->kernel.size() ||
            !std::is_sorted(tb->omega.begin(), tb->omega.end()))
            throw Error(ErrorCode::InvalidArgument, "susceptibility table must be sorted with >= 2 rows");
    }
    Eigen::SelfAdjointEigenSolver<CMat6> es(k0_reference(), Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0))
        throw Error(ErrorCode::NonPositiveDefinite, "optical response K0 is not positive definite");
}

CMat6 OpticalResponse::k0_reference() const {
    CMat6 k;
    k << permittivity, magnetoelectric, magnetoelectric.adjoint(), permeability;
    return k;
}

CMat6 OpticalResponse::k0(const Vec3& x) const {
    const double s = speed_factor(x);
    if (!(s > 0.0)) throw Error(ErrorCode::NonPositiveDefinite, "speed profile is not positive at x");
    return k0_reference() / s;
}

CMat6 OpticalResponse::kd(const Vec3& x, double omega) const {
    const double s = speed_factor(x);
    CMat6 out = CMat6::Zero();
    if (const auto* lz = std::get_if<LorentzModel>(&susceptibility)) {
        out.topLeftCorner<3, 3>() = permittivity * lz->relative(omega);
    } else if (const auto* tb = std::get_if<SusceptibilityTable>(&susceptibility)) {
        const bool mirrored = omega < tb->omega.front() && -omega >= tb->omega.front();
        const double w = mirrored ? -omega : omega;
        const auto& grid = tb->omega;
        if (w <= grid.front()) {
            out = tb->kernel.front();
        } else if (w >= grid.back()) {
            out = tb->kernel.back();
        } else {
            const auto it = std::upper_bound(grid.begin(), grid.end(), w);
            const std::size_t j = static_cast<std::size_t>(it - grid.begin());
            const double t = (w - grid[j - 1]) / (grid[j] - grid[j - 1]);
            out = (1.0 - t) * tb->kernel[j - 1] + t * tb->kernel[j];
        }
        if (mirrored) out = out.conjugate().eval();
    }
    return out / s;
}

int ModeDecomposition::null_index() const {
    int best = -1;
    double best_abs = 0.0;
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const double a = std::abs(branches[i].omega);
        if (best < 0 || a < best_abs) {
            best = static_cast<int>(i);
            best_abs = a;
        }
    }
    return best;
}

CMat6 ModeDecomposition::identity_sum() const {
    CMat6 s = CMat6::Zero();
    for (const auto& br : branches) s += br.b * br.c.adjoint();
    return s;
}

CMat6 ModeDecomposition::reconstruct() const {
    CMat6 s = CMat6::Zero();
    for (const auto& br : branches) s += br.omega * (br.b * br.c.adjoint());
    return s;
}

double ModeDecomposition::orthonormality_residual() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < branches.size(); ++i) {
        for (std::size_t j = 0; j < branches.size(); ++j) {
            CMatX g = branches[i].c.adjoint() * branches[j].b;
            if (i == j) g -= CMatX::Identity(g.rows(), g.cols());
            worst = std::max(worst, g.norm());
        }
    }
    return worst;
}

std::vector<double> ModeDecomposition::eigenvalues() const {
    std::vector<double> out;
    for (const auto& br : branches)
        for (int a = 0; a < br.multiplicity; ++a) out.push_back(br.omega);
    std::sort(out.begin(), out.end());
    return out;
}

Mat6 maxwell_symbol(const Vec3& k) {
    const Mat3 om = cross_matrix(k);
    Mat6 m = Mat6::Zero();
    m.topRightCorner<3, 3>() = -om;
    m.bottomLeftCorner<3, 3>() = om;
    return m;
}

std::pair<Vec3, Vec3> transverse_frame(const Vec3& khat) {
    Vec3 e1 = Vec3::UnitZ().cross(khat);
    if (e1.norm() > 1e-6) {
        e1.normalize();
    } else {
        e1 = Vec3::UnitX();
    }
    const Vec3 e2 = khat.cross(e1);
    return {e1, e2};
}

ModeDecomposition eigen_decompose(const CMat6& k0, const Vec3& k, double degeneracy_tol) {
    if (!(k.norm() > 0.0)) throw Error(ErrorCode::ZeroWaveVector, "wavevector must be nonzero");
    Eigen::LLT<CMat6> llt(k0);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::NonPositiveDefinite, "K0 failed Cholesky factorization");
    const CMat6 lower = llt.matrixL();
    const CMat6 m = maxwell_symbol(k).cast<cplx>();
    // C = L^-1 M L^-*, Hermitian; b = L^-* y keeps b* K0 b = I.
    CMat6 tmp = lower.triangularView<Eigen::Lower>().solve(m);
    CMat6 reduced = lower.triangularView<Eigen::Lower>().solve(tmp.adjoint()).adjoint();
    reduced = (0.5 * (reduced + reduced.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<CMat6> es(reduced);
    const Eigen::Matrix<double, 6, 1> w = es.eigenvalues();
    const CMat6 b_all = lower.adjoint().triangularView<Eigen::Upper>().solve(es.eigenvectors());

    ModeDecomposition out;
    out.k = k;
    out.k0 = k0;
    const double tol = degeneracy_tol * (1.0 + w.cwiseAbs().maxCoeff());
    int start = 0;
    while (start < 6) {
        int end = start + 1;
        while (end < 6 && std::abs(w(end) - w(start)) <= tol) ++end;
        Branch br;
        br.multiplicity = end - start;
        br.omega = w.segment(start, br.multiplicity).mean();
        br.b = b_all.middleCols(start, br.multiplicity);
        br.c = k0 * br.b;
        br.label = std::to_string(out.branches.size());
        out.branches.push_back(std::move(br));
        start = end;
    }
    return out;
}

ModeDecomposition isotropic_branches(double eps, double mu, const Vec3& k) {
    if (!(eps > 0.0 && mu > 0.0)) throw Error(ErrorCode::NonPositiveDefinite, "eps and mu must be positive");
    const Vec3 kh = unit_or_throw(k);
    const auto [e1, e2] = transverse_frame(kh);
    const double c0 = 1.0 / std::sqrt(eps * mu);
    const double se = std::sqrt(2.0 * eps), sm = std::sqrt(2.0 * mu);

    ModeDecomposition out;
    out.k = k;
    out.k0 = OpticalResponse::isotropic(eps, mu).k0_reference();

    Branch null;
    null.label = "0";
    null.multiplicity = 2;
    null.b = CMatX::Zero(6, 2);
    null.b.block<3, 1>(0, 0) = (kh / std::sqrt(eps)).cast<cplx>();
    null.b.block<3, 1>(3, 1) = (kh / std::sqrt(mu)).cast<cplx>();
    out.branches.push_back(null);

    for (int sign : {+1, -1}) {
        Branch br;
        br.label = sign > 0 ? "+" : "-";
        br.multiplicity = 2;
        br.omega = sign * c0 * k.norm();
        br.b = CMatX::Zero(6, 2);
        const Vec3 frame[2] = {e1, e2};
        for (int a = 0; a < 2; ++a) {
            br.b.col(a) = stack((frame[a] / se).cast<cplx>(),
                                (sign * kh.cross(frame[a]) / sm).cast<cplx>());
        }
        out.branches.push_back(br);
    }
    for (auto& br : out.branches) br.c = out.k0 * br.b;
    return out;
}

ModeDecomposition chiral_branches(double eps, double mu, double kappa, const Vec3& k) {
    if (!(std::abs(kappa) < 1.0))
        throw Error(ErrorCode::ChiralityOutOfRange, "chirality out of range: |kappa| must be < 1");
    if (!(eps > 0.0 && mu > 0.0)) throw Error(ErrorCode::NonPositiveDefinite, "eps and mu must be positive");
    const Vec3 kh = unit_or_throw(k);
    const auto [e1, e2] = transverse_frame(kh);
    const double c0 = 1.0 / std::sqrt(eps * mu);
    const double se = std::sqrt(2.0 * eps), sm = std::sqrt(2.0 * mu);
    const CVec3 e1p = (kI * e1.cast<cplx>() - e2.cast<cplx>()) / std::sqrt(2.0);
    const CVec3 e2p = (kI * e1.cast<cplx>() + e2.cast<cplx>()) / std::sqrt(2.0);
    const CVec3 khc = kh.cast<cplx>();

    ModeDecomposition out;
    out.k = k;
    out.k0 = OpticalResponse::chiral(eps, mu, kappa).k0_reference();

    Branch null;
    null.label = "0";
    null.multiplicity = 2;
    null.b = null_mode_basis(out.k0, k);
    out.branches.push_back(null);

    struct Spec {
        const CVec3* e;
        int sign;
        double factor;
    };
    const Spec specs[4] = {{&e1p, +1, 1.0 + kappa}, {&e2p, -1, 1.0 + kappa},
                           {&e2p, +1, 1.0 - kappa}, {&e1p, -1, 1.0 - kappa}};
    for (int j = 0; j < 4; ++j) {
        const Spec& s = specs[j];
        Branch br;
        br.label = std::to_string(j + 1);
        br.multiplicity = 1;
        br.omega = s.sign * c0 * k.norm() / s.factor;
        const CVec3 h = cross(khc, *s.e);
        br.b = stack(*s.e / se, static_cast<double>(s.sign) * h / sm) / std::sqrt(s.factor);
        out.branches.push_back(br);
    }
    for (auto& br : out.branches) br.c = out.k0 * br.b;
    return out;
}

CMatX null_mode_basis(const CMat6& k0, const Vec3& k) {
    const Vec3 kh = unit_or_throw(k);
    const CVec3 khc = kh.cast<cplx>();
    const double eh = (khc.adjoint() * k0.topLeftCorner<3, 3>() * khc)(0).real();
    const double mh = (khc.adjoint() * k0.bottomRightCorner<3, 3>() * khc)(0).real();
    const cplx xh = (khc.adjoint() * k0.topRightCorner<3, 3>() * khc)(0);
    const double det = eh * mh - std::norm(xh);
    if (!(eh > 0.0) || !(det > 0.0))
        throw Error(ErrorCode::DegenerateQ, "null-mode factor is not positive definite");
    const double se = std::sqrt(eh);
    CMatX b = CMatX::Zero(6, 2);
    b.block<3, 1>(0, 0) = khc / se;
    b.block<3, 1>(0, 1) = -xh / se * khc / std::sqrt(det);
    b.block<3, 1>(3, 1) = se * khc / std::sqrt(det);
    return b;
}

ModeDecomposition decompose(const OpticalResponse& medium, const Vec3& x, const Vec3& k) {
    const double s = medium.speed_factor(x);
    if (!(s > 0.0)) throw Error(ErrorCode::NonPositiveDefinite, "speed profile is not positive at x");
    switch (medium.family) {
        case MediumFamily::Isotropic:
            return isotropic_branches(medium.eps_scalar() / s, medium.mu_scalar() / s, k);
        case MediumFamily::Chiral:
            return chiral_branches(medium.eps_scalar() / s, medium.mu_scalar() / s, medium.kappa, k);
        case MediumFamily::Generic:
            break;
    }
    return eigen_decompose(medium.k0(x), k);
}

}  // namespace emt
