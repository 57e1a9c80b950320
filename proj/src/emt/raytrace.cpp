#include "emt/raytrace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace emt {

namespace {

bool analytic_family(const OpticalResponse& m) { return m.family != MediumFamily::Generic; }

bool use_analytic_gradients(const OpticalResponse& m, const RayOptions& opts) {
    switch (opts.gradients) {
        case GradientMethod::Analytic:
            if (!analytic_family(m))
                throw Error(ErrorCode::InvalidArgument, "analytic gradients need an analytic medium family");
            return true;
        case GradientMethod::FiniteDifference: return false;
        case GradientMethod::Auto: break;
    }
    return analytic_family(m);
}

GaugeChoice resolve_gauge(const OpticalResponse& m, const Vec3& k, const RayOptions& opts) {
    if (!analytic_family(m)) {
        if (opts.gauge == GaugeChoice::ParallelTransport || opts.gauge == GaugeChoice::Auto)
            return GaugeChoice::ParallelTransport;
        throw Error(ErrorCode::GaugeUnavailable, "numeric branch needs the parallel-transport gauge");
    }
    if (opts.gauge == GaugeChoice::ParallelTransport) return GaugeChoice::ParallelTransport;
    if (opts.gauge == GaugeChoice::Auto) {
        // The deterministic frame is not smooth near the z axis.
        const Vec3 kh = k.normalized();
        if (Vec3::UnitZ().cross(kh).norm() <= 1e-3) return GaugeChoice::ParallelTransport;
    }
    return GaugeChoice::Analytic;
}

double step_x(const RayOptions& opts) { return opts.fd_x_rel * opts.domain.size(); }
double step_k(const RayOptions& opts, const Vec3& k) { return opts.fd_k_rel * k.norm(); }

CMatX polar_unitary(const CMatX& q) {
    Eigen::JacobiSVD<CMatX> svd(q, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().adjoint();
}

double mixed_derivative(const OpticalResponse& medium, int mode, const BranchSample& ref,
                        const Vec3& x, const Vec3& k, const RayOptions& opts) {
    if (use_analytic_gradients(medium, opts)) {
        const double s = medium.speed_factor(x);
        return ref.omega / (s * k.norm()) * medium.profile.gradient.dot(k.normalized());
    }
    (void)mode;
    const double hx = step_x(opts), hk = step_k(opts, k);
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) {
        const Vec3 dx = Vec3::Unit(j) * hx, dk = Vec3::Unit(j) * hk;
        const double pp = tracked_branch(medium, ref, x + dx, k + dk, false, opts).omega;
        const double pm = tracked_branch(medium, ref, x + dx, k - dk, false, opts).omega;
        const double mp = tracked_branch(medium, ref, x - dx, k + dk, false, opts).omega;
        const double mm = tracked_branch(medium, ref, x - dx, k - dk, false, opts).omega;
        sum += (pp - pm - mp + mm) / (4.0 * hx * hk);
    }
    return sum;
}

// n for a reference sample whose gauge is fixed by `gauge`.
CMatX skew_for_reference(const OpticalResponse& medium, int mode, const BranchSample& ref,
                         const Vec3& x, const Vec3& k, GaugeChoice gauge, const RayOptions& opts) {
    const Eigen::Index a = ref.b.cols();
    const double hx = step_x(opts), hk = step_k(opts, k);
    auto sample = [&](const Vec3& xp, const Vec3& kp) {
        if (gauge == GaugeChoice::Analytic) return branch_at(medium, mode, xp, kp, opts);
        return tracked_branch(medium, ref, xp, kp, true, opts);
    };
    const HamiltonianGradients g = hamiltonian_gradients(medium, mode, x, k, opts);
    const CMat6 k0 = medium.k0(x);
    Eigen::LLT<CMat6> llt(k0);
    CMatX acc = CMatX::Zero(6, a);
    for (int j = 0; j < 3; ++j) {
        const Vec3 dx = Vec3::Unit(j) * hx, dk = Vec3::Unit(j) * hk;
        const CMatX dbx = (sample(x + dx, k).b - sample(x - dx, k).b) / (2.0 * hx);
        const CMatX dbk = (sample(x, k + dk).b - sample(x, k - dk).b) / (2.0 * hk);
        const CMat6 dl0 = llt.solve(maxwell_symbol(Vec3::Unit(j)).cast<cplx>());
        acc += dl0 * dbx - g.grad_x(j) * dbk;
    }
    CMatX n = ref.c.adjoint() * acc;
    n -= 0.5 * mixed_derivative(medium, mode, ref, x, k, opts) * CMatX::Identity(a, a);
    return n;
}

struct Derivative {
    Vec3 dx;
    Vec3 dk;
    CMatX dr;
};

struct StageContext {
    const OpticalResponse& medium;
    int mode;
    const RayOptions& opts;
    const std::optional<CMatX>& extra;
    const BranchSample* frame;  // carried parallel-transport frame (numeric branches)
};

CMatX generator(const StageContext& ctx, const Vec3& x, const Vec3& k) {
    const OpticalResponse& m = ctx.medium;
    BranchSample ref;
    GaugeChoice gauge = GaugeChoice::Analytic;
    if (ctx.frame) {
        ref = tracked_branch(m, *ctx.frame, x, k, true, ctx.opts);
        gauge = GaugeChoice::ParallelTransport;
    } else {
        ref = branch_at(m, ctx.mode, x, k, ctx.opts);
        gauge = resolve_gauge(m, k, ctx.opts);
    }
    const Eigen::Index a = ref.b.cols();
    CMatX omega_gen = CMatX::Zero(a, a);
    if (m.has_damping()) omega_gen += coupling_matrix_l(m, ref, x, -ref.omega);
    if (!(analytic_family(m) && m.homogeneous())) {
        const CMatX n = skew_for_reference(m, ctx.mode, ref, x, k, gauge, ctx.opts);
        omega_gen += 0.5 * (n - n.adjoint());
    }
    if (ctx.extra) omega_gen += *ctx.extra;
    return omega_gen;
}

Derivative evaluate(const StageContext& ctx, const Vec3& x, const Vec3& k, const CMatX* r) {
    const HamiltonianGradients g = hamiltonian_gradients(ctx.medium, ctx.mode, x, k, ctx.opts);
    Derivative d{g.grad_k, -g.grad_x, CMatX()};
    if (r) d.dr = -generator(ctx, x, k) * (*r);
    return d;
}

void rk4_step(const StageContext& ctx, Vec3& x, Vec3& k, CMatX* r, double dt) {
    const Derivative d1 = evaluate(ctx, x, k, r);
    CMatX r2, r3, r4;
    if (r) r2 = *r + 0.5 * dt * d1.dr;
    const Derivative d2 = evaluate(ctx, x + 0.5 * dt * d1.dx, k + 0.5 * dt * d1.dk, r ? &r2 : nullptr);
    if (r) r3 = *r + 0.5 * dt * d2.dr;
    const Derivative d3 = evaluate(ctx, x + 0.5 * dt * d2.dx, k + 0.5 * dt * d2.dk, r ? &r3 : nullptr);
    if (r) r4 = *r + dt * d3.dr;
    const Derivative d4 = evaluate(ctx, x + dt * d3.dx, k + dt * d3.dk, r ? &r4 : nullptr);
    x += dt / 6.0 * (d1.dx + 2.0 * d2.dx + 2.0 * d3.dx + d4.dx);
    k += dt / 6.0 * (d1.dk + 2.0 * d2.dk + 2.0 * d3.dk + d4.dk);
    if (r) *r += dt / 6.0 * (d1.dr + 2.0 * d2.dr + 2.0 * d3.dr + d4.dr);
}

void record_drift(const OpticalResponse& medium, RayState& s, const RayOptions& opts) {
    if (s.omega_start == 0.0) return;
    const double w = hamiltonian(medium, s.mode, s.x, s.k, opts);
    s.max_drift = std::max(s.max_drift, std::abs(w - s.omega_start) / std::abs(s.omega_start));
}

}  // namespace

BranchSample branch_at(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k,
                       const RayOptions& opts) {
    (void)opts;
    const ModeDecomposition d = decompose(medium, x, k);
    if (mode < 0 || mode >= static_cast<int>(d.branches.size()))
        throw Error(ErrorCode::InvalidArgument, "mode index out of range");
    const Branch& br = d.branches[static_cast<std::size_t>(mode)];
    return {br.omega, br.b, br.c};
}

BranchSample tracked_branch(const OpticalResponse& medium, const BranchSample& reference,
                            const Vec3& x, const Vec3& k, bool align, const RayOptions& opts) {
    const ModeDecomposition d = decompose(medium, x, k);
    double best = std::numeric_limits<double>::infinity(), second = best, scale = 0.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < d.branches.size(); ++i) {
        const double dist = std::abs(d.branches[i].omega - reference.omega);
        scale = std::max(scale, std::abs(d.branches[i].omega));
        if (dist < best) {
            second = best;
            best = dist;
            idx = i;
        } else if (dist < second) {
            second = dist;
        }
    }
    const Branch& br = d.branches[idx];
    if (second - best <= opts.degeneracy_tol * (1.0 + scale) || br.b.cols() != reference.b.cols())
        throw Error(ErrorCode::BranchTrackingLost, "nearest eigenvalue is ambiguous");
    BranchSample out{br.omega, br.b, br.c};
    if (align) {
        const CMatX u = polar_unitary(reference.c.adjoint() * out.b);
        out.b = out.b * u.adjoint();
        out.c = out.c * u.adjoint();
    }
    return out;
}

double hamiltonian(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k,
                   const RayOptions& opts) {
    return branch_at(medium, mode, x, k, opts).omega;
}

HamiltonianGradients hamiltonian_gradients(const OpticalResponse& medium, int mode, const Vec3& x,
                                           const Vec3& k, const RayOptions& opts) {
    if (!(k.norm() > 0.0)) throw Error(ErrorCode::ZeroWaveVector, "wavevector must be nonzero");
    HamiltonianGradients g;
    const BranchSample ref = branch_at(medium, mode, x, k, opts);
    if (use_analytic_gradients(medium, opts)) {
        const double s = medium.speed_factor(x);
        g.grad_x = ref.omega / s * medium.profile.gradient;
        g.grad_k = ref.omega * k / k.squaredNorm();
        return g;
    }
    const double hx = step_x(opts), hk = step_k(opts, k);
    for (int j = 0; j < 3; ++j) {
        const Vec3 dx = Vec3::Unit(j) * hx, dk = Vec3::Unit(j) * hk;
        g.grad_x(j) = (tracked_branch(medium, ref, x + dx, k, false, opts).omega -
                       tracked_branch(medium, ref, x - dx, k, false, opts).omega) / (2.0 * hx);
        g.grad_k(j) = (tracked_branch(medium, ref, x, k + dk, false, opts).omega -
                       tracked_branch(medium, ref, x, k - dk, false, opts).omega) / (2.0 * hk);
    }
    return g;
}

RayState make_ray(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k,
                  const CMatX& w_initial, const RayOptions& opts) {
    const BranchSample br = branch_at(medium, mode, x, k, opts);
    const Eigen::Index a = br.b.cols();
    RayState s;
    s.x = x;
    s.k = k;
    s.mode = mode;
    s.R = CMatX::Identity(a, a);
    if (w_initial.size() == 0) {
        s.w = CMatX::Identity(a, a) / static_cast<double>(a);
    } else {
        if (w_initial.rows() != a || w_initial.cols() != a)
            throw Error(ErrorCode::InvalidArgument, "coherence matrix size does not match the branch");
        s.w = w_initial;
    }
    s.omega_start = br.omega;
    if (!opts.domain.contains(x)) s.status = RayStatus::LeftDomain;
    return s;
}

RayState advance_ray(const OpticalResponse& medium, RayState state, double dt, const RayOptions& opts) {
    if (state.status != RayStatus::Active) return state;
    if (dt == 0.0) throw Error(ErrorCode::InvalidArgument, "time step must be nonzero");
    const std::optional<CMatX> none;
    const StageContext ctx{medium, state.mode, opts, none, nullptr};
    rk4_step(ctx, state.x, state.k, nullptr, dt);
    state.t += dt;
    record_drift(medium, state, opts);
    if (!opts.domain.contains(state.x)) state.status = RayStatus::LeftDomain;
    return state;
}

CMatX coupling_matrix_l(const OpticalResponse& medium, const BranchSample& branch, const Vec3& x,
                        double omega) {
    const CMat6 k0 = medium.k0(x);
    const CMat6 kd = medium.kd(x, omega);
    const CMat6 l1 = kI * omega * k0.llt().solve(kd);
    return branch.c.adjoint() * l1 * branch.b;
}

CMatX coupling_matrix_l(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k,
                        const RayOptions& opts) {
    const BranchSample br = branch_at(medium, mode, x, k, opts);
    return coupling_matrix_l(medium, br, x, -br.omega);
}

double lorentz_damping_rate(const LorentzModel& model, double omega) {
    return (kI * omega * model.relative(omega)).real();
}

CMatX skew_matrix_n(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k,
                    const RayOptions& opts) {
    if (!(k.norm() > 0.0)) throw Error(ErrorCode::ZeroWaveVector, "wavevector must be nonzero");
    const GaugeChoice gauge = resolve_gauge(medium, k, opts);
    const BranchSample ref = branch_at(medium, mode, x, k, opts);
    return skew_for_reference(medium, mode, ref, x, k, gauge, opts);
}

RayState propagate_coherence(const OpticalResponse& medium, RayState state, double horizon,
                             double dt, const RayOptions& opts,
                             const std::optional<CMatX>& extra_generator) {
    if (!(horizon > 0.0) || !(dt > 0.0))
        throw Error(ErrorCode::InvalidArgument, "horizon and dt must be positive");
    if (state.status != RayStatus::Active) return state;
    const auto steps = static_cast<long>(std::ceil(horizon / dt - 1e-9));
    const double h = horizon / static_cast<double>(steps);
    const Eigen::Index a = state.w.rows();
    CMatX r = CMatX::Identity(a, a);

    std::optional<BranchSample> frame;
    if (!analytic_family(medium)) frame = branch_at(medium, state.mode, state.x, state.k, opts);

    for (long i = 0; i < steps; ++i) {
        const StageContext ctx{medium, state.mode, opts, extra_generator, frame ? &*frame : nullptr};
        rk4_step(ctx, state.x, state.k, &r, h);
        state.t += h;
        if (frame) frame = tracked_branch(medium, *frame, state.x, state.k, true, opts);
        record_drift(medium, state, opts);
        if (!opts.domain.contains(state.x)) {
            state.status = RayStatus::LeftDomain;
            break;
        }
    }
    state.w = r * state.w * r.adjoint();
    project_psd(state.w);
    state.R = r * state.R;
    return state;
}

void project_psd(CMatX& w, double tol) {
    w = (0.5 * (w + w.adjoint())).eval();
    const double tr = w.trace().real();
    Eigen::SelfAdjointEigenSolver<CMatX> es(w);
    if (es.eigenvalues().minCoeff() >= -tol * std::abs(tr)) return;
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    w = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace emt
