#include "emt/rte.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>

#include "emt/io.hpp"
#include "emt/quadrature.hpp"

namespace emt {

namespace {

constexpr long kMaxTrials = 10'000'000;

[[noreturn]] void invalid(const std::string& field, const std::string& reason) {
    throw Error(ErrorCode::ConfigInvalid, field + ": " + reason);
}

bool same_radius(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); }

Vec3 random_direction(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double z = 2.0 * u(rng) - 1.0;
    const double phi = 2.0 * kPi * u(rng);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
}

// Deterministic direction off the coordinate axes, used to evaluate rotation-invariant quantities.
Vec3 reference_direction() { return Vec3(0.36, 0.48, 0.8).normalized(); }

CMatX source_coherence(const Scenario& s, int dim) {
    if (s.source.coherence.size() == 0) return CMatX::Identity(dim, dim) / static_cast<double>(dim);
    return s.source.coherence;
}

int bin_of(double v, double lo, double hi, int n) {
    if (!(v >= lo) || !(v < hi)) return -1;
    return std::min(n - 1, static_cast<int>((v - lo) / (hi - lo) * n));
}

struct Located {
    bool binned = false;
    BinIndex index;
};

Located locate(const BinSpec& spec, int mode, const Vec3& x, const Vec3& k) {
    Located out;
    out.index.mode = mode;
    for (int d = 0; d < 3; ++d) {
        out.index.cell[static_cast<std::size_t>(d)] =
            bin_of(x[d], spec.region.lo[d], spec.region.hi[d], spec.x_cells[static_cast<std::size_t>(d)]);
        if (out.index.cell[static_cast<std::size_t>(d)] < 0) return out;
    }
    const double kn = k.norm();
    out.index.k = bin_of(kn, spec.k_min, spec.k_max, spec.k_cells);
    if (out.index.k < 0) return out;
    const Vec3 kh = k / kn;
    out.index.theta = std::clamp(static_cast<int>((kh.z() + 1.0) * 0.5 * spec.theta_cells), 0, spec.theta_cells - 1);
    double phi = std::atan2(kh.y(), kh.x());
    if (phi < 0.0) phi += 2.0 * kPi;
    out.index.phi = std::clamp(static_cast<int>(phi / (2.0 * kPi) * spec.phi_cells), 0, spec.phi_cells - 1);
    out.binned = true;
    return out;
}

struct BinSum {
    CMatX coherence;
    double trace = 0.0;
    std::size_t count = 0;
    Vec3 flux = Vec3::Zero();
};

struct BatchResult {
    std::map<std::uint64_t, BinSum> bins;
    std::size_t particles = 0;
    double total = 0.0;
    double unbinned = 0.0;
    double escaped = 0.0;
    std::size_t absorbed = 0;
    std::size_t scatter_events = 0;
};

void deposit(BatchResult& acc, const PhaseSpaceHistogram& layout, int mode, const Vec3& x, const Vec3& k,
             const CMatX& w, double weight, const Vec3& velocity) {
    const double tr = weight * w.trace().real();
    acc.total += tr;
    const Located loc = locate(layout.spec, mode, x, k);
    if (!loc.binned) {
        acc.unbinned += tr;
        return;
    }
    BinSum& b = acc.bins[layout.key(loc.index)];
    if (b.coherence.size() == 0) b.coherence = CMatX::Zero(w.rows(), w.cols());
    b.coherence += weight * w;
    b.trace += tr;
    b.count += 1;
    b.flux += tr * velocity;
}

struct Particle {
    Vec3 x;
    Vec3 k;
    CMatX w;
    double weight = 1.0;
};

Particle draw_source(const Scenario& s, std::mt19937_64& rng, int dim) {
    Particle p;
    const SourceSpec& src = s.source;
    switch (src.position) {
        case SourceSpec::Position::Point: p.x = src.center; break;
        case SourceSpec::Position::Gaussian: {
            std::normal_distribution<double> n(0.0, src.spread);
            p.x = src.center + Vec3(n(rng), n(rng), n(rng));
            break;
        }
        case SourceSpec::Position::Box: {
            std::uniform_real_distribution<double> u(-src.spread, src.spread);
            p.x = src.center + Vec3(u(rng), u(rng), u(rng));
            break;
        }
    }
    p.k = src.direction == SourceSpec::Direction::Fixed ? src.k : Vec3(src.k.norm() * random_direction(rng));
    p.w = source_coherence(s, dim);
    p.weight = 1.0 / static_cast<double>(src.particles);
    return p;
}

// Transport generator G of dR/dt = -G R in a homogeneous medium (damping plus a constant extra term).
CMatX homogeneous_propagator(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k,
                             const CMatX& extra, double t) {
    CMatX g = extra;
    if (medium.has_damping()) g += coupling_matrix_l(medium, mode, x, k);
    if (g.size() == 0 || g.isZero(0.0)) return CMatX::Identity(extra.rows(), extra.cols());
    return CMatX(-g * t).exp();
}

int branch_dim(const OpticalResponse& medium, int mode, const Vec3& x, const Vec3& k) {
    return static_cast<int>(branch_at(medium, mode, x, k).b.cols());
}

void simulate_particle(const Scenario& s, const ShellSampler* sampler, std::size_t index, BatchResult& acc,
                       const PhaseSpaceHistogram& layout) {
    std::seed_seq seq{static_cast<std::uint32_t>(s.numerics.seed), static_cast<std::uint32_t>(s.numerics.seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    const OpticalResponse& medium = s.medium;
    int mode = s.source.mode;
    const int dim = branch_dim(medium, mode, s.source.center, s.source.k);
    Particle p = draw_source(s, rng, dim);
    acc.particles += 1;
    if (!s.domain.contains(p.x)) {
        acc.escaped += p.weight;
        return;
    }
    const double horizon = s.numerics.horizon;
    RayOptions opts;
    opts.domain = s.domain;

    if (!medium.homogeneous()) {
        RayState ray = make_ray(medium, mode, p.x, p.k, p.w, opts);
        ray.weight = p.weight;
        ray = propagate_coherence(medium, ray, horizon, s.numerics.dt, opts);
        const double tr = ray.w.trace().real();
        if (ray.status == RayStatus::LeftDomain) {
            acc.escaped += ray.weight * tr;
            return;
        }
        const Vec3 v = hamiltonian_gradients(medium, mode, ray.x, ray.k, opts).grad_k;
        deposit(acc, layout, mode, ray.x, ray.k, ray.w / tr, ray.weight * tr, v);
        return;
    }

    int state = sampler ? sampler->find(mode, p.k.norm()) : -1;
    double t = 0.0;
    while (true) {
        const CollisionState* cs = state >= 0 ? &sampler->state(state) : nullptr;
        const double rate = cs ? cs->rate : 0.0;
        const double flight = std::min(sample_free_flight(rate, rng), horizon - t);
        const Vec3 v = hamiltonian_gradients(medium, mode, p.x, p.k, opts).grad_k;
        CMatX extra = CMatX::Zero(p.w.rows(), p.w.cols());
        if (cs) extra = cs->sigma - 0.5 * cs->rate * CMatX::Identity(p.w.rows(), p.w.cols());
        const CMatX r = homogeneous_propagator(medium, mode, p.x, p.k, extra, flight);
        p.x += v * flight;
        p.w = r * p.w * r.adjoint();
        project_psd(p.w);
        const double tr = p.w.trace().real();
        p.weight *= tr;
        p.w /= tr;
        t += flight;
        if (!s.domain.contains(p.x)) {
            acc.escaped += p.weight;
            return;
        }
        if (t >= horizon) {
            deposit(acc, layout, mode, p.x, p.k, p.w, p.weight, v);
            return;
        }
        try {
            const ScatterOutcome out = sampler->scatter(state, p.k, p.w, rng);
            mode = out.mode;
            state = out.state;
            p.k = out.k;
            p.w = out.w;
            p.weight *= out.weight_factor;
            acc.scatter_events += 1;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateKernel) throw;
            acc.absorbed += 1;
            return;
        }
    }
}

}  // namespace

std::uint64_t BinSpec::per_mode() const {
    return static_cast<std::uint64_t>(x_count()) * static_cast<std::uint64_t>(theta_cells) *
           static_cast<std::uint64_t>(phi_cells) * static_cast<std::uint64_t>(k_cells);
}

double BinSpec::cell_volume() const {
    const Vec3 ext = region.hi - region.lo;
    return ext.x() * ext.y() * ext.z() / x_count();
}

void Scenario::validate() const {
    try {
        medium.validate();
    } catch (const Error& e) {
        invalid("medium", e.what());
    }
    if (source.particles < 1) invalid("source.particles", "must be at least 1");
    if (!(numerics.horizon > 0.0)) invalid("numerics.horizon", "must be positive");
    if (!(numerics.dt > 0.0)) invalid("numerics.dt", "must be positive");
    if (numerics.batches < 16) invalid("numerics.batches", "at least 16 batches are required");
    if (numerics.workers < 1) invalid("numerics.workers", "must be at least 1");
    if (source.spread < 0.0) invalid("source.spread", "must be nonnegative");
    if (source.position != SourceSpec::Position::Point && !(source.spread > 0.0))
        invalid("source.spread", "must be positive for extended sources");
    if (!(source.k.norm() > 0.0)) invalid("source.k", "wavevector must be nonzero");
    for (int d = 0; d < 3; ++d) {
        if (bins.x_cells[static_cast<std::size_t>(d)] < 1) invalid("estimator.x_cells", "must be positive");
        if (!(bins.region.hi[d] > bins.region.lo[d])) invalid("estimator.region", "empty bin region");
        if (!(domain.hi[d] > domain.lo[d])) invalid("domain", "empty domain");
    }
    if (bins.theta_cells < 1 || bins.phi_cells < 1 || bins.k_cells < 1)
        invalid("estimator", "direction and |k| cell counts must be positive");
    if (!(bins.k_max > bins.k_min) || bins.k_min < 0.0) invalid("estimator.k_range", "need 0 <= k_min < k_max");

    const ModeDecomposition d = decompose(medium, source.center, source.k);
    if (source.mode < 0 || source.mode >= static_cast<int>(d.branches.size()))
        invalid("source.mode", "mode index out of range");
    const Branch& br = d.branches[static_cast<std::size_t>(source.mode)];
    if (br.omega == 0.0 || static_cast<int>(source.mode) == d.null_index()) invalid("source.mode", "the null mode is never sourced");
    if (source.coherence.size() != 0) {
        const CMatX& w = source.coherence;
        if (w.rows() != br.multiplicity || w.cols() != br.multiplicity)
            invalid("source.coherence", "size must match the mode multiplicity");
        if ((w - w.adjoint()).norm() > 1e-12) invalid("source.coherence", "must be Hermitian");
        if (std::abs(w.trace().real() - 1.0) > 1e-12) invalid("source.coherence", "trace must be 1");
        Eigen::SelfAdjointEigenSolver<CMatX> es(w);
        if (es.eigenvalues().minCoeff() < -1e-12) invalid("source.coherence", "must be positive semidefinite");
    }
    if (scattering()) {
        if (medium.family == MediumFamily::Generic || !medium.homogeneous())
            invalid("spectrum", "scattering requires a homogeneous isotropic or chiral medium");
        try {
            spectrum.validate(medium.k0_reference());
        } catch (const Error& e) {
            invalid("spectrum", e.what());
        }
    }
}

std::uint64_t PhaseSpaceHistogram::key(const BinIndex& b) const {
    const std::uint64_t cell = static_cast<std::uint64_t>(
        (b.cell[2] * spec.x_cells[1] + b.cell[1]) * spec.x_cells[0] + b.cell[0]);
    std::uint64_t k = static_cast<std::uint64_t>(b.mode) * spec.x_count() + cell;
    k = k * spec.theta_cells + static_cast<std::uint64_t>(b.theta);
    k = k * spec.phi_cells + static_cast<std::uint64_t>(b.phi);
    return k * spec.k_cells + static_cast<std::uint64_t>(b.k);
}

BinIndex PhaseSpaceHistogram::index(std::uint64_t key) const {
    BinIndex b;
    b.k = static_cast<int>(key % spec.k_cells);
    key /= spec.k_cells;
    b.phi = static_cast<int>(key % spec.phi_cells);
    key /= spec.phi_cells;
    b.theta = static_cast<int>(key % spec.theta_cells);
    key /= spec.theta_cells;
    const auto cell = static_cast<int>(key % spec.x_count());
    b.mode = static_cast<int>(key / spec.x_count());
    b.cell[0] = cell % spec.x_cells[0];
    b.cell[1] = (cell / spec.x_cells[0]) % spec.x_cells[1];
    b.cell[2] = cell / (spec.x_cells[0] * spec.x_cells[1]);
    return b;
}

Vec3 PhaseSpaceHistogram::cell_center(const BinIndex& b) const {
    Vec3 c;
    for (int d = 0; d < 3; ++d) {
        const double h = (spec.region.hi[d] - spec.region.lo[d]) / spec.x_cells[static_cast<std::size_t>(d)];
        c[d] = spec.region.lo[d] + (b.cell[static_cast<std::size_t>(d)] + 0.5) * h;
    }
    return c;
}

double PhaseSpaceHistogram::trace_of(const BinIndex& b) const {
    const auto it = bins.find(key(b));
    return it == bins.end() ? 0.0 : it->second.trace;
}

double scattering_rate(const CMatX& sigma) {
    if (sigma.size() == 0) return 0.0;
    return 2.0 * sigma.trace().real() / static_cast<double>(sigma.rows());
}

double sample_free_flight(double rate, std::mt19937_64& rng) {
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return -std::log1p(-u(rng)) / rate;
}

ShellSampler::ShellSampler(const OpticalResponse& medium, const SpectralModel& model, const ShellOptions& opts)
    : medium_(medium), model_(model), opts_(opts) {
    if (medium.family == MediumFamily::Generic || !medium.homogeneous())
        throw Error(ErrorCode::InvalidArgument, "shell sampling needs a homogeneous isotropic or chiral medium");
}

int ShellSampler::find(int mode, double k_norm) const {
    for (std::size_t i = 0; i < states_.size(); ++i)
        if (states_[i].mode == mode && same_radius(states_[i].k_norm, k_norm)) return static_cast<int>(i);
    return -1;
}

int ShellSampler::prepare(int mode, double k_norm) {
    const int existing = find(mode, k_norm);
    if (existing >= 0) return existing;
    const Vec3 origin = Vec3::Zero();
    const Vec3 dir = reference_direction();
    std::deque<std::pair<int, double>> queue{{mode, k_norm}};
    const std::size_t first = states_.size();
    while (!queue.empty()) {
        const auto [m, kn] = queue.front();
        queue.pop_front();
        if (find(m, kn) >= 0) continue;
        CollisionState cs;
        cs.mode = m;
        cs.k_norm = kn;
        const ModeDecomposition at_k = decompose(medium_, origin, kn * dir);
        const Branch& ba = at_k.branches.at(static_cast<std::size_t>(m));
        cs.omega = ba.omega;
        const CMatX sigma = total_xsection(medium_, origin, m, kn * dir, model_, opts_).real_part;
        // Radial spectra make Sigma rotation covariant; its Hermitian part is used in every frame.
        cs.sigma = symmetric_part(sigma);
        cs.rate = scattering_rate(cs.sigma);
        const double b_norm = ba.b.norm();
        const ModeDecomposition unit = decompose(medium_, origin, dir);
        for (int beta = 0; beta < static_cast<int>(unit.branches.size()); ++beta) {
            const double omega_unit = unit.branches[static_cast<std::size_t>(beta)].omega;
            if (omega_unit == 0.0 || omega_unit * cs.omega <= 0.0) continue;
            CollisionState::Channel ch;
            ch.beta = beta;
            ch.radius = cs.omega / omega_unit;
            ch.jacobian = ch.radius * ch.radius / std::abs(omega_unit);
            const ModeDecomposition at_p = decompose(medium_, origin, ch.radius * dir);
            const double c_norm = at_p.branches[static_cast<std::size_t>(beta)].c.operatorNorm();
            double channel_sum = 0.0;
            for (const auto& c : model_.channels) {
                const double p_norm = CMatX(c.structure).operatorNorm();
                channel_sum += std::pow(c_norm * p_norm * b_norm, 2);
            }
            const double lam = model_.max_eigenvalue_on(std::abs(ch.radius - kn), ch.radius + kn);
            // tr(sigma:w) <= 2 pi |omega|^2 lambda_max sum_c |c* P_c b|_F^2 for tr w = 1.
            ch.envelope = (1.0 + 1e-9) * 2.0 * kPi * cs.omega * cs.omega * lam * channel_sum * ch.jacobian;
            cs.envelope_total += 4.0 * kPi * ch.envelope;
            cs.channels.push_back(ch);
            queue.emplace_back(beta, ch.radius);
        }
        states_.push_back(std::move(cs));
    }
    for (std::size_t i = first; i < states_.size(); ++i)
        for (auto& ch : states_[i].channels) ch.target = find(ch.beta, ch.radius);
    return find(mode, k_norm);
}

ScatterOutcome ShellSampler::scatter(int id, const Vec3& k, const CMatX& w, std::mt19937_64& rng) const {
    const CollisionState& cs = state(id);
    if (!(cs.envelope_total > 0.0)) throw Error(ErrorCode::DegenerateKernel, "no open scattering channel");
    const Vec3 origin = Vec3::Zero();
    const ModeDecomposition at_k = decompose(medium_, origin, k);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ScatterOutcome out;
    for (long trial = 1; trial <= kMaxTrials; ++trial) {
        double pick = u(rng) * cs.envelope_total;
        std::size_t ci = 0;
        while (ci + 1 < cs.channels.size() && pick >= 4.0 * kPi * cs.channels[ci].envelope) {
            pick -= 4.0 * kPi * cs.channels[ci].envelope;
            ++ci;
        }
        const auto& ch = cs.channels[ci];
        const Vec3 p = ch.radius * random_direction(rng);
        const double accept = u(rng);
        const ModeDecomposition at_p = decompose(medium_, origin, p);
        const ScatteringKernel kern = differential_xsection(at_p, ch.beta, at_k, cs.mode, model_);
        const CMatX gain = kern.apply(w);
        const double density = gain.trace().real() * ch.jacobian;
        if (density > ch.envelope)
            throw Error(ErrorCode::DegenerateKernel, "scattering envelope violated");
        if (accept * ch.envelope >= density) continue;
        out.mode = ch.beta;
        out.state = ch.target;
        out.k = p;
        out.w = 0.5 * (gain + gain.adjoint()) / gain.trace().real();
        out.trials = trial;
        // Gain over the shell equals tr(Sigma w + w Sigma*) (reciprocity), normalized by the jump rate.
        out.weight_factor = 2.0 * (cs.sigma * w).trace().real() / cs.rate;
        return out;
    }
    throw Error(ErrorCode::DegenerateKernel, "shell sampling did not accept a direction");
}

double ShellSampler::gain_integral(int mode, const Vec3& k, const CMatX& w) const {
    const Vec3 origin = Vec3::Zero();
    const ModeDecomposition at_k = decompose(medium_, origin, k);
    const double omega = at_k.branches.at(static_cast<std::size_t>(mode)).omega;
    double acc = 0.0;
    for (const SphereNode& node : sphere_product_rule(k, opts_.order_theta, opts_.order_phi)) {
        const ModeDecomposition unit = decompose(medium_, origin, node.direction);
        for (int beta = 0; beta < static_cast<int>(unit.branches.size()); ++beta) {
            const double omega_unit = unit.branches[static_cast<std::size_t>(beta)].omega;
            if (omega_unit == 0.0 || omega_unit * omega <= 0.0) continue;
            const double r = omega / omega_unit;
            const ModeDecomposition at_p = decompose(medium_, origin, r * node.direction);
            const ScatteringKernel kern = differential_xsection(at_p, beta, at_k, mode, model_);
            acc += node.weight * r * r / std::abs(omega_unit) * kern.apply(w).trace().real();
        }
    }
    return acc;
}

PhaseSpaceHistogram run_simulation(const Scenario& scenario) {
    scenario.validate();
    PhaseSpaceHistogram hist;
    hist.spec = scenario.bins;
    hist.particles = scenario.source.particles;
    hist.seed = scenario.numerics.seed;
    const std::size_t n = scenario.source.particles;
    const std::size_t nb = static_cast<std::size_t>(scenario.numerics.batches);
    hist.batches = nb;

    std::optional<ShellSampler> sampler;
    if (scenario.scattering()) {
        sampler.emplace(scenario.medium, scenario.spectrum, scenario.numerics.shell);
        sampler->prepare(scenario.source.mode, scenario.source.k.norm());
    }
    const ShellSampler* sp = sampler ? &*sampler : nullptr;

    std::vector<BatchResult> results(nb);
    std::atomic<std::size_t> next{0};
    std::mutex error_lock;
    std::exception_ptr failure;
    auto work = [&]() {
        while (true) {
            const std::size_t b = next.fetch_add(1);
            if (b >= nb) return;
            const std::size_t lo = b * n / nb, hi = (b + 1) * n / nb;
            try {
                for (std::size_t i = lo; i < hi; ++i) simulate_particle(scenario, sp, i, results[b], hist);
            } catch (...) {
                std::lock_guard<std::mutex> g(error_lock);
                if (!failure) failure = std::current_exception();
                next = nb;
                return;
            }
        }
    };
    const int workers = std::max(1, std::min<int>(scenario.numerics.workers, static_cast<int>(nb)));
    std::vector<std::thread> pool;
    for (int i = 1; i < workers; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    hist.batch_totals.assign(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
        const BatchResult& r = results[b];
        hist.total_weight += r.total;
        hist.unbinned_weight += r.unbinned;
        hist.escaped_weight += r.escaped;
        hist.absorbed += r.absorbed;
        hist.scatter_events += r.scatter_events;
        hist.batch_totals[b] = r.total;
        for (const auto& [key, sum] : r.bins) {
            BinData& d = hist.bins[key];
            if (d.coherence.size() == 0) {
                d.coherence = CMatX::Zero(sum.coherence.rows(), sum.coherence.cols());
                d.batch_trace.assign(nb, 0.0);
            }
            d.coherence += sum.coherence;
            d.trace += sum.trace;
            d.count += sum.count;
            d.flux += sum.flux;
            d.batch_trace[b] = sum.trace;
        }
    }
    // Batch estimates Y_b = T_b * N / n_b; standard error sd(Y) / sqrt(B).
    auto batch_error = [&](const std::vector<double>& traces) {
        std::vector<double> y;
        for (std::size_t b = 0; b < nb; ++b) {
            const std::size_t count = results[b].particles;
            if (count > 0) y.push_back(traces[b] * static_cast<double>(n) / static_cast<double>(count));
        }
        if (y.size() < 2) return 0.0;
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= static_cast<double>(y.size());
        double var = 0.0;
        for (double v : y) var += (v - mean) * (v - mean);
        var /= static_cast<double>(y.size() - 1);
        return std::sqrt(var / static_cast<double>(y.size()));
    };
    for (auto& [key, d] : hist.bins) d.error = batch_error(d.batch_trace);
    hist.total_error = batch_error(hist.batch_totals);
    return hist;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Probability that one coordinate of the source lies in [lo, hi].
double axis_mass(const SourceSpec& src, int axis, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    const double c = src.center[axis];
    switch (src.position) {
        case SourceSpec::Position::Point: return (c >= lo && c < hi) ? 1.0 : 0.0;
        case SourceSpec::Position::Gaussian:
            return normal_cdf((hi - c) / src.spread) - normal_cdf((lo - c) / src.spread);
        case SourceSpec::Position::Box: {
            const double a = std::max(lo, c - src.spread), b = std::min(hi, c + src.spread);
            return b > a ? (b - a) / (2.0 * src.spread) : 0.0;
        }
    }
    return 0.0;
}

double axis_density(const SourceSpec& src, int axis, double v) {
    const double c = src.center[axis];
    switch (src.position) {
        case SourceSpec::Position::Point: return 0.0;
        case SourceSpec::Position::Gaussian: {
            const double z = (v - c) / src.spread;
            return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * kPi) * src.spread);
        }
        case SourceSpec::Position::Box: return std::abs(v - c) <= src.spread ? 0.5 / src.spread : 0.0;
    }
    return 0.0;
}

}  // namespace

CMatX analytic_lorentz_solution(const Vec3& x, const Vec3& k, double t, const Scenario& scenario) {
    const OpticalResponse& m = scenario.medium;
    if (m.family != MediumFamily::Isotropic || !m.homogeneous() || scenario.scattering())
        throw Error(ErrorCode::InvalidArgument, "closed form needs a homogeneous isotropic medium without fluctuations");
    if (scenario.source.position == SourceSpec::Position::Point)
        throw Error(ErrorCode::InvalidArgument, "a point source has no spatial density");
    const ModeDecomposition d = decompose(m, x, k);
    const Branch& br = d.branches.at(static_cast<std::size_t>(scenario.source.mode));
    const double sign = br.omega > 0.0 ? 1.0 : -1.0;
    double gamma = 0.0;
    if (const auto* lm = std::get_if<LorentzModel>(&m.susceptibility)) gamma = lorentz_damping_rate(*lm, br.omega);
    const Vec3 origin = x - sign * m.reference_speed() * k.normalized() * t;
    double rho = 1.0;
    for (int a = 0; a < 3; ++a) rho *= axis_density(scenario.source, a, origin[a]);
    return std::exp(-gamma * t) * rho * source_coherence(scenario, br.multiplicity);
}

PhaseSpaceHistogram ballistic_histogram(const Scenario& scenario, int order) {
    scenario.validate();
    const OpticalResponse& m = scenario.medium;
    if (!m.homogeneous() || scenario.scattering())
        throw Error(ErrorCode::InvalidArgument, "ballistic histogram needs a homogeneous medium without fluctuations");
    PhaseSpaceHistogram hist;
    hist.spec = scenario.bins;
    hist.particles = scenario.source.particles;
    hist.seed = scenario.numerics.seed;
    const SourceSpec& src = scenario.source;
    const BinSpec& spec = scenario.bins;
    const int mode = src.mode;
    const double T = scenario.numerics.horizon;

    // Direction nodes: one fixed direction, or a Gauss-Legendre product rule inside every direction bin.
    std::vector<std::pair<Vec3, double>> dirs;
    if (src.direction == SourceSpec::Direction::Fixed) {
        dirs.emplace_back(src.k, 1.0);
    } else {
        const double kn = src.k.norm();
        for (int it = 0; it < spec.theta_cells; ++it) {
            const double z0 = -1.0 + 2.0 * it / spec.theta_cells, z1 = -1.0 + 2.0 * (it + 1) / spec.theta_cells;
            const QuadratureRule rz = gauss_legendre(order, z0, z1);
            for (int ip = 0; ip < spec.phi_cells; ++ip) {
                const double p0 = 2.0 * kPi * ip / spec.phi_cells, p1 = 2.0 * kPi * (ip + 1) / spec.phi_cells;
                const QuadratureRule rp = gauss_legendre(order, p0, p1);
                for (std::size_t i = 0; i < rz.nodes.size(); ++i)
                    for (std::size_t j = 0; j < rp.nodes.size(); ++j) {
                        const double z = rz.nodes[i], s = std::sqrt(std::max(0.0, 1.0 - z * z));
                        const Vec3 dir(s * std::cos(rp.nodes[j]), s * std::sin(rp.nodes[j]), z);
                        dirs.emplace_back(kn * dir, rz.weights[i] * rp.weights[j] / (4.0 * kPi));
                    }
            }
        }
    }

    RayOptions opts;
    for (const auto& [k, weight] : dirs) {
        const Vec3 v = hamiltonian_gradients(m, mode, src.center, k, opts).grad_k;
        const int dim = branch_dim(m, mode, src.center, k);
        const CMatX extra = CMatX::Zero(dim, dim);
        const CMatX r = homogeneous_propagator(m, mode, src.center, k, extra, T);
        CMatX w = r * source_coherence(scenario, dim) * r.adjoint();
        const double tr = w.trace().real();
        const Vec3 shift = v * T;
        // Start and end inside the convex domain.
        double inside = 1.0;
        for (int a = 0; a < 3; ++a)
            inside *= axis_mass(src, a, std::max(scenario.domain.lo[a], scenario.domain.lo[a] - shift[a]),
                                std::min(scenario.domain.hi[a], scenario.domain.hi[a] - shift[a]));
        hist.escaped_weight += weight * tr * (1.0 - inside);
        hist.total_weight += weight * tr * inside;
        const Located probe = locate(spec, mode, src.center + shift, k);
        const double kn = k.norm();
        const bool k_ok = kn >= spec.k_min && kn < spec.k_max;
        double binned = 0.0;
        if (k_ok) {
            std::array<std::vector<double>, 3> mass;
            for (int a = 0; a < 3; ++a) {
                const int cells = spec.x_cells[static_cast<std::size_t>(a)];
                const double h = (spec.region.hi[a] - spec.region.lo[a]) / cells;
                for (int c = 0; c < cells; ++c) {
                    const double lo = std::max(spec.region.lo[a] + c * h, scenario.domain.lo[a] + shift[a]);
                    const double hi = std::min(spec.region.lo[a] + (c + 1) * h, scenario.domain.hi[a] + shift[a]);
                    // Start coordinate must also be in the domain.
                    const double slo = std::max(lo - shift[a], scenario.domain.lo[a]);
                    const double shi = std::min(hi - shift[a], scenario.domain.hi[a]);
                    mass[static_cast<std::size_t>(a)].push_back(axis_mass(src, a, slo, shi));
                }
            }
            BinIndex b = probe.index;
            b.mode = mode;
            // Direction and |k| bins from the node itself.
            const Located dir_bin = locate(BinSpec{Box{Vec3::Constant(-1), Vec3::Constant(1)}, {1, 1, 1},
                                                   spec.theta_cells, spec.phi_cells, spec.k_min, spec.k_max,
                                                   spec.k_cells},
                                           mode, Vec3::Zero(), k);
            b.theta = dir_bin.index.theta;
            b.phi = dir_bin.index.phi;
            b.k = dir_bin.index.k;
            for (int i = 0; i < spec.x_cells[0]; ++i)
                for (int j = 0; j < spec.x_cells[1]; ++j)
                    for (int l = 0; l < spec.x_cells[2]; ++l) {
                        const double p = mass[0][static_cast<std::size_t>(i)] * mass[1][static_cast<std::size_t>(j)] *
                                         mass[2][static_cast<std::size_t>(l)];
                        if (p <= 0.0) continue;
                        b.cell = {i, j, l};
                        BinData& d = hist.bins[hist.key(b)];
                        if (d.coherence.size() == 0) d.coherence = CMatX::Zero(dim, dim);
                        d.coherence += weight * p * w;
                        d.trace += weight * p * tr;
                        d.flux += weight * p * tr * v;
                        binned += p;
                    }
        }
        hist.unbinned_weight += weight * tr * (inside - binned);
    }
    return hist;
}

double l1_distance(const PhaseSpaceHistogram& a, const PhaseSpaceHistogram& b) {
    double diff = 0.0, norm = 0.0;
    for (const auto& [key, d] : b.bins) {
        norm += std::abs(d.trace);
        const auto it = a.bins.find(key);
        diff += std::abs((it == a.bins.end() ? 0.0 : it->second.trace) - d.trace);
    }
    for (const auto& [key, d] : a.bins)
        if (!b.bins.count(key)) diff += std::abs(d.trace);
    if (norm == 0.0) throw Error(ErrorCode::EmptyHistogram, "reference histogram is empty");
    return diff / norm;
}

FieldEstimate estimate_fields(const PhaseSpaceHistogram& hist, const std::vector<int>& modes) {
    if (hist.bins.empty()) throw Error(ErrorCode::EmptyHistogram, "histogram has no populated bins");
    FieldEstimate f;
    f.spec = hist.spec;
    const auto cells = static_cast<std::size_t>(hist.spec.x_count());
    f.energy.assign(cells, 0.0);
    f.flux.assign(cells, Vec3::Zero());
    std::vector<std::vector<double>> batch(cells, std::vector<double>(hist.batches, 0.0));
    for (const auto& [key, d] : hist.bins) {
        const BinIndex b = hist.index(key);
        if (!modes.empty() && std::find(modes.begin(), modes.end(), b.mode) == modes.end()) continue;
        const auto c = static_cast<std::size_t>((b.cell[2] * hist.spec.x_cells[1] + b.cell[1]) * hist.spec.x_cells[0] +
                                                b.cell[0]);
        f.energy[c] += 0.5 * d.trace;
        f.flux[c] += 0.5 * d.flux;
        for (std::size_t i = 0; i < d.batch_trace.size() && i < hist.batches; ++i) batch[c][i] += 0.5 * d.batch_trace[i];
    }
    f.energy_error.assign(cells, 0.0);
    if (hist.batches >= 2) {
        const double nb = static_cast<double>(hist.batches);
        for (std::size_t c = 0; c < cells; ++c) {
            double mean = 0.0, var = 0.0;
            for (double v : batch[c]) mean += v * nb;
            mean /= nb;
            for (double v : batch[c]) var += (v * nb - mean) * (v * nb - mean);
            f.energy_error[c] = std::sqrt(var / (nb - 1.0) / nb);
        }
    }
    return f;
}

void write_histogram(const PhaseSpaceHistogram& hist, const std::string& csv_path, const std::string& raw_path,
                     const std::string& scenario_hash) {
    std::ostringstream csv;
    csv << "mode,ix,iy,iz,itheta,iphi,ik,x,y,z,cos_theta,phi,k,count,trace,error\n";
    int amax = 1;
    for (const auto& [key, d] : hist.bins) amax = std::max<int>(amax, static_cast<int>(d.coherence.rows()));
    const std::size_t width = 10 + 2 * static_cast<std::size_t>(amax * amax);
    std::vector<double> raw;
    raw.reserve(hist.bins.size() * width);
    const BinSpec& s = hist.spec;
    char line[512];
    for (const auto& [key, d] : hist.bins) {
        const BinIndex b = hist.index(key);
        const Vec3 c = hist.cell_center(b);
        const double ct = -1.0 + (b.theta + 0.5) * 2.0 / s.theta_cells;
        const double ph = (b.phi + 0.5) * 2.0 * kPi / s.phi_cells;
        const double kc = s.k_min + (b.k + 0.5) * (std::min(s.k_max, 1e300) - s.k_min) / s.k_cells;
        std::snprintf(line, sizeof line, "%d,%d,%d,%d,%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%.17g,%.17g\n",
                      b.mode, b.cell[0], b.cell[1], b.cell[2], b.theta, b.phi, b.k, c.x(), c.y(), c.z(), ct, ph, kc,
                      d.count, d.trace, d.error);
        csv << line;
        const double head[10] = {double(b.mode), double(b.cell[0]), double(b.cell[1]), double(b.cell[2]),
                                 double(b.theta), double(b.phi), double(b.k), double(d.count), d.trace, d.error};
        raw.insert(raw.end(), head, head + 10);
        for (int i = 0; i < amax; ++i)
            for (int j = 0; j < amax; ++j) {
                const bool in = i < d.coherence.rows() && j < d.coherence.cols();
                raw.push_back(in ? d.coherence(i, j).real() : 0.0);
                raw.push_back(in ? d.coherence(i, j).imag() : 0.0);
            }
    }
    io::write_text(csv_path, csv.str());
    io::write_raw_f64(raw_path, raw);
    nlohmann::json meta;
    meta["columns"] = {"mode", "ix", "iy", "iz", "itheta", "iphi", "ik", "count", "trace", "error"};
    meta["coherence_entries"] = "row-major (re, im) pairs, padded to " + std::to_string(amax) + "x" + std::to_string(amax);
    meta["rows"] = hist.bins.size();
    meta["row_width"] = width;
    meta["region"] = {{"lo", {s.region.lo.x(), s.region.lo.y(), s.region.lo.z()}},
                      {"hi", {s.region.hi.x(), s.region.hi.y(), s.region.hi.z()}}};
    meta["x_cells"] = s.x_cells;
    meta["theta_cells"] = s.theta_cells;
    meta["phi_cells"] = s.phi_cells;
    meta["k_range"] = {s.k_min, s.k_max};
    meta["k_cells"] = s.k_cells;
    meta["direction_axis"] = "global z; cos(theta) and phi bins uniform";
    meta["particles"] = hist.particles;
    meta["batches"] = hist.batches;
    meta["seed"] = hist.seed;
    meta["scenario_hash"] = scenario_hash;
    meta["total_weight"] = hist.total_weight;
    meta["total_error"] = hist.total_error;
    meta["unbinned_weight"] = hist.unbinned_weight;
    meta["escaped_weight"] = hist.escaped_weight;
    meta["absorbed"] = hist.absorbed;
    meta["scatter_events"] = hist.scatter_events;
    io::write_json(raw_path + ".json", meta);
}

}  // namespace emt
