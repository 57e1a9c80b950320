#include "emt/wigner.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>

#include <fftw3.h>

#include "emt/error.hpp"
#include "emt/io.hpp"

namespace emt {

namespace {

std::mutex& planner_lock() {
    static std::mutex m;
    return m;
}

// In-place 1D complex transform on a private buffer.
class LineFft {
public:
    LineFft(int n, int sign) : n_(n), buffer_(static_cast<std::size_t>(n)) {
        std::lock_guard<std::mutex> g(planner_lock());
        auto* data = reinterpret_cast<fftw_complex*>(buffer_.data());
        plan_ = fftw_plan_dft_1d(n, data, data, sign, FFTW_ESTIMATE);
    }
    ~LineFft() {
        std::lock_guard<std::mutex> g(planner_lock());
        fftw_destroy_plan(plan_);
    }
    LineFft(const LineFft&) = delete;
    LineFft& operator=(const LineFft&) = delete;

    std::vector<cplx>& buffer() { return buffer_; }
    void run() { fftw_execute(plan_); }

private:
    int n_;
    std::vector<cplx> buffer_;
    fftw_plan plan_;
};

void require_grid(const LineGrid& g) {
    if (g.n < 2 || !(g.spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid needs n >= 2 and spacing > 0");
}

int signed_index(int m, int n) { return m < n / 2 ? m : m - n; }

// Multiplies the spectrum by exp(-i q shift), q = 2 pi m / L.
void translate(std::vector<cplx>& data, double length, double shift) {
    const int n = static_cast<int>(data.size());
    LineFft fwd(n, FFTW_FORWARD), inv(n, FFTW_BACKWARD);
    fwd.buffer() = data;
    fwd.run();
    for (int m = 0; m < n; ++m) {
        const int s = signed_index(m, n);
        const double q = 2.0 * kPi * s / length;
        cplx factor = std::exp(cplx(0.0, -q * shift));
        // Nyquist mode: keep the symmetric (real-preserving) interpolant.
        if (n % 2 == 0 && m == n / 2) factor = std::cos(q * shift);
        inv.buffer()[static_cast<std::size_t>(m)] = fwd.buffer()[static_cast<std::size_t>(m)] * factor;
    }
    inv.run();
    for (int i = 0; i < n; ++i) data[static_cast<std::size_t>(i)] = inv.buffer()[static_cast<std::size_t>(i)] / double(n);
}

}  // namespace

SampledField sample_field(const std::function<cplx(double)>& f, double epsilon, const LineGrid& grid) {
    require_grid(grid);
    if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
    if (grid.spacing > 0.25 * epsilon * (1.0 + 1e-12))
        throw Error(ErrorCode::UnderResolved, "grid spacing must not exceed epsilon / 4");
    SampledField u;
    u.grid = grid;
    u.epsilon = epsilon;
    u.values.resize(static_cast<std::size_t>(grid.n));
    for (int i = 0; i < grid.n; ++i) u.values[static_cast<std::size_t>(i)] = f(grid.position(i));
    return u;
}

SampledField complex_wkb_field(const RealFunction& amplitude, const RealFunction& phase, double epsilon,
                               const LineGrid& grid) {
    return sample_field([&](double x) { return amplitude(x) * std::exp(cplx(0.0, phase(x) / epsilon)); }, epsilon,
                        grid);
}

SampledField wkb_field(const RealFunction& amplitude, const RealFunction& phase, double epsilon, const LineGrid& grid) {
    return sample_field([&](double x) { return cplx(amplitude(x) * std::cos(phase(x) / epsilon), 0.0); }, epsilon,
                        grid);
}

double field_energy(const SampledField& u) {
    double acc = 0.0;
    for (const cplx& v : u.values) acc += std::norm(v);
    return acc * u.grid.spacing;
}

PhaseSpaceGrid discrete_wigner(const SampledField& u, const SampledField& v) {
    if (u.grid.n != v.grid.n || u.grid.spacing != v.grid.spacing || u.grid.origin != v.grid.origin ||
        u.epsilon != v.epsilon || u.values.size() != v.values.size())
        throw Error(ErrorCode::GridMismatch, "Wigner transform needs fields on the same grid");
    const int n = u.grid.n;
    PhaseSpaceGrid w;
    w.grid = u.grid;
    w.epsilon = u.epsilon;
    const double length = u.grid.length();
    w.k.resize(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) w.k[static_cast<std::size_t>(c)] = 2.0 * kPi * (c - n / 2) * u.epsilon / length;
    w.values = CMatX::Zero(n, n);
    const double dy = u.grid.spacing / u.epsilon;
    LineFft inv(n, FFTW_BACKWARD);
    auto& buf = inv.buffer();
    for (int i = 0; i < n; ++i) {
        const cplx right = std::conj(v.values[static_cast<std::size_t>(i)]);
        if (right == 0.0) continue;
        for (int j = 0; j < n; ++j) buf[static_cast<std::size_t>(j)] = u.values[static_cast<std::size_t>(((i - j) % n + n) % n)];
        inv.run();  // sum_j f_j exp(+2 pi i m j / n)
        for (int c = 0; c < n; ++c) {
            const int m = ((c - n / 2) % n + n) % n;
            w.values(i, c) = dy / (2.0 * kPi) * right * buf[static_cast<std::size_t>(m)];
        }
    }
    return w;
}

std::vector<cplx> k_marginal(const PhaseSpaceGrid& w) {
    std::vector<cplx> out(static_cast<std::size_t>(w.values.rows()));
    const double dk = w.dk();
    for (Eigen::Index i = 0; i < w.values.rows(); ++i) out[static_cast<std::size_t>(i)] = w.values.row(i).sum() * dk;
    return out;
}

SampledField shift_field(const SampledField& u, double shift) {
    SampledField out = u;
    translate(out.values, u.grid.length(), shift);
    return out;
}

PhaseSpaceGrid shift_phase_space(const PhaseSpaceGrid& w, double shift) {
    PhaseSpaceGrid out = w;
    std::vector<cplx> column(static_cast<std::size_t>(w.values.rows()));
    for (Eigen::Index c = 0; c < w.values.cols(); ++c) {
        for (Eigen::Index i = 0; i < w.values.rows(); ++i) column[static_cast<std::size_t>(i)] = w.values(i, c);
        translate(column, w.grid.length(), shift);
        for (Eigen::Index i = 0; i < w.values.rows(); ++i) out.values(i, c) = column[static_cast<std::size_t>(i)];
    }
    return out;
}

double free_transport_check(const SampledField& u0, double speed, double t) {
    const double shift = speed * t;
    const PhaseSpaceGrid moved = discrete_wigner(shift_field(u0, shift));
    const PhaseSpaceGrid expected = shift_phase_space(discrete_wigner(u0), shift);
    const double norm = expected.values.cwiseAbs().sum();
    if (norm == 0.0) return 0.0;
    return (moved.values - expected.values).cwiseAbs().sum() / norm;
}

double concentration_fraction(const PhaseSpaceGrid& w, const RealFunction& slope, double half_width) {
    double inside = 0.0, total = 0.0;
    for (Eigen::Index i = 0; i < w.values.rows(); ++i) {
        const double s = slope(w.grid.position(static_cast<int>(i)));
        for (Eigen::Index c = 0; c < w.values.cols(); ++c) {
            const double a = std::abs(w.values(i, c));
            total += a;
            if (std::abs(w.k[static_cast<std::size_t>(c)] - s) <= half_width) inside += a;
        }
    }
    return total > 0.0 ? inside / total : 0.0;
}

double kirchhoff_spherical_mean(const ScalarField3& g, const Vec3& x, double speed, double t,
                                const std::vector<SphereNode>& rule) {
    if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "Kirchhoff evaluation needs t > 0");
    double acc = 0.0;
    for (const SphereNode& node : rule) acc += node.weight * g(x - speed * t * node.direction);
    return t * acc / (4.0 * kPi);
}

double kirchhoff_spherical_mean(const ScalarField3& g, const Vec3& x, double speed, double t, int lebedev_points) {
    return kirchhoff_spherical_mean(g, x, speed, t, lebedev_rule(lebedev_points));
}

void write_phase_space(const PhaseSpaceGrid& w, const std::string& csv_path) {
    std::ostringstream out;
    out << "x,k,re_w,im_w\n";
    char line[160];
    for (Eigen::Index i = 0; i < w.values.rows(); ++i)
        for (Eigen::Index c = 0; c < w.values.cols(); ++c) {
            std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", w.grid.position(static_cast<int>(i)),
                          w.k[static_cast<std::size_t>(c)], w.values(i, c).real(), w.values(i, c).imag());
            out << line;
        }
    io::write_text(csv_path, out.str());
}

}  // namespace emt
