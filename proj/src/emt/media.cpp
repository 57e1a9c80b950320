#include "emt/media.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include "emt/io.hpp"

namespace emt {

namespace {

double gaussian_radial(double lc, double q) {
    return lc * lc * lc * std::pow(2.0 * kPi, -1.5) * std::exp(-0.5 * lc * lc * q * q);
}

double exponential_radial(double lc, double q) {
    const double d = 1.0 + lc * lc * q * q;
    return lc * lc * lc / (kPi * kPi) / (d * d);
}

// Hermitian square root of a PSD matrix (negative round-off clipped).
CMatX psd_sqrt(const CMatX& m) {
    Eigen::SelfAdjointEigenSolver<CMatX> es(0.5 * (m + m.adjoint()));
    const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().adjoint();
}

double lattice_wavenumber(int i, const Grid3& g) {
    const int m = i <= g.n / 2 ? i : i - g.n;
    return 2.0 * kPi * m / g.length();
}

struct FftwPlanGuard {
    fftw_plan plan = nullptr;
    ~FftwPlanGuard() {
        if (plan) fftw_destroy_plan(plan);
    }
};

}  // namespace

double gaussian_isotropic_psd(double correlation_length, const Vec3& q) {
    return gaussian_radial(correlation_length, q.norm());
}

double exponential_isotropic_psd(double correlation_length, const Vec3& q) {
    return exponential_radial(correlation_length, q.norm());
}

RadialSpectrum RadialSpectrum::zero() { return RadialSpectrum(); }

RadialSpectrum RadialSpectrum::gaussian(double lc) {
    if (!(lc > 0.0)) throw Error(ErrorCode::InvalidArgument, "correlation length must be positive");
    RadialSpectrum s;
    s.kind_ = Kind::Gaussian;
    s.correlation_length_ = lc;
    return s;
}

RadialSpectrum RadialSpectrum::exponential(double lc) {
    if (!(lc > 0.0)) throw Error(ErrorCode::InvalidArgument, "correlation length must be positive");
    RadialSpectrum s;
    s.kind_ = Kind::Exponential;
    s.correlation_length_ = lc;
    return s;
}

RadialSpectrum RadialSpectrum::table(std::vector<double> q, std::vector<double> value) {
    if (q.size() < 2 || q.size() != value.size())
        throw Error(ErrorCode::InvalidArgument, "spectrum table needs >= 2 rows of (|q|, value)");
    for (std::size_t i = 1; i < q.size(); ++i)
        if (!(q[i] > q[i - 1])) throw Error(ErrorCode::InvalidArgument, "spectrum table |q| must increase");
    if (q.front() < 0.0) throw Error(ErrorCode::InvalidArgument, "spectrum table |q| must be >= 0");
    RadialSpectrum s;
    s.kind_ = Kind::Table;
    s.q_ = std::move(q);
    s.v_ = std::move(value);
    return s;
}

RadialSpectrum RadialSpectrum::load_csv(const std::string& path) {
    const auto rows = io::read_numeric_csv(path, 2);
    std::vector<double> q, v;
    for (const auto& r : rows) {
        q.push_back(r[0]);
        v.push_back(r[1]);
    }
    return table(std::move(q), std::move(v));
}

double RadialSpectrum::operator()(double q) const {
    switch (kind_) {
        case Kind::Zero: return 0.0;
        case Kind::Gaussian: return gaussian_radial(correlation_length_, q);
        case Kind::Exponential: return exponential_radial(correlation_length_, q);
        case Kind::Table: break;
    }
    if (q <= q_.front()) return v_.front();
    if (q > q_.back()) return 0.0;
    const auto it = std::upper_bound(q_.begin(), q_.end(), q);
    if (it == q_.end()) return v_.back();
    const std::size_t j = static_cast<std::size_t>(it - q_.begin());
    const double t = (q - q_[j - 1]) / (q_[j] - q_[j - 1]);
    return (1.0 - t) * v_[j - 1] + t * v_[j];
}

double RadialSpectrum::max_on(double lo, double hi) const {
    switch (kind_) {
        case Kind::Zero: return 0.0;
        case Kind::Gaussian:
        case Kind::Exponential: return (*this)(std::max(lo, 0.0));
        case Kind::Table: break;
    }
    double m = std::max(std::abs((*this)(lo)), std::abs((*this)(hi)));
    for (std::size_t i = 0; i < q_.size(); ++i)
        if (q_[i] >= lo && q_[i] <= hi) m = std::max(m, std::abs(v_[i]));
    return m;
}

int SpectralModel::channel_index(const std::string& name) const {
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i].name == name) return static_cast<int>(i);
    throw Error(ErrorCode::UnknownChannel, "unknown channel: " + name);
}

double SpectralModel::correlation_length() const {
    double lc = 0.0;
    for (const auto& ch : channels) lc = std::max(lc, ch.spectrum.correlation_length());
    return lc;
}

cplx SpectralModel::channel_cross_psd(int c, int cp, const Vec3& q) const {
    const int n = static_cast<int>(channels.size());
    if (c < 0 || cp < 0 || c >= n || cp >= n)
        throw Error(ErrorCode::UnknownChannel, "channel index out of range");
    const double qn = q.norm();
    if (c == cp) return channels[static_cast<std::size_t>(c)].spectrum(qn);
    const auto it = cross.find({std::min(c, cp), std::max(c, cp)});
    if (it == cross.end()) return 0.0;
    if (it->second.table) return (*it->second.table)(qn);
    const double rc = channels[static_cast<std::size_t>(c)].spectrum(qn);
    const double rcp = channels[static_cast<std::size_t>(cp)].spectrum(qn);
    return it->second.rho * std::sqrt(std::max(rc, 0.0) * std::max(rcp, 0.0));
}

cplx SpectralModel::channel_cross_psd(const std::string& c, const std::string& cp, const Vec3& q) const {
    return channel_cross_psd(channel_index(c), channel_index(cp), q);
}

CMatX SpectralModel::channel_matrix(const Vec3& q) const {
    const auto n = static_cast<Eigen::Index>(channels.size());
    CMatX m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            m(i, j) = channel_cross_psd(static_cast<int>(i), static_cast<int>(j), q);
    return m;
}

CMatX SpectralModel::scaled_channel_matrix(const Vec3& q) const {
    return sigma * sigma * channel_matrix(q);
}

CMat6 SpectralModel::fluctuation(const std::vector<double>& values) const {
    if (values.size() != channels.size())
        throw Error(ErrorCode::InvalidArgument, "one value per channel expected");
    CMat6 v = CMat6::Zero();
    for (std::size_t i = 0; i < values.size(); ++i) v += values[i] * channels[i].structure;
    return v;
}

double SpectralModel::max_eigenvalue_on(double lo, double hi) const {
    // Perron bound: lambda_max(S) <= rho(|S|) <= rho(entrywise maxima).
    const auto n = static_cast<Eigen::Index>(channels.size());
    if (n == 0) return 0.0;
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        m(i, i) = channels[static_cast<std::size_t>(i)].spectrum.max_on(lo, hi);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double v = 0.0;
            const auto it = cross.find({static_cast<int>(i), static_cast<int>(j)});
            if (it != cross.end()) {
                v = it->second.table ? it->second.table->max_on(lo, hi)
                                     : std::abs(it->second.rho) * std::sqrt(m(i, i) * m(j, j));
            }
            m(i, j) = m(j, i) = v;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return sigma * sigma * es.eigenvalues().maxCoeff();
}

void SpectralModel::validate(const CMat6& k0) const {
    if (sigma < 0.0) throw Error(ErrorCode::InvalidArgument, "amplitude sigma must be >= 0");
    for (const auto& ch : channels) {
        const CMat6 lhs = k0 * ch.structure, rhs = ch.structure.adjoint() * k0;
        if ((lhs - rhs).norm() > 1e-12 * (1.0 + lhs.norm()))
            throw Error(ErrorCode::InvalidArgument,
                        "structure map of channel '" + ch.name + "' breaks K0 V = V* K0");
    }
    for (const auto& [key, cr] : cross) {
        if (key.first >= key.second || key.second >= static_cast<int>(channels.size()))
            throw Error(ErrorCode::UnknownChannel, "cross spectrum refers to an unknown channel pair");
        if (!cr.table && std::abs(cr.rho) > 1.0)
            throw Error(ErrorCode::InvalidArgument, "correlation coefficient must satisfy |rho| <= 1");
    }
    // Bochner: the channel cross-spectral matrix must be PSD at every sampled |q|.
    const double lc = correlation_length();
    std::vector<double> radii;
    const double qmax = lc > 0.0 ? 50.0 / lc : 100.0;
    for (int i = 0; i <= 1000; ++i) radii.push_back(qmax * i / 1000.0);
    auto add_table = [&](const RadialSpectrum& s) {
        if (s.kind() == RadialSpectrum::Kind::Table) radii.insert(radii.end(), s.table_q().begin(), s.table_q().end());
    };
    for (const auto& ch : channels) add_table(ch.spectrum);
    for (const auto& [key, cr] : cross)
        if (cr.table) add_table(*cr.table);
    for (double r : radii) {
        const CMatX s = channel_matrix(Vec3(r, 0, 0));
        Eigen::SelfAdjointEigenSolver<CMatX> es(s, Eigen::EigenvaluesOnly);
        const double scale = std::max(1e-300, s.cwiseAbs().maxCoeff());
        if (es.eigenvalues().minCoeff() < -1e-12 * scale)
            throw Error(ErrorCode::InvalidArgument,
                        "cross-spectral matrix has a negative eigenvalue at |q| = " + std::to_string(r));
    }
}

bool SpectralModel::is_zero() const {
    if (sigma == 0.0) return true;
    return std::all_of(channels.begin(), channels.end(),
                       [](const Channel& c) { return c.spectrum.kind() == RadialSpectrum::Kind::Zero; });
}

SpectralModel lorentz_channels(const RadialSpectrum& eps, const RadialSpectrum& mu, double rho, double sigma) {
    SpectralModel m;
    CMat6 pe = CMat6::Zero(), pm = CMat6::Zero();
    pe.topLeftCorner<3, 3>().setIdentity();
    pm.bottomRightCorner<3, 3>().setIdentity();
    m.channels.push_back({"eps", pe, eps});
    m.channels.push_back({"mu", pm, mu});
    if (rho != 0.0) m.cross[{0, 1}] = SpectralModel::Cross{rho, std::nullopt};
    m.sigma = sigma;
    return m;
}

SpectralModel chiral_channels(double eps, double mu, const RadialSpectrum& a, const RadialSpectrum& b,
                              double rho, double sigma) {
    SpectralModel m;
    const double z0 = std::sqrt(mu / eps);
    CMat6 pb = CMat6::Zero();
    pb.topRightCorner<3, 3>() = CMat3::Identity() * cplx(0.0, z0);
    pb.bottomLeftCorner<3, 3>() = CMat3::Identity() * cplx(0.0, -1.0 / z0);
    m.channels.push_back({"a", CMat6::Identity(), a});
    m.channels.push_back({"b", pb, b});
    if (rho != 0.0) m.cross[{0, 1}] = SpectralModel::Cross{rho, std::nullopt};
    m.sigma = sigma;
    return m;
}

SpectralModel uniform_channel(const RadialSpectrum& spectrum, double sigma) {
    SpectralModel m;
    m.channels.push_back({"v", CMat6::Identity(), spectrum});
    m.sigma = sigma;
    return m;
}

Realization synthesize_realization(const SpectralModel& model, const Grid3& grid, std::uint64_t seed,
                                   bool check_resolution) {
    const double lc = model.correlation_length();
    if (check_resolution && lc > 0.0 && (grid.length() < 8.0 * lc || grid.spacing > lc / 4.0))
        throw Error(ErrorCode::GridTooCoarse, "grid must span >= 8 correlation lengths with >= 4 samples each");
    if (grid.n < 2) throw Error(ErrorCode::GridTooCoarse, "grid needs at least 2 points per axis");

    const int n = grid.n, nh = n / 2 + 1;
    const std::size_t real_size = grid.points();
    const std::size_t spec_size = static_cast<std::size_t>(n) * n * nh;
    const std::size_t nc = model.size();

    Realization out;
    out.grid = grid;
    out.seed = seed;
    out.fields.assign(nc, std::vector<double>(real_size, 0.0));
    if (nc == 0 || model.sigma == 0.0) return out;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<std::vector<std::complex<double>>> white(nc, std::vector<std::complex<double>>(spec_size));
    std::vector<double> buffer(real_size);
    std::vector<std::complex<double>> spec(spec_size);
    FftwPlanGuard fwd, inv;
    fwd.plan = fftw_plan_dft_r2c_3d(n, n, n, buffer.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                                    FFTW_ESTIMATE);
    inv.plan = fftw_plan_dft_c2r_3d(n, n, n, reinterpret_cast<fftw_complex*>(spec.data()), buffer.data(),
                                    FFTW_ESTIMATE);
    for (std::size_t c = 0; c < nc; ++c) {
        for (double& v : buffer) v = gauss(rng);
        fftw_execute(fwd.plan);
        white[c] = spec;
    }

    const double amplitude = std::pow(2.0 * kPi / grid.spacing, 1.5);
    std::vector<std::vector<std::complex<double>>> colored(nc, std::vector<std::complex<double>>(spec_size));
    CMatX z(static_cast<Eigen::Index>(nc), 1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int l = 0; l < nh; ++l) {
                const std::size_t idx = (static_cast<std::size_t>(i) * n + j) * nh + l;
                if (i == 0 && j == 0 && l == 0) continue;  // zero-mean field
                const Vec3 q(lattice_wavenumber(i, grid), lattice_wavenumber(j, grid), lattice_wavenumber(l, grid));
                const CMatX a = psd_sqrt(model.scaled_channel_matrix(q));
                for (std::size_t c = 0; c < nc; ++c) z(static_cast<Eigen::Index>(c)) = white[c][idx];
                const CMatX v = amplitude * a * z;
                for (std::size_t c = 0; c < nc; ++c) colored[c][idx] = v(static_cast<Eigen::Index>(c));
            }
        }
    }
    const double inv_n = 1.0 / static_cast<double>(real_size);
    for (std::size_t c = 0; c < nc; ++c) {
        spec = colored[c];
        fftw_execute(inv.plan);
        for (std::size_t p = 0; p < real_size; ++p) out.fields[c][p] = buffer[p] * inv_n;
    }
    return out;
}

PsdEstimate estimate_psd(const std::vector<Realization>& realizations) {
    if (realizations.empty()) throw Error(ErrorCode::EmptyInput, "at least one realization is required");
    const Grid3 grid = realizations.front().grid;
    const std::size_t nc = realizations.front().fields.size();
    for (const auto& r : realizations)
        if (r.grid.n != grid.n || r.grid.spacing != grid.spacing || r.fields.size() != nc)
            throw Error(ErrorCode::GridMismatch, "realizations must share grid and channels");

    const int n = grid.n, nh = n / 2 + 1;
    const std::size_t real_size = grid.points();
    const std::size_t spec_size = static_cast<std::size_t>(n) * n * nh;
    const double dq = 2.0 * kPi / grid.length();
    const int nbins = static_cast<int>(std::ceil(std::sqrt(3.0) * (n / 2) + 1));

    PsdEstimate est;
    est.realizations = realizations.size();
    for (int b = 0; b < nbins; ++b) est.q.push_back(b * dq);
    est.counts.assign(static_cast<std::size_t>(nbins), 0);
    est.value.assign(static_cast<std::size_t>(nbins),
                     CMatX::Zero(static_cast<Eigen::Index>(nc), static_cast<Eigen::Index>(nc)));
    if (nc == 0) return est;

    std::vector<double> buffer(real_size);
    std::vector<std::complex<double>> spec(spec_size);
    FftwPlanGuard fwd;
    fwd.plan = fftw_plan_dft_r2c_3d(n, n, n, buffer.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                                    FFTW_ESTIMATE);
    const double norm = std::pow(grid.spacing / (2.0 * kPi), 3) / static_cast<double>(real_size);

    std::vector<std::vector<std::complex<double>>> transforms(nc);
    bool first = true;
    for (const auto& r : realizations) {
        for (std::size_t c = 0; c < nc; ++c) {
            buffer = r.fields[c];
            fftw_execute(fwd.plan);
            transforms[c] = spec;
        }
        // Sum over the full lattice: half-spectrum entries with 0 < l < n/2 stand for two modes.
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                for (int l = 0; l < nh; ++l) {
                    const std::size_t idx = (static_cast<std::size_t>(i) * n + j) * nh + l;
                    const Vec3 q(lattice_wavenumber(i, grid), lattice_wavenumber(j, grid), lattice_wavenumber(l, grid));
                    const auto bin = static_cast<std::size_t>(std::lround(q.norm() / dq));
                    if (bin >= est.value.size()) continue;
                    const bool paired = l > 0 && !(n % 2 == 0 && l == n / 2);
                    const double mult = paired ? 2.0 : 1.0;
                    for (std::size_t c = 0; c < nc; ++c) {
                        for (std::size_t cp = 0; cp < nc; ++cp) {
                            const std::complex<double> p = transforms[c][idx] * std::conj(transforms[cp][idx]);
                            // The mirrored mode contributes the conjugate; pairs sum to twice the real part.
                            const std::complex<double> contrib = paired ? 2.0 * std::complex<double>(p.real(), 0.0) : p;
                            est.value[bin](static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(cp)) += contrib * norm;
                        }
                    }
                    if (first) est.counts[bin] += static_cast<std::size_t>(mult);
                }
            }
        }
        first = false;
    }
    for (std::size_t b = 0; b < est.value.size(); ++b)
        if (est.counts[b] > 0)
            est.value[b] /= static_cast<double>(est.counts[b] * realizations.size());
    return est;
}

void write_realization(const Realization& r, const SpectralModel& model, const std::string& raw_path) {
    std::vector<double> all;
    all.reserve(r.grid.points() * r.fields.size());
    nlohmann::json names = nlohmann::json::array();
    for (std::size_t c = 0; c < r.fields.size(); ++c) {
        all.insert(all.end(), r.fields[c].begin(), r.fields[c].end());
        names.push_back(c < model.channels.size() ? model.channels[c].name : std::to_string(c));
    }
    io::write_raw_f64(raw_path, all);
    nlohmann::json meta;
    meta["dtype"] = "float64";
    meta["byte_order"] = "little";
    meta["shape"] = {r.fields.size(), r.grid.n, r.grid.n, r.grid.n};
    meta["layout"] = "channel, ix, iy, iz (row-major)";
    meta["spacing"] = r.grid.spacing;
    meta["seed"] = r.seed;
    meta["channels"] = names;
    meta["convention"] = kFourierConvention;
    io::write_json(raw_path + ".json", meta);
}

}  // namespace emt
