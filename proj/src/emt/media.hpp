#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "emt/error.hpp"
#include "emt/types.hpp"

namespace emt {

// Fourier convention: R_hat(q) = (2 pi)^-3 Int exp(-i q.y) R(y) dy, with R(0) = 1.
inline constexpr const char* kFourierConvention = "Rhat(q)=(2pi)^-3*int(exp(-iqy)R(y)dy),R(0)=1";

double gaussian_isotropic_psd(double correlation_length, const Vec3& q);
double exponential_isotropic_psd(double correlation_length, const Vec3& q);

// Radial (isotropic) power spectrum.
class RadialSpectrum {
public:
    enum class Kind { Zero, Gaussian, Exponential, Table };

    RadialSpectrum() = default;
    static RadialSpectrum zero();
    static RadialSpectrum gaussian(double correlation_length);
    static RadialSpectrum exponential(double correlation_length);
    // Linear interpolation in |q|; zero beyond the last row.
    static RadialSpectrum table(std::vector<double> q, std::vector<double> value);
    static RadialSpectrum load_csv(const std::string& path);

    double operator()(double q) const;
    double at(const Vec3& q) const { return (*this)(q.norm()); }
    // Upper bound of the spectrum for |q| in [lo, hi].
    double max_on(double lo, double hi) const;

    Kind kind() const { return kind_; }
    double correlation_length() const { return correlation_length_; }
    const std::vector<double>& table_q() const { return q_; }
    const std::vector<double>& table_value() const { return v_; }

private:
    Kind kind_ = Kind::Zero;
    double correlation_length_ = 0.0;
    std::vector<double> q_, v_;
};

struct SpectralModel {
    struct Channel {
        std::string name;
        CMat6 structure = CMat6::Zero();
        RadialSpectrum spectrum;
    };
    // Cross-spectrum of a channel pair: rho * sqrt(R_c R_c') or an explicit radial table.
    struct Cross {
        double rho = 0.0;
        std::optional<RadialSpectrum> table;
    };

    std::vector<Channel> channels;
    std::map<std::pair<int, int>, Cross> cross;  // keyed with first < second
    double sigma = 1.0;

    int channel_index(const std::string& name) const;
    std::size_t size() const { return channels.size(); }
    double correlation_length() const;

    cplx channel_cross_psd(int c, int cp, const Vec3& q) const;
    cplx channel_cross_psd(const std::string& c, const std::string& cp, const Vec3& q) const;
    CMatX channel_matrix(const Vec3& q) const;         // normalized spectra
    CMatX scaled_channel_matrix(const Vec3& q) const;  // sigma^2 * channel_matrix
    CMat6 fluctuation(const std::vector<double>& values) const;  // V = sum_c v_c P_c

    // Largest eigenvalue of the scaled channel matrix for |q| in [lo, hi].
    double max_eigenvalue_on(double lo, double hi) const;

    // Structure maps satisfy K0 P = P* K0; channel matrix PSD at sampled |q| (Bochner).
    void validate(const CMat6& k0) const;
    bool is_zero() const;
};

SpectralModel lorentz_channels(const RadialSpectrum& eps, const RadialSpectrum& mu, double rho,
                               double sigma);
SpectralModel chiral_channels(double eps, double mu, const RadialSpectrum& a, const RadialSpectrum& b,
                              double rho, double sigma);
SpectralModel uniform_channel(const RadialSpectrum& spectrum, double sigma);

struct Grid3 {
    int n = 32;           // points per axis (periodic cube)
    double spacing = 1.0;
    double length() const { return n * spacing; }
    std::size_t points() const { return static_cast<std::size_t>(n) * n * n; }
};

struct Realization {
    Grid3 grid;
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> fields;  // per channel, row-major (ix, iy, iz)
};

Realization synthesize_realization(const SpectralModel& model, const Grid3& grid, std::uint64_t seed,
                                   bool check_resolution = true);

struct PsdEstimate {
    std::vector<double> q;                // radial bin centers
    std::vector<std::size_t> counts;      // lattice modes per bin and realization
    std::vector<CMatX> value;             // channel cross-spectral matrix per bin
    std::size_t realizations = 0;
};

PsdEstimate estimate_psd(const std::vector<Realization>& realizations);

void write_realization(const Realization& r, const SpectralModel& model, const std::string& raw_path);

}  // namespace emt
