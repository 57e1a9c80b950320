#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "emt/dispersion.hpp"
#include "emt/media.hpp"
#include "emt/raytrace.hpp"
#include "emt/scattering.hpp"

namespace emt {

struct SourceSpec {
    enum class Position { Point, Gaussian, Box };
    enum class Direction { Fixed, Isotropic };

    Position position = Position::Point;
    Vec3 center = Vec3::Zero();
    double spread = 0.0;  // Gaussian standard deviation or box half-width
    Direction direction = Direction::Fixed;
    Vec3 k = Vec3::UnitZ();  // fixed wavevector; only |k| is used for isotropic sources
    int mode = 1;
    CMatX coherence;  // empty: I / A
    std::size_t particles = 1000;
};

// Bins over x-cells of `region`, (cos theta, phi) about the global z axis, and |k|.
struct BinSpec {
    Box region{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
    std::array<int, 3> x_cells{1, 1, 1};
    int theta_cells = 1;
    int phi_cells = 1;
    double k_min = 0.0;
    double k_max = 1e300;
    int k_cells = 1;

    int x_count() const { return x_cells[0] * x_cells[1] * x_cells[2]; }
    std::uint64_t per_mode() const;
    double cell_volume() const;
};

struct MonteCarloNumerics {
    double horizon = 1.0;
    double dt = 0.01;  // RK4 step for heterogeneous media
    ShellOptions shell;
    std::uint64_t seed = 0;
    int workers = 1;
    int batches = 16;
};

struct Scenario {
    OpticalResponse medium = OpticalResponse::isotropic(1.0, 1.0);
    SpectralModel spectrum;  // empty or zero: no scattering
    Box domain{Vec3::Constant(-1e6), Vec3::Constant(1e6)};
    SourceSpec source;
    MonteCarloNumerics numerics;
    BinSpec bins;

    bool scattering() const { return !spectrum.channels.empty() && !spectrum.is_zero(); }
    void validate() const;  // ConfigInvalid with the offending field
};

struct BinIndex {
    int mode = 0;
    std::array<int, 3> cell{0, 0, 0};
    int theta = 0;
    int phi = 0;
    int k = 0;
};

struct BinData {
    CMatX coherence;  // sum of weight * w
    double trace = 0.0;
    std::size_t count = 0;
    Vec3 flux = Vec3::Zero();  // sum of weight * tr w * group velocity
    std::vector<double> batch_trace;
    double error = 0.0;  // batch-mean standard error of `trace`
};

struct PhaseSpaceHistogram {
    BinSpec spec;
    std::map<std::uint64_t, BinData> bins;
    std::size_t particles = 0;
    std::size_t batches = 0;
    std::uint64_t seed = 0;
    double total_weight = 0.0;     // binned plus unbinned
    double total_error = 0.0;
    double unbinned_weight = 0.0;  // inside the domain, outside the bins
    double escaped_weight = 0.0;
    std::size_t absorbed = 0;
    std::size_t scatter_events = 0;
    std::vector<double> batch_totals;

    std::uint64_t key(const BinIndex& b) const;
    BinIndex index(std::uint64_t key) const;
    Vec3 cell_center(const BinIndex& b) const;
    double trace_of(const BinIndex& b) const;
};

// (2/A) tr Re(Sigma).
double scattering_rate(const CMatX& sigma);

// Exponential(rate); +inf when rate == 0.
double sample_free_flight(double rate, std::mt19937_64& rng);

struct CollisionState {
    struct Channel {
        int beta = 0;
        double radius = 0.0;
        double jacobian = 0.0;
        double envelope = 0.0;  // bound on tr(sigma:w) * jacobian over the shell
        int target = -1;
    };
    int mode = 0;
    double k_norm = 0.0;
    double omega = 0.0;
    CMatX sigma;
    double rate = 0.0;
    std::vector<Channel> channels;
    double envelope_total = 0.0;
};

struct ScatterOutcome {
    int mode = 0;
    int state = -1;
    Vec3 k = Vec3::Zero();
    CMatX w;
    double weight_factor = 1.0;
    long trials = 0;
};

// Elastic shell sampler for homogeneous isotropic or chiral media.
class ShellSampler {
public:
    ShellSampler(const OpticalResponse& medium, const SpectralModel& model, const ShellOptions& opts);

    // Registers (mode, |k|) and every state reachable from it; not thread-safe.
    int prepare(int mode, double k_norm);
    int find(int mode, double k_norm) const;
    const CollisionState& state(int id) const { return states_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return states_.size(); }

    // Draws (beta, p) with density tr(sigma_{beta alpha}(p,k):w) dmu(p).
    ScatterOutcome scatter(int id, const Vec3& k, const CMatX& w, std::mt19937_64& rng) const;

    // Shell quadrature of sum_beta tr(sigma_{beta alpha}(p,k):w) dmu(p).
    double gain_integral(int mode, const Vec3& k, const CMatX& w) const;

private:
    const OpticalResponse& medium_;
    const SpectralModel& model_;
    ShellOptions opts_;
    std::vector<CollisionState> states_;
};

PhaseSpaceHistogram run_simulation(const Scenario& scenario);

// exp(-Gamma t) rho(x -/+ c0 khat t) w_I for a Gaussian or box source in a homogeneous Lorentz medium.
CMatX analytic_lorentz_solution(const Vec3& x, const Vec3& k, double t, const Scenario& scenario);

// Deterministic histogram of the sigma = 0 problem by quadrature over the source (homogeneous media).
PhaseSpaceHistogram ballistic_histogram(const Scenario& scenario, int order = 24);

// Sum_bins |a - b| / Sum_bins |b| over bin traces.
double l1_distance(const PhaseSpaceHistogram& a, const PhaseSpaceHistogram& b);

struct FieldEstimate {
    BinSpec spec;
    std::vector<double> energy;  // per x-cell, 1/2 sum tr w
    std::vector<Vec3> flux;      // per x-cell, 1/2 sum tr w v_g
    std::vector<double> energy_error;
};

FieldEstimate estimate_fields(const PhaseSpaceHistogram& hist, const std::vector<int>& modes = {});

// CSV (bin centers, mode, tr w, error) plus raw float64 rows with a JSON sidecar.
void write_histogram(const PhaseSpaceHistogram& hist, const std::string& csv_path, const std::string& raw_path,
                     const std::string& scenario_hash);

}  // namespace emt
