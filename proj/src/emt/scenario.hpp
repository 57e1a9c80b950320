#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "emt/rte.hpp"

namespace emt {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

// Point queries used by `modes`, `trace` and `xsection`.
struct ProbeSpec {
    Vec3 x = Vec3::Zero();
    Vec3 k = Vec3::UnitZ();
    std::vector<double> k_norms{1.0};
    int rays = 8;
    int angles = 32;  // polar samples of the differential cross-section
};

struct WignerSpec {
    double epsilon = 1.0 / 32.0;
    double length = 4.0;
    int cells_per_epsilon = 4;
    double packet_width = 0.2;
    double k0 = 2.0;  // snapped to the nearest k-grid value
    double speed = 1.0;
    double time = 1.0;
    int lebedev_points = 50;
};

struct OutputSpec {
    std::string dir = "out";
    std::string prefix = "emt";
};

struct RunConfig {
    Scenario scenario;
    ProbeSpec probe;
    WignerSpec wigner;
    OutputSpec outputs;
    nlohmann::json canonical;  // fully defaulted semantic content
};

// Throws ConfigInvalid("<key path>: <reason>").
RunConfig parse_scenario(const std::string& path);
RunConfig parse_scenario_text(const std::string& text, const std::string& base_dir = ".");

// Overrides from the command line keep `canonical` in sync.
void set_seed(RunConfig& cfg, std::uint64_t seed);
void set_workers(RunConfig& cfg, int workers);

// SHA-256 of the canonical JSON (outputs and worker count excluded).
std::string scenario_hash(const RunConfig& cfg);

}  // namespace emt
