#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emt/scenario.hpp"

namespace emt {

struct RunResult {
    std::vector<std::string> outputs;  // files written, in order
    std::string summary;               // human-readable stdout text
    std::optional<PhaseSpaceHistogram> histogram;
};

RunResult run_modes(const RunConfig& cfg, const std::string& out_dir);
RunResult run_trace(const RunConfig& cfg, const std::string& out_dir);
RunResult run_xsection(const RunConfig& cfg, const std::string& out_dir);
RunResult run_rte(const RunConfig& cfg, const std::string& out_dir);
RunResult run_wigner(const RunConfig& cfg, const std::string& out_dir);

struct ManifestInfo {
    std::string subcommand;
    std::string scenario_hash;
    std::uint64_t seed = 0;
    int workers = 1;
    bool deterministic = false;
    std::optional<double> wall_seconds;
    std::optional<std::string> started_utc;
    std::vector<std::string> outputs;
};

// Timing fields are null in deterministic mode; every output is listed with its SHA-256.
nlohmann::json manifest_json(const ManifestInfo& info);

}  // namespace emt
