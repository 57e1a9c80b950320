#include "emtransport/emtransport.h"

#include <cstring>
#include <exception>
#include <string>

#include "emt/app.hpp"
#include "emt/io.hpp"

struct emt_scenario {
    emt::RunConfig config;
};

struct emt_histogram {
    emt::PhaseSpaceHistogram hist;
};

struct emt_run {
    emt::RunResult result;
    emt_histogram histogram;
};

namespace {

thread_local std::string g_last_error;

template <class F>
int guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return EMT_OK;
    } catch (const emt::Error& e) {
        g_last_error = e.what();
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return EMT_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return EMT_ERR_INTERNAL;
    }
}

int null_argument(const char* what) {
    g_last_error = std::string("null argument: ") + what;
    return EMT_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* emt_version(void) { return emt::kToolVersion; }

const char* emt_error_name(int code) {
    if (code == EMT_ERR_INTERNAL) return "Internal";
    return emt::error_name(static_cast<emt::ErrorCode>(code));
}

const char* emt_last_error(void) { return g_last_error.c_str(); }

int emt_scenario_load(const char* path, emt_scenario** out) {
    if (!path || !out) return null_argument("path/out");
    *out = nullptr;
    return guarded([&] { *out = new emt_scenario{emt::parse_scenario(path)}; });
}

int emt_scenario_parse(const char* toml_text, const char* base_dir, emt_scenario** out) {
    if (!toml_text || !out) return null_argument("text/out");
    *out = nullptr;
    return guarded([&] { *out = new emt_scenario{emt::parse_scenario_text(toml_text, base_dir ? base_dir : ".")}; });
}

void emt_scenario_free(emt_scenario* scenario) { delete scenario; }

int emt_scenario_set_seed(emt_scenario* scenario, uint64_t seed) {
    if (!scenario) return null_argument("scenario");
    return guarded([&] { emt::set_seed(scenario->config, seed); });
}

int emt_scenario_set_workers(emt_scenario* scenario, int workers) {
    if (!scenario) return null_argument("scenario");
    return guarded([&] { emt::set_workers(scenario->config, workers); });
}

int emt_scenario_seed(const emt_scenario* scenario, uint64_t* seed) {
    if (!scenario || !seed) return null_argument("scenario/seed");
    *seed = scenario->config.scenario.numerics.seed;
    return EMT_OK;
}

int emt_scenario_workers(const emt_scenario* scenario, int* workers) {
    if (!scenario || !workers) return null_argument("scenario/workers");
    *workers = scenario->config.scenario.numerics.workers;
    return EMT_OK;
}

int emt_scenario_hash(const emt_scenario* scenario, char* buffer, size_t capacity) {
    if (!scenario || !buffer) return null_argument("scenario/buffer");
    return guarded([&] {
        const std::string h = emt::scenario_hash(scenario->config);
        if (capacity < h.size() + 1) throw emt::Error(emt::ErrorCode::InvalidArgument, "hash buffer too small");
        std::memcpy(buffer, h.c_str(), h.size() + 1);
    });
}

const char* emt_scenario_output_dir(const emt_scenario* scenario) {
    return scenario ? scenario->config.outputs.dir.c_str() : nullptr;
}

int emt_modes(const emt_scenario* scenario, const double x[3], const double k[3], double* omegas, size_t capacity,
              size_t* count) {
    if (!scenario || !x || !k || !count) return null_argument("scenario/x/k/count");
    return guarded([&] {
        const emt::ModeDecomposition d =
            emt::decompose(scenario->config.scenario.medium, emt::Vec3(x[0], x[1], x[2]), emt::Vec3(k[0], k[1], k[2]));
        const auto values = d.eigenvalues();
        *count = values.size();
        if (omegas && capacity < values.size())
            throw emt::Error(emt::ErrorCode::InvalidArgument, "eigenvalue buffer too small");
        if (omegas)
            for (std::size_t i = 0; i < values.size(); ++i) omegas[i] = values[i];
    });
}

int emt_run_subcommand(const emt_scenario* scenario, const char* subcommand, const char* out_dir, emt_run** out) {
    if (!scenario || !subcommand || !out) return null_argument("scenario/subcommand/out");
    *out = nullptr;
    return guarded([&] {
        const std::string cmd(subcommand);
        const std::string dir = out_dir ? out_dir : scenario->config.outputs.dir;
        const emt::RunConfig& cfg = scenario->config;
        auto* run = new emt_run{};
        try {
            if (cmd == "modes") run->result = emt::run_modes(cfg, dir);
            else if (cmd == "trace") run->result = emt::run_trace(cfg, dir);
            else if (cmd == "xsection") run->result = emt::run_xsection(cfg, dir);
            else if (cmd == "rte") run->result = emt::run_rte(cfg, dir);
            else if (cmd == "wigner") run->result = emt::run_wigner(cfg, dir);
            else throw emt::Error(emt::ErrorCode::InvalidArgument, "unknown subcommand: " + cmd);
        } catch (...) {
            delete run;
            throw;
        }
        if (run->result.histogram) run->histogram.hist = *run->result.histogram;
        *out = run;
    });
}

void emt_run_free(emt_run* run) { delete run; }

const char* emt_run_summary(const emt_run* run) { return run ? run->result.summary.c_str() : nullptr; }

size_t emt_run_output_count(const emt_run* run) { return run ? run->result.outputs.size() : 0; }

const char* emt_run_output(const emt_run* run, size_t index) {
    if (!run || index >= run->result.outputs.size()) return nullptr;
    return run->result.outputs[index].c_str();
}

const emt_histogram* emt_run_histogram(const emt_run* run) {
    return (run && run->result.histogram) ? &run->histogram : nullptr;
}

int emt_histogram_totals(const emt_histogram* hist, double* total_weight, double* batch_error,
                         double* escaped_weight) {
    if (!hist) return null_argument("histogram");
    if (total_weight) *total_weight = hist->hist.total_weight;
    if (batch_error) *batch_error = hist->hist.total_error;
    if (escaped_weight) *escaped_weight = hist->hist.escaped_weight;
    return EMT_OK;
}

size_t emt_histogram_bin_count(const emt_histogram* hist) { return hist ? hist->hist.bins.size() : 0; }

int emt_write_manifest(const emt_scenario* scenario, const emt_run* run, const char* subcommand, int deterministic,
                       double wall_seconds, const char* started_utc, const char* path) {
    if (!scenario || !run || !subcommand || !path) return null_argument("scenario/run/subcommand/path");
    return guarded([&] {
        emt::ManifestInfo info;
        info.subcommand = subcommand;
        info.scenario_hash = emt::scenario_hash(scenario->config);
        info.seed = scenario->config.scenario.numerics.seed;
        info.workers = scenario->config.scenario.numerics.workers;
        info.deterministic = deterministic != 0;
        info.wall_seconds = wall_seconds;
        if (started_utc) info.started_utc = std::string(started_utc);
        info.outputs = run->result.outputs;
        emt::io::write_json(path, emt::manifest_json(info));
    });
}

}  // extern "C"
