#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "emtransport/emtransport.h"

namespace {

const std::set<std::string> kSubcommands{"modes", "trace", "xsection", "rte", "wigner"};

const char* kUsage =
    "usage: emt <subcommand> --config FILE [--seed N] [--workers N] [--out DIR] [--deterministic]\n"
    "subcommands:\n"
    "  modes     eigenvalues and eigenvectors of the dispersion matrix at the probe point\n"
    "  trace     integrate rays and dump trajectories as CSV\n"
    "  xsection  tabulate differential and total cross-sections\n"
    "  rte       Monte Carlo radiative transfer run\n"
    "  wigner    Wigner-transform lab checks\n";

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out;
    bool deterministic = false;
};

int fail(int code) {
    std::cerr << "error: " << emt_error_name(code) << ": " << emt_last_error() << "\n";
    return 1;
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

int run(const std::string& subcommand, const Options& opt) {
    emt_scenario* sc = nullptr;
    if (int rc = emt_scenario_load(opt.config.c_str(), &sc); rc != EMT_OK) return fail(rc);
    struct Guard {
        emt_scenario* s;
        emt_run* r = nullptr;
        ~Guard() {
            emt_run_free(r);
            emt_scenario_free(s);
        }
    } guard{sc};
    if (opt.seed)
        if (int rc = emt_scenario_set_seed(sc, *opt.seed); rc != EMT_OK) return fail(rc);
    if (opt.workers)
        if (int rc = emt_scenario_set_workers(sc, *opt.workers); rc != EMT_OK) return fail(rc);
    const std::string out = opt.out.empty() ? std::string(emt_scenario_output_dir(sc)) : opt.out;

    const std::string started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    if (int rc = emt_run_subcommand(sc, subcommand.c_str(), out.c_str(), &guard.r); rc != EMT_OK) return fail(rc);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::cout << emt_run_summary(guard.r);
    const std::string manifest = (std::filesystem::path(out) / (subcommand + "_manifest.json")).string();
    if (int rc = emt_write_manifest(sc, guard.r, subcommand.c_str(), opt.deterministic ? 1 : 0, wall,
                                    started.c_str(), manifest.c_str());
        rc != EMT_OK)
        return fail(rc);
    for (std::size_t i = 0; i < emt_run_output_count(guard.r); ++i) std::cout << "wrote " << emt_run_output(guard.r, i) << "\n";
    std::cout << "manifest " << manifest << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << kUsage;
        return 2;
    }
    const std::string first = argv[1];
    if (first == "-h" || first == "--help") {
        std::cout << kUsage;
        return 0;
    }
    if (first == "--version") {
        std::cout << "emt " << emt_version() << "\n";
        return 0;
    }
    if (!kSubcommands.count(first)) {
        std::cerr << "unknown subcommand: " << first << "\n" << kUsage;
        return 2;
    }

    CLI::App app{"Electromagnetic wave transport in random bianisotropic media", "emt"};
    app.require_subcommand(1);
    Options opt;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string chosen;
    for (const auto& name : kSubcommands) {
        CLI::App* sub = app.add_subcommand(name, "");
        sub->add_option("--config", opt.config, "scenario file (TOML)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "master seed (overrides numerics.seed)");
        sub->add_option("--workers", workers, "worker threads (overrides numerics.workers)")->check(CLI::PositiveNumber);
        sub->add_option("--out", opt.out, "output directory (overrides outputs.dir)");
        sub->add_flag("--deterministic", opt.deterministic, "omit timing from the manifest");
        sub->callback([&chosen, name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    CLI::App* sub = app.get_subcommand(chosen);
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--workers")) opt.workers = workers;
    return run(chosen, opt);
}
