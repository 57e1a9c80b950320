#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "emt/app.hpp"
#include "emt/error.hpp"
#include "emt/scenario.hpp"

using namespace emt;

namespace {

const char* kMinimalLorentz = R"(
[medium]
kind = "isotropic"

[spectrum]
kind = "lorentz"
)";

std::string config_error(const std::string& text) {
    try {
        parse_scenario_text(text);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigInvalid);
        return e.what();
    }
    FAIL("expected ConfigInvalid");
    return {};
}

}  // namespace

TEST_CASE("minimal Lorentz scenario gets documented defaults") {
    const RunConfig cfg = parse_scenario_text(kMinimalLorentz);
    const Scenario& sc = cfg.scenario;
    CHECK(sc.medium.family == MediumFamily::Isotropic);
    CHECK(sc.scattering());
    CHECK(sc.source.particles == 1000);
    CHECK(sc.source.mode == 1);
    CHECK(sc.numerics.seed == 0);
    CHECK(sc.numerics.workers == 1);
    CHECK(sc.numerics.batches == 16);
    CHECK(sc.numerics.horizon == doctest::Approx(1.0));
    CHECK(cfg.outputs.dir == "out");
    CHECK(cfg.canonical["spectrum"]["shape"] == "gaussian");
    CHECK(cfg.canonical["spectrum"]["sigma"] == 1.0);
    CHECK(cfg.canonical["numerics"]["seed"] == 0);
}

TEST_CASE("chirality out of range is rejected with its key path") {
    const std::string msg = config_error("[medium]\nkind = \"chiral\"\nkappa = 1.2\n");
    CHECK(msg.find("medium.kappa") != std::string::npos);
    CHECK(msg.find("chirality out of range") != std::string::npos);
}

TEST_CASE("unknown keys and bad values are rejected") {
    CHECK(config_error("[medium]\nkind = \"isotropic\"\ncolour = 3\n").find("medium.colour") != std::string::npos);
    CHECK(config_error("[sauce]\nx = 1\n").find("sauce") != std::string::npos);
    CHECK(config_error("[medium]\nkind = \"plasma\"\n").find("medium.kind") != std::string::npos);
    CHECK(config_error("[medium]\nepsilon = -1.0\n").find("medium.epsilon") != std::string::npos);
    CHECK(config_error("[numerics]\nhorizon = \"long\"\n").find("numerics.horizon") != std::string::npos);
    CHECK(config_error("[source]\nparticles = 0\n").find("source.particles") != std::string::npos);
    CHECK(config_error("schema_version = 9\n").find("schema_version") != std::string::npos);
    CHECK(config_error("[medium]\nkind = \"chiral\"\n[spectrum]\nkind = \"lorentz\"\n").find("spectrum.kind") !=
          std::string::npos);
    CHECK(config_error("[spectrum]\nkind = \"uniform\"\nshape = \"table\"\n").find("spectrum.table") !=
          std::string::npos);
}

TEST_CASE("missing seed defaults to zero and is recorded in the manifest") {
    RunConfig cfg = parse_scenario_text(kMinimalLorentz);
    REQUIRE(cfg.scenario.numerics.seed == 0);
    ManifestInfo info;
    info.subcommand = "modes";
    info.scenario_hash = scenario_hash(cfg);
    info.seed = cfg.scenario.numerics.seed;
    info.deterministic = true;
    const auto m = manifest_json(info);
    CHECK(m["seed"] == 0);
    CHECK(m["timing"]["wall_seconds"].is_null());
    CHECK(m["scenario_hash"].get<std::string>().size() == 64);

    set_seed(cfg, 42);
    CHECK(cfg.scenario.numerics.seed == 42);
    CHECK(cfg.canonical["numerics"]["seed"] == 42);
}

TEST_CASE("scenario hash tracks semantic content only") {
    const std::string base = scenario_hash(parse_scenario_text(kMinimalLorentz));

    // Reordering, whitespace, comments and explicit defaults are not semantic.
    const char* same = R"(
# comment
[spectrum]
kind   = "lorentz"
sigma  = 1.0
[medium]
kind = "isotropic"
epsilon = 1.0
[numerics]
seed = 0
workers = 8
[outputs]
dir = "elsewhere"
)";
    CHECK(scenario_hash(parse_scenario_text(same)) == base);

    RunConfig workers = parse_scenario_text(kMinimalLorentz);
    set_workers(workers, 4);
    CHECK(scenario_hash(workers) == base);

    CHECK(scenario_hash(parse_scenario_text(std::string(kMinimalLorentz) + "sigma = 0.5\n")) != base);
    CHECK(scenario_hash(parse_scenario_text(std::string(kMinimalLorentz) + "[numerics]\nseed = 3\n")) != base);
    RunConfig seeded = parse_scenario_text(kMinimalLorentz);
    set_seed(seeded, 3);
    CHECK(scenario_hash(seeded) == scenario_hash(parse_scenario_text(std::string(kMinimalLorentz) + "[numerics]\nseed = 3\n")));
}

TEST_CASE("table spectra hash the file contents, not the path") {
    const auto dir = std::filesystem::temp_directory_path() / "emt_table_hash";
    std::filesystem::create_directories(dir);
    const auto write = [&](const char* name, const char* body) {
        std::ofstream(dir / name) << body;
    };
    write("a.csv", "q,phi\n0,1\n1,0.5\n4,0.1\n");
    write("b.csv", "q,phi\n0,1\n1,0.5\n4,0.1\n");
    write("c.csv", "q,phi\n0,1\n1,0.4\n4,0.1\n");
    const auto cfg = [&](const char* file) {
        return scenario_hash(parse_scenario_text(
            std::string("[spectrum]\nkind = \"lorentz\"\nshape = \"table\"\ntable = \"") + file + "\"\n", dir.string()));
    };
    CHECK(cfg("a.csv") == cfg("b.csv"));
    CHECK(cfg("a.csv") != cfg("c.csv"));
}

TEST_CASE("file-based parsing requires an existing file") {
    CHECK_THROWS_AS(parse_scenario("/nonexistent/scenario.toml"), Error);
}
