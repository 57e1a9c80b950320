#include "emt/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "emt/io.hpp"

namespace emt {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& path, const std::string& reason) {
    throw Error(ErrorCode::ConfigInvalid, path + ": " + reason);
}

// One TOML table: typed reads with defaults, recorded into the canonical JSON; unknown keys rejected.
class Section {
public:
    Section(const toml::table* table, std::string path, json& out) : table_(table), path_(std::move(path)), out_(out) {}

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return table_ && table_->contains(key); }

    double number(const std::string& key, double fallback) {
        double v = fallback;
        if (const toml::node* n = node(key)) {
            if (auto d = n->value<double>()) v = *d;
            else invalid(key_path(key), "expected a number");
        }
        out_[key] = v;
        return v;
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        std::int64_t v = fallback;
        if (const toml::node* n = node(key)) {
            if (auto i = n->as_integer()) v = i->get();
            else invalid(key_path(key), "expected an integer");
        }
        out_[key] = v;
        return v;
    }

    std::string text(const std::string& key, const std::string& fallback, const std::set<std::string>& allowed = {}) {
        std::string v = fallback;
        if (const toml::node* n = node(key)) {
            if (auto s = n->value<std::string>()) v = *s;
            else invalid(key_path(key), "expected a string");
        }
        if (!allowed.empty() && !allowed.count(v)) {
            std::string opts;
            for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
            invalid(key_path(key), "must be one of {" + opts + "}, got \"" + v + "\"");
        }
        out_[key] = v;
        return v;
    }

    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback, std::size_t size = 0) {
        std::vector<double> v = fallback;
        if (const toml::node* n = node(key)) {
            const toml::array* arr = n->as_array();
            if (!arr) invalid(key_path(key), "expected an array of numbers");
            v.clear();
            for (const toml::node& e : *arr) {
                auto d = e.value<double>();
                if (!d) invalid(key_path(key), "expected an array of numbers");
                v.push_back(*d);
            }
        }
        if (size && v.size() != size) invalid(key_path(key), "expected " + std::to_string(size) + " entries");
        out_[key] = v;
        return v;
    }

    Vec3 vec3(const std::string& key, const Vec3& fallback) {
        const auto v = numbers(key, {fallback.x(), fallback.y(), fallback.z()}, 3);
        return {v[0], v[1], v[2]};
    }

    Mat3 mat3(const std::string& key, const Mat3& fallback) {
        Mat3 m = fallback;
        if (const toml::node* n = node(key)) {
            const toml::array* rows = n->as_array();
            if (!rows || rows->size() != 3) invalid(key_path(key), "expected a 3x3 array");
            for (std::size_t i = 0; i < 3; ++i) {
                const toml::array* row = (*rows)[i].as_array();
                if (!row || row->size() != 3) invalid(key_path(key), "expected a 3x3 array");
                for (std::size_t j = 0; j < 3; ++j) {
                    auto d = (*row)[j].value<double>();
                    if (!d) invalid(key_path(key), "expected numeric entries");
                    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *d;
                }
            }
        }
        json rows = json::array();
        for (int i = 0; i < 3; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
        out_[key] = rows;
        return m;
    }

    Section child(const std::string& key) {
        used_.insert(key);
        const toml::table* sub = nullptr;
        if (table_ && table_->contains(key)) {
            sub = table_->get(key)->as_table();
            if (!sub) invalid(key_path(key), "expected a table");
        }
        return Section(sub, key_path(key), out_[key]);
    }

    void finish() const {
        if (!table_) return;
        for (const auto& [k, v] : *table_) {
            const std::string name(k.str());
            if (!used_.count(name)) invalid(key_path(name), "unknown key");
        }
    }

private:
    const toml::node* node(const std::string& key) {
        used_.insert(key);
        return table_ ? table_->get(key) : nullptr;
    }

    const toml::table* table_;
    std::string path_;
    json& out_;
    std::set<std::string> used_;
};

RadialSpectrum radial(Section& s, const std::string& base_dir, json& canonical) {
    const std::string shape = s.text("shape", "gaussian", {"gaussian", "exponential", "table"});
    if (shape == "table") {
        const std::string rel = s.text("table", "");
        if (rel.empty()) invalid(s.key_path("table"), "a table spectrum needs a CSV path");
        const std::filesystem::path p = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel)
                                                                                 : std::filesystem::path(base_dir) / rel;
        try {
            RadialSpectrum r = RadialSpectrum::load_csv(p.string());
            // The hash tracks the table contents rather than its location.
            canonical["table"] = io::sha256_file(p.string());
            return r;
        } catch (const Error& e) {
            invalid(s.key_path("table"), e.what());
        }
    }
    const double lc = s.number("correlation_length", 1.0);
    if (!(lc > 0.0)) invalid(s.key_path("correlation_length"), "must be positive");
    return shape == "gaussian" ? RadialSpectrum::gaussian(lc) : RadialSpectrum::exponential(lc);
}

void parse_medium(Section m, Scenario& sc) {
    const std::string kind = m.text("kind", "isotropic", {"isotropic", "lorentz", "chiral", "generic"});
    OpticalResponse r;
    if (kind == "generic") {
        const Mat3 eps = m.mat3("permittivity", Mat3::Identity());
        const Mat3 mu = m.mat3("permeability", Mat3::Identity());
        const Mat3 xr = m.mat3("magnetoelectric_re", Mat3::Zero());
        const Mat3 xi = m.mat3("magnetoelectric_im", Mat3::Zero());
        r = OpticalResponse::generic(eps.cast<cplx>(), mu.cast<cplx>(), xr.cast<cplx>() + kI * xi.cast<cplx>());
    } else {
        const double eps = m.number("epsilon", 1.0);
        const double mu = m.number("mu", 1.0);
        if (!(eps > 0.0)) invalid(m.key_path("epsilon"), "must be positive");
        if (!(mu > 0.0)) invalid(m.key_path("mu"), "must be positive");
        if (kind == "chiral") {
            const double kappa = m.number("kappa", 0.0);
            if (!(std::abs(kappa) < 1.0)) invalid(m.key_path("kappa"), "chirality out of range (|kappa| < 1)");
            r = OpticalResponse::chiral(eps, mu, kappa);
        } else if (kind == "lorentz") {
            const double wp = m.number("omega_p", 0.0), w0 = m.number("omega_0", 0.0), g = m.number("gamma", 0.0);
            if (wp < 0.0 || w0 < 0.0 || g < 0.0) invalid(m.key_path("omega_p"), "Lorentz parameters must be nonnegative");
            r = OpticalResponse::lorentz(eps, mu, wp, w0, g);
        } else {
            r = OpticalResponse::isotropic(eps, mu);
        }
    }
    Section prof = m.child("profile");
    r.profile.gradient = prof.vec3("gradient", Vec3::Zero());
    r.profile.origin = prof.vec3("origin", Vec3::Zero());
    prof.finish();
    m.finish();
    try {
        r.validate();
    } catch (const Error& e) {
        invalid("medium", e.what());
    }
    sc.medium = r;
}

void parse_spectrum(Section s, Scenario& sc, const std::string& base_dir, json& canonical) {
    const std::string kind = s.text("kind", "none", {"none", "lorentz", "chiral", "uniform"});
    if (kind == "none") {
        s.finish();
        sc.spectrum = SpectralModel{};
        return;
    }
    const double sigma = s.number("sigma", 1.0);
    if (!(sigma >= 0.0)) invalid(s.key_path("sigma"), "must be nonnegative");
    const RadialSpectrum shape = radial(s, base_dir, canonical);
    if (kind == "uniform") {
        sc.spectrum = uniform_channel(shape, sigma);
    } else {
        const double rho = s.number("rho", 0.0);
        if (!(std::abs(rho) <= 1.0)) invalid(s.key_path("rho"), "correlation coefficient must satisfy |rho| <= 1");
        if (kind == "lorentz") {
            if (sc.medium.family != MediumFamily::Isotropic) invalid(s.key_path("kind"), "lorentz channels need an isotropic medium");
            sc.spectrum = lorentz_channels(shape, shape, rho, sigma);
        } else {
            if (sc.medium.family != MediumFamily::Chiral) invalid(s.key_path("kind"), "chiral channels need a chiral medium");
            sc.spectrum = chiral_channels(sc.medium.eps_scalar(), sc.medium.mu_scalar(), shape, shape, rho, sigma);
        }
    }
    s.finish();
}

void parse_source(Section s, Scenario& sc) {
    SourceSpec& src = sc.source;
    const std::string pos = s.text("position", "point", {"point", "gaussian", "box"});
    src.position = pos == "point" ? SourceSpec::Position::Point
                 : pos == "gaussian" ? SourceSpec::Position::Gaussian
                                     : SourceSpec::Position::Box;
    src.center = s.vec3("center", Vec3::Zero());
    src.spread = s.number("spread", 0.0);
    const std::string dir = s.text("direction", "fixed", {"fixed", "isotropic"});
    src.direction = dir == "fixed" ? SourceSpec::Direction::Fixed : SourceSpec::Direction::Isotropic;
    src.k = s.vec3("k", Vec3::UnitZ());
    src.mode = static_cast<int>(s.integer("mode", 1));
    const std::int64_t n = s.integer("particles", 1000);
    if (n < 1) invalid(s.key_path("particles"), "must be at least 1");
    src.particles = static_cast<std::size_t>(n);
    s.finish();
}

void parse_numerics(Section s, Scenario& sc) {
    MonteCarloNumerics& nm = sc.numerics;
    nm.horizon = s.number("horizon", 1.0);
    nm.dt = s.number("dt", 0.01);
    nm.shell.order_theta = static_cast<int>(s.integer("order_theta", 64));
    nm.shell.order_phi = static_cast<int>(s.integer("order_phi", 128));
    if (nm.shell.order_theta < 2 || nm.shell.order_phi < 2) invalid(s.key_path("order_theta"), "quadrature orders must be >= 2");
    const std::int64_t seed = s.integer("seed", 0);
    if (seed < 0) invalid(s.key_path("seed"), "must be nonnegative");
    nm.seed = static_cast<std::uint64_t>(seed);
    nm.workers = static_cast<int>(s.integer("workers", 1));
    nm.batches = static_cast<int>(s.integer("batches", 16));
    s.finish();
}

void parse_estimator(Section s, Scenario& sc) {
    BinSpec& b = sc.bins;
    b.region.lo = s.vec3("region_lo", Vec3::Constant(-1.0));
    b.region.hi = s.vec3("region_hi", Vec3::Constant(1.0));
    const auto cells = s.numbers("x_cells", {1, 1, 1}, 3);
    for (int d = 0; d < 3; ++d) b.x_cells[static_cast<std::size_t>(d)] = static_cast<int>(cells[static_cast<std::size_t>(d)]);
    b.theta_cells = static_cast<int>(s.integer("theta_cells", 1));
    b.phi_cells = static_cast<int>(s.integer("phi_cells", 1));
    b.k_min = s.number("k_min", 0.0);
    b.k_max = s.number("k_max", 1e300);
    b.k_cells = static_cast<int>(s.integer("k_cells", 1));
    s.finish();
}

}  // namespace

RunConfig parse_scenario_text(const std::string& text, const std::string& base_dir) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "line " << e.source().begin.line << ": " << e.description();
        invalid("<file>", msg.str());
    }
    RunConfig cfg;
    json doc;
    Section top(&root, "", doc);
    const std::int64_t version = top.integer("schema_version", kSchemaVersion);
    if (version != kSchemaVersion) invalid("schema_version", "unsupported schema version " + std::to_string(version));
    Scenario& sc = cfg.scenario;

    parse_medium(top.child("medium"), sc);
    {
        Section d = top.child("domain");
        sc.domain.lo = d.vec3("lo", Vec3::Constant(-1e6));
        sc.domain.hi = d.vec3("hi", Vec3::Constant(1e6));
        d.finish();
    }
    parse_spectrum(top.child("spectrum"), sc, base_dir, doc["spectrum"]);
    parse_source(top.child("source"), sc);
    parse_numerics(top.child("numerics"), sc);
    parse_estimator(top.child("estimator"), sc);
    {
        Section p = top.child("probe");
        cfg.probe.x = p.vec3("x", Vec3::Zero());
        cfg.probe.k = p.vec3("k", Vec3::UnitZ());
        cfg.probe.k_norms = p.numbers("k_norms", {1.0});
        cfg.probe.rays = static_cast<int>(p.integer("rays", 8));
        cfg.probe.angles = static_cast<int>(p.integer("angles", 32));
        if (cfg.probe.rays < 1 || cfg.probe.angles < 2) invalid("probe", "rays >= 1 and angles >= 2 required");
        p.finish();
    }
    {
        Section w = top.child("wigner");
        WignerSpec& ws = cfg.wigner;
        ws.epsilon = w.number("epsilon", ws.epsilon);
        ws.length = w.number("length", ws.length);
        ws.cells_per_epsilon = static_cast<int>(w.integer("cells_per_epsilon", ws.cells_per_epsilon));
        ws.packet_width = w.number("packet_width", ws.packet_width);
        ws.k0 = w.number("k0", ws.k0);
        ws.speed = w.number("speed", ws.speed);
        ws.time = w.number("time", ws.time);
        ws.lebedev_points = static_cast<int>(w.integer("lebedev_points", ws.lebedev_points));
        if (!(ws.epsilon > 0.0) || !(ws.length > 0.0)) invalid("wigner.epsilon", "epsilon and length must be positive");
        if (ws.cells_per_epsilon < 4) invalid("wigner.cells_per_epsilon", "at least 4 cells per epsilon are required");
        if (ws.lebedev_points != 26 && ws.lebedev_points != 50) invalid("wigner.lebedev_points", "must be 26 or 50");
        w.finish();
    }
    {
        Section o = top.child("outputs");
        cfg.outputs.dir = o.text("dir", cfg.outputs.dir);
        cfg.outputs.prefix = o.text("prefix", cfg.outputs.prefix);
        o.finish();
    }
    top.finish();
    sc.validate();
    doc.erase("outputs");
    doc["numerics"].erase("workers");
    cfg.canonical = doc;
    return cfg;
}

RunConfig parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigInvalid, path + ": cannot open scenario file");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::filesystem::path p(path);
    return parse_scenario_text(buf.str(), p.has_parent_path() ? p.parent_path().string() : ".");
}

void set_seed(RunConfig& cfg, std::uint64_t seed) {
    cfg.scenario.numerics.seed = seed;
    cfg.canonical["numerics"]["seed"] = seed;
}

void set_workers(RunConfig& cfg, int workers) {
    if (workers < 1) throw Error(ErrorCode::ConfigInvalid, "numerics.workers: must be at least 1");
    cfg.scenario.numerics.workers = workers;
}

std::string scenario_hash(const RunConfig& cfg) { return io::sha256_hex(cfg.canonical.dump()); }

}  // namespace emt
