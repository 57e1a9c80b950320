#include "emt/app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "emt/io.hpp"
#include "emt/scattering.hpp"
#include "emt/wigner.hpp"

namespace emt {

namespace {

namespace fs = std::filesystem;

std::string out_path(const RunConfig& cfg, const std::string& dir, const std::string& stem) {
    fs::create_directories(dir);
    return (fs::path(dir) / (cfg.outputs.prefix + "_" + stem)).string();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
    return buf;
}

// Evenly spread directions (golden-angle spiral).
std::vector<Vec3> spiral_directions(int n) {
    std::vector<Vec3> out;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        out.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
    }
    return out;
}

}  // namespace

RunResult run_modes(const RunConfig& cfg, const std::string& out_dir) {
    const ModeDecomposition d = decompose(cfg.scenario.medium, cfg.probe.x, cfg.probe.k);
    RunResult res;
    std::ostringstream csv, text;
    csv << "branch,label,omega,multiplicity,column,component,re_b,im_b\n";
    double scale = 1.0;
    for (double v : d.eigenvalues()) scale = std::max(scale, 1.0 + std::abs(v));
    text << "omega:";
    std::vector<double> all;
    for (std::size_t i = 0; i < d.branches.size(); ++i) {
        const Branch& br = d.branches[i];
        const double w = std::abs(br.omega) <= 1e-12 * scale ? 0.0 : br.omega;
        for (int m = 0; m < br.multiplicity; ++m) all.push_back(w);
        for (Eigen::Index c = 0; c < br.b.cols(); ++c)
            for (Eigen::Index r = 0; r < 6; ++r)
                csv << i << "," << br.label << "," << fmt(w) << "," << br.multiplicity << "," << c << "," << r << ","
                    << fmt(br.b(r, c).real()) << "," << fmt(br.b(r, c).imag()) << "\n";
    }
    std::sort(all.begin(), all.end());
    for (double w : all) text << " " << short_fmt(w);
    text << "\n";
    for (std::size_t i = 0; i < d.branches.size(); ++i) {
        const Branch& br = d.branches[i];
        text << "branch " << i << " (" << br.label << "): omega = " << short_fmt(std::abs(br.omega) <= 1e-12 * scale ? 0.0 : br.omega)
             << ", multiplicity " << br.multiplicity << "\n";
        for (Eigen::Index c = 0; c < br.b.cols(); ++c) {
            text << "  b[" << c << "] =";
            for (Eigen::Index r = 0; r < 6; ++r)
                text << " (" << short_fmt(br.b(r, c).real()) << "," << short_fmt(br.b(r, c).imag()) << ")";
            text << "\n";
        }
    }
    const std::string path = out_path(cfg, out_dir, "modes.csv");
    io::write_text(path, csv.str());
    res.outputs.push_back(path);
    res.summary = text.str();
    return res;
}

RunResult run_trace(const RunConfig& cfg, const std::string& out_dir) {
    const Scenario& s = cfg.scenario;
    const int mode = s.source.mode;
    RayOptions opts;
    opts.domain = s.domain;
    std::vector<Vec3> ks;
    if (cfg.probe.rays == 1) {
        ks.push_back(cfg.probe.k);
    } else {
        for (const Vec3& d : spiral_directions(cfg.probe.rays)) ks.push_back(cfg.probe.k.norm() * d);
    }
    std::ostringstream csv;
    csv << "ray,t,x,y,z,kx,ky,kz,omega,drift,trace_w,status\n";
    const auto steps = static_cast<long>(std::ceil(s.numerics.horizon / s.numerics.dt - 1e-9));
    const double h = s.numerics.horizon / static_cast<double>(steps);
    double worst = 0.0;
    int left = 0;
    for (std::size_t r = 0; r < ks.size(); ++r) {
        RayState ray = make_ray(s.medium, mode, cfg.probe.x, ks[r], CMatX(), opts);
        auto row = [&]() {
            csv << r << "," << fmt(ray.t) << "," << fmt(ray.x.x()) << "," << fmt(ray.x.y()) << "," << fmt(ray.x.z())
                << "," << fmt(ray.k.x()) << "," << fmt(ray.k.y()) << "," << fmt(ray.k.z()) << ","
                << fmt(hamiltonian(s.medium, mode, ray.x, ray.k, opts)) << "," << fmt(ray.max_drift) << ","
                << fmt(ray.w.trace().real()) << "," << (ray.status == RayStatus::Active ? "active" : "left_domain")
                << "\n";
        };
        row();
        for (long i = 0; i < steps && ray.status == RayStatus::Active; ++i) {
            ray = propagate_coherence(s.medium, ray, h, h, opts);
            row();
        }
        worst = std::max(worst, ray.max_drift);
        if (ray.status != RayStatus::Active) ++left;
    }
    RunResult res;
    const std::string path = out_path(cfg, out_dir, "rays.csv");
    io::write_text(path, csv.str());
    res.outputs.push_back(path);
    std::ostringstream text;
    text << "traced " << ks.size() << " rays over t = " << short_fmt(s.numerics.horizon) << ", max relative drift "
         << short_fmt(worst) << ", left domain " << left << "\n";
    res.summary = text.str();
    return res;
}

RunResult run_xsection(const RunConfig& cfg, const std::string& out_dir) {
    const Scenario& s = cfg.scenario;
    if (!s.scattering()) throw Error(ErrorCode::ConfigInvalid, "spectrum.kind: xsection needs a nonzero spectrum");
    if (s.medium.family == MediumFamily::Generic && !s.medium.homogeneous())
        throw Error(ErrorCode::ConfigInvalid, "medium: cross-sections need a homogeneous medium");
    const Vec3 khat = cfg.probe.k.normalized();
    const auto [e1, e2] = transverse_frame(khat);
    (void)e2;
    std::ostringstream total, diff, text;
    total << "k_norm,alpha,multiplicity,rate,trace_sigma,max_offdiag\n";
    diff << "k_norm,alpha,beta,theta,radius,trace_sigma\n";
    for (double kn : cfg.probe.k_norms) {
        const Vec3 k = kn * khat;
        const ModeDecomposition at_k = decompose(s.medium, cfg.probe.x, k);
        for (int alpha = 0; alpha < static_cast<int>(at_k.branches.size()); ++alpha) {
            const Branch& ba = at_k.branches[static_cast<std::size_t>(alpha)];
            if (ba.omega == 0.0 || alpha == at_k.null_index()) continue;
            const CMatX sigma = total_xsection(s.medium, cfg.probe.x, alpha, k, s.spectrum, s.numerics.shell).real_part;
            double off = 0.0;
            for (Eigen::Index i = 0; i < sigma.rows(); ++i)
                for (Eigen::Index j = 0; j < sigma.cols(); ++j)
                    if (i != j) off = std::max(off, std::abs(sigma(i, j)));
            total << fmt(kn) << "," << alpha << "," << ba.multiplicity << "," << fmt(scattering_rate(sigma)) << ","
                  << fmt(sigma.trace().real()) << "," << fmt(off) << "\n";
            text << "|k| = " << short_fmt(kn) << " mode " << alpha << ": rate " << short_fmt(scattering_rate(sigma))
                 << "\n";
            for (int beta = 0; beta < static_cast<int>(at_k.branches.size()); ++beta) {
                for (int j = 0; j < cfg.probe.angles; ++j) {
                    const double theta = kPi * j / (cfg.probe.angles - 1);
                    const Vec3 dir = std::cos(theta) * khat + std::sin(theta) * e1;
                    const ModeDecomposition unit = decompose(s.medium, cfg.probe.x, dir);
                    const double wu = unit.branches[static_cast<std::size_t>(beta)].omega;
                    if (wu == 0.0 || wu * ba.omega <= 0.0) continue;
                    const double r = ba.omega / wu;
                    const ModeDecomposition at_p = decompose(s.medium, cfg.probe.x, r * dir);
                    const int nb = at_p.branches[static_cast<std::size_t>(beta)].multiplicity;
                    const double tr = differential_xsection(at_k, alpha, at_p, beta, s.spectrum)
                                          .apply(CMatX::Identity(nb, nb))
                                          .trace()
                                          .real();
                    diff << fmt(kn) << "," << alpha << "," << beta << "," << fmt(theta) << "," << fmt(r) << ","
                         << fmt(tr) << "\n";
                }
            }
        }
    }
    RunResult res;
    const std::string tp = out_path(cfg, out_dir, "xsection_total.csv");
    const std::string dp = out_path(cfg, out_dir, "xsection_differential.csv");
    io::write_text(tp, total.str());
    io::write_text(dp, diff.str());
    res.outputs = {tp, dp};
    res.summary = text.str();
    return res;
}

RunResult run_rte(const RunConfig& cfg, const std::string& out_dir) {
    RunResult res;
    PhaseSpaceHistogram hist = run_simulation(cfg.scenario);
    const std::string csv = out_path(cfg, out_dir, "histogram.csv");
    const std::string raw = out_path(cfg, out_dir, "histogram.f64");
    write_histogram(hist, csv, raw, scenario_hash(cfg));
    res.outputs = {csv, raw, raw + ".json"};
    if (!hist.bins.empty()) {
        const FieldEstimate f = estimate_fields(hist);
        std::ostringstream out;
        out << "ix,iy,iz,x,y,z,energy,energy_error,flux_x,flux_y,flux_z\n";
        const BinSpec& b = hist.spec;
        for (int c = 0; c < b.x_count(); ++c) {
            BinIndex idx;
            idx.cell = {c % b.x_cells[0], (c / b.x_cells[0]) % b.x_cells[1], c / (b.x_cells[0] * b.x_cells[1])};
            const Vec3 ctr = hist.cell_center(idx);
            const auto cc = static_cast<std::size_t>(c);
            out << idx.cell[0] << "," << idx.cell[1] << "," << idx.cell[2] << "," << fmt(ctr.x()) << ","
                << fmt(ctr.y()) << "," << fmt(ctr.z()) << "," << fmt(f.energy[cc]) << "," << fmt(f.energy_error[cc])
                << "," << fmt(f.flux[cc].x()) << "," << fmt(f.flux[cc].y()) << "," << fmt(f.flux[cc].z()) << "\n";
        }
        const std::string fp = out_path(cfg, out_dir, "fields.csv");
        io::write_text(fp, out.str());
        res.outputs.push_back(fp);
    }
    std::ostringstream text;
    text << "particles " << hist.particles << ", batches " << hist.batches << ", scatter events " << hist.scatter_events
         << "\n"
         << "total weight " << short_fmt(hist.total_weight) << " +/- " << short_fmt(hist.total_error) << " (unbinned "
         << short_fmt(hist.unbinned_weight) << ", escaped " << short_fmt(hist.escaped_weight) << ", absorbed "
         << hist.absorbed << ")\n";
    res.summary = text.str();
    res.histogram = std::move(hist);
    return res;
}

RunResult run_wigner(const RunConfig& cfg, const std::string& out_dir) {
    const WignerSpec& ws = cfg.wigner;
    LineGrid g;
    g.n = static_cast<int>(std::lround(ws.cells_per_epsilon * ws.length / ws.epsilon));
    g.spacing = ws.length / g.n;
    g.origin = -0.5 * ws.length;
    const double dk = 2.0 * kPi * ws.epsilon / ws.length;
    const double k0 = std::round(ws.k0 / dk) * dk;
    const double width = ws.packet_width, start = -0.25 * ws.length * 0.5;
    auto amp = [&](double x) { return std::exp(-0.5 * std::pow((x - start) / width, 2)); };
    const SampledField packet = complex_wkb_field(amp, [&](double x) { return k0 * x; }, ws.epsilon, g);
    const PhaseSpaceGrid w = discrete_wigner(packet);

    double marginal = 0.0;
    const auto m = k_marginal(w);
    for (int i = 0; i < g.n; ++i)
        marginal = std::max(marginal, std::abs(m[static_cast<std::size_t>(i)] - std::norm(packet.values[static_cast<std::size_t>(i)])));
    const SampledField phase = sample_field([&](double x) { return std::exp(cplx(0.0, k0 * x / ws.epsilon)); },
                                            ws.epsilon, g);
    const double concentration =
        concentration_fraction(discrete_wigner(phase), [&](double) { return k0; }, 1.01 * dk);
    const double transport = free_transport_check(packet, ws.speed, ws.time);
    const double constant = kirchhoff_spherical_mean([](const Vec3&) { return 1.0; }, Vec3::Zero(), 1.0, ws.time,
                                                     ws.lebedev_points);

    nlohmann::json checks;
    checks["grid"] = {{"n", g.n}, {"spacing", g.spacing}, {"origin", g.origin}, {"epsilon", ws.epsilon}};
    checks["k0_snapped"] = k0;
    checks["marginal_max_abs_error"] = marginal;
    checks["pure_phase_mass_in_3_bins"] = concentration;
    checks["free_transport_l1"] = transport;
    checks["kirchhoff_constant_error"] = std::abs(constant - ws.time);

    RunResult res;
    const std::string cp = out_path(cfg, out_dir, "wigner_checks.json");
    io::write_json(cp, checks);
    std::vector<double> raw;
    raw.reserve(static_cast<std::size_t>(2 * w.values.size()));
    for (Eigen::Index i = 0; i < w.values.rows(); ++i)
        for (Eigen::Index c = 0; c < w.values.cols(); ++c) {
            raw.push_back(w.values(i, c).real());
            raw.push_back(w.values(i, c).imag());
        }
    const std::string rp = out_path(cfg, out_dir, "wigner.f64");
    io::write_raw_f64(rp, raw);
    nlohmann::json side;
    side["layout"] = "row-major [x][k] (re, im) pairs";
    side["x"] = {{"n", g.n}, {"spacing", g.spacing}, {"origin", g.origin}};
    side["k"] = {{"first", w.k.front()}, {"step", w.dk()}, {"n", w.k.size()}};
    side["epsilon"] = ws.epsilon;
    io::write_json(rp + ".json", side);
    res.outputs = {cp, rp, rp + ".json"};
    std::ostringstream text;
    text << "marginal identity max error " << short_fmt(marginal) << "\n"
         << "pure phase mass in 3 bins " << short_fmt(concentration) << "\n"
         << "free transport L1 distance " << short_fmt(transport) << "\n"
         << "Kirchhoff constant-data error " << short_fmt(std::abs(constant - ws.time)) << "\n";
    res.summary = text.str();
    return res;
}

nlohmann::json manifest_json(const ManifestInfo& info) {
    nlohmann::json m;
    m["tool"] = "emt";
    m["version"] = kToolVersion;
    m["schema_version"] = kSchemaVersion;
    m["subcommand"] = info.subcommand;
    m["scenario_hash"] = info.scenario_hash;
    m["seed"] = info.seed;
    m["workers"] = info.workers;
    m["deterministic"] = info.deterministic;
    nlohmann::json timing;
    timing["started_utc"] = (info.deterministic || !info.started_utc) ? nlohmann::json() : nlohmann::json(*info.started_utc);
    timing["wall_seconds"] =
        (info.deterministic || !info.wall_seconds) ? nlohmann::json() : nlohmann::json(*info.wall_seconds);
    m["timing"] = timing;
    nlohmann::json files = nlohmann::json::array();
    for (const auto& p : info.outputs) {
        files.push_back({{"path", fs::path(p).filename().string()},
                         {"bytes", fs::file_size(p)},
                         {"sha256", io::sha256_file(p)}});
    }
    m["outputs"] = files;
    return m;
}

}  // namespace emt
