#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "emt/io.hpp"
#include "emt/quadrature.hpp"
#include "emt/rte.hpp"
#include "support.hpp"

using namespace emt;
using emt::testing::random_psd;
using emt::testing::random_unit;

namespace {

Scenario ballistic_lorentz(std::size_t n) {
    Scenario s;
    s.medium = OpticalResponse::lorentz(1.0, 1.0, 0.8, 0.6, 0.3);
    s.source.position = SourceSpec::Position::Gaussian;
    s.source.spread = 0.3;
    s.source.direction = SourceSpec::Direction::Isotropic;
    s.source.k = Vec3(0, 0, 2.0);
    s.source.mode = 2;
    s.source.particles = n;
    s.numerics.horizon = 1.0;
    s.numerics.seed = 11;
    s.domain = Box{Vec3::Constant(-5), Vec3::Constant(5)};
    s.bins.region = Box{Vec3::Constant(-2), Vec3::Constant(2)};
    s.bins.x_cells = {2, 2, 2};
    s.bins.theta_cells = 2;
    s.bins.phi_cells = 2;
    return s;
}

Scenario scattering_lorentz(std::size_t n, double horizon) {
    Scenario s;
    s.medium = OpticalResponse::isotropic(1.0, 1.0);
    s.spectrum = lorentz_channels(RadialSpectrum::gaussian(1.0), RadialSpectrum::gaussian(1.0), 0.3, 1.0);
    s.source.k = Vec3(0, 0, 1.0);
    s.source.mode = 2;
    s.source.particles = n;
    s.numerics.horizon = horizon;
    s.numerics.seed = 5;
    s.numerics.shell.order_theta = 32;
    s.numerics.shell.order_phi = 64;
    s.domain = Box{Vec3::Constant(-50), Vec3::Constant(50)};
    s.bins.region = Box{Vec3::Constant(-4), Vec3::Constant(4)};
    s.bins.x_cells = {2, 2, 2};
    return s;
}

}  // namespace

TEST_CASE("scattering rate from Sigma") {
    CHECK(scattering_rate(CMatX::Zero(2, 2)) == 0.0);
    CHECK(scattering_rate(0.7 * CMatX::Identity(2, 2)) == doctest::Approx(1.4).epsilon(1e-15));
    CHECK(scattering_rate(CMatX::Constant(1, 1, 0.25)) == doctest::Approx(0.5).epsilon(1e-15));

    const auto m = OpticalResponse::isotropic(1.0, 1.0);
    const auto model = lorentz_channels(RadialSpectrum::gaussian(1.0), RadialSpectrum::gaussian(1.0), 0.3, 1.0);
    ShellSampler sampler(m, model, ShellOptions{});
    const int id = sampler.prepare(2, 1.3);
    const auto& st = sampler.state(id);
    const Vec3 k = 1.3 * Vec3(0.2, -0.4, 0.9).normalized();
    const double gain = sampler.gain_integral(2, k, CMatX::Identity(2, 2)) / 2.0;
    CHECK(std::abs(gain - st.rate) <= 1e-6 * st.rate);

    const auto zero = lorentz_channels(RadialSpectrum::zero(), RadialSpectrum::zero(), 0.0, 1.0);
    ShellSampler none(m, zero, ShellOptions{16, 32});
    CHECK(none.state(none.prepare(2, 1.0)).rate == 0.0);
}

TEST_CASE("free flights are exponential") {
    std::mt19937_64 rng(9);
    CHECK(std::isinf(sample_free_flight(0.0, rng)));
    const int n = 100000;
    double sum = 0.0, tail_sum = 0.0;
    int tail = 0;
    for (int i = 0; i < n; ++i) {
        const double t = sample_free_flight(2.0, rng);
        CHECK_MESSAGE(t >= 0.0, "negative flight");
        sum += t;
        if (t > 0.7) {
            tail_sum += t - 0.7;
            ++tail;
        }
    }
    CHECK(std::abs(sum / n - 0.5) <= 3.0 * 0.5 / std::sqrt(double(n)));
    CHECK(std::abs(tail_sum / tail - 0.5) <= 3.0 * 0.5 / std::sqrt(double(tail)));
}

TEST_CASE("scatter events: weight factor and reciprocity") {
    std::mt19937_64 rng(13);
    const auto m = OpticalResponse::isotropic(1.2, 0.8);
    const auto model = lorentz_channels(RadialSpectrum::gaussian(0.8), RadialSpectrum::exponential(1.2), 0.4, 1.0);
    ShellSampler sampler(m, model, ShellOptions{});
    const double kn = 1.1;
    const int id = sampler.prepare(2, kn);
    const auto& st = sampler.state(id);
    for (int trial = 0; trial < 5; ++trial) {
        const Vec3 k = kn * random_unit(rng);
        const CMatX w = random_psd(rng, 2);
        const ScatterOutcome out = sampler.scatter(id, k, w, rng);
        CHECK(std::abs(out.weight_factor - 1.0) <= 1e-8);
        CHECK(out.mode == 2);
        CHECK(std::abs(out.k.norm() - kn) <= 1e-12);
        CHECK(std::abs(out.w.trace().real() - 1.0) <= 1e-12);
        const double loss = 2.0 * (st.sigma * w).trace().real();
        CHECK(std::abs(sampler.gain_integral(2, k, w) / loss - 1.0) <= 1e-6);
    }
}

TEST_CASE("chiral scattering only couples a mode to itself") {
    const double eps = 1.0, mu = 1.0, kappa = 0.3;
    const auto m = OpticalResponse::chiral(eps, mu, kappa);
    const auto model = chiral_channels(eps, mu, RadialSpectrum::gaussian(1.0), RadialSpectrum::gaussian(0.7), 0.2, 1.0);
    ShellSampler sampler(m, model, ShellOptions{32, 64});
    const int id = sampler.prepare(1, 1.0);
    std::mt19937_64 rng(2);
    Vec3 k(0, 0, 1);
    CMatX w = CMatX::Identity(1, 1);
    int state = id;
    for (int i = 0; i < 2000; ++i) {
        const ScatterOutcome out = sampler.scatter(state, k, w, rng);
        REQUIRE(out.mode == 1);
        CHECK(std::abs(out.k.norm() - 1.0) <= 1e-12);
        k = out.k;
        w = out.w;
        state = out.state;
    }
}

TEST_CASE("outgoing directions follow the kernel law") {
    // Chi-square over cos(angle to k) bins against the quadrature of tr(sigma:w).
    const auto m = OpticalResponse::isotropic(1.0, 1.0);
    const auto model = lorentz_channels(RadialSpectrum::gaussian(1.0), RadialSpectrum::gaussian(1.0), 0.0, 1.0);
    ShellSampler sampler(m, model, ShellOptions{32, 64});
    const int id = sampler.prepare(2, 1.0);
    const Vec3 k = Vec3(0.3, 0.1, 0.9).normalized();
    CMatX w(2, 2);
    w << 0.7, cplx(0.1, 0.2), cplx(0.1, -0.2), 0.3;
    const int nbins = 20, events = 100000;
    std::vector<double> expected(nbins, 0.0);
    const ModeDecomposition at_k = decompose(m, Vec3::Zero(), k);
    const auto [e1, e2] = transverse_frame(k);
    double total = 0.0;
    for (int b = 0; b < nbins; ++b) {
        const QuadratureRule rc = gauss_legendre(16, -1.0 + 2.0 * b / nbins, -1.0 + 2.0 * (b + 1) / nbins);
        const QuadratureRule rp = gauss_legendre(48, 0.0, 2.0 * kPi);
        for (std::size_t i = 0; i < rc.nodes.size(); ++i)
            for (std::size_t j = 0; j < rp.nodes.size(); ++j) {
                const double c = rc.nodes[i], s = std::sqrt(1.0 - c * c);
                const Vec3 p = c * k + s * (std::cos(rp.nodes[j]) * e1 + std::sin(rp.nodes[j]) * e2);
                const auto at_p = decompose(m, Vec3::Zero(), p);
                const double f = differential_xsection(at_p, 2, at_k, 2, model).apply(w).trace().real();
                expected[static_cast<std::size_t>(b)] += rc.weights[i] * rp.weights[j] * f;
            }
        total += expected[static_cast<std::size_t>(b)];
    }
    std::vector<int> observed(nbins, 0);
    std::mt19937_64 rng(77);
    for (int e = 0; e < events; ++e) {
        const ScatterOutcome out = sampler.scatter(id, k, w, rng);
        const double c = out.k.normalized().dot(k);
        observed[static_cast<std::size_t>(std::min(nbins - 1, int((c + 1.0) * 0.5 * nbins)))] += 1;
    }
    double chi2 = 0.0;
    for (int b = 0; b < nbins; ++b) {
        const double ex = events * expected[static_cast<std::size_t>(b)] / total;
        chi2 += std::pow(observed[static_cast<std::size_t>(b)] - ex, 2) / ex;
    }
    // 19 degrees of freedom; 43.8 is the 0.1% quantile.
    CHECK(chi2 < 43.8);
}

TEST_CASE("closed-form ballistic Lorentz solution") {
    Scenario s = ballistic_lorentz(10);
    const Vec3 k(0, 0, 2.0);
    const CMatX w0 = analytic_lorentz_solution(Vec3(0.1, 0, 0), k, 0.0, s);
    const double rho0 = std::pow(2 * kPi * 0.09, -1.5) * std::exp(-0.5 * 0.01 / 0.09);
    CHECK((w0 - rho0 * CMatX::Identity(2, 2) / 2.0).norm() <= 1e-14);

    const auto& lm = std::get<LorentzModel>(s.medium.susceptibility);
    const double gamma = lorentz_damping_rate(lm, 2.0);
    const double t_half = std::log(2.0) / gamma;
    const CMatX wh = analytic_lorentz_solution(Vec3(0, 0, -t_half), k, t_half, s);
    CHECK(wh.trace().real() == doctest::Approx(0.5 * std::pow(2 * kPi * 0.09, -1.5)).epsilon(1e-12));

    RayOptions opts;
    opts.domain = Box{Vec3::Constant(-10), Vec3::Constant(10)};
    RayState ray = make_ray(s.medium, 2, Vec3::Zero(), k, CMatX(), opts);
    ray = propagate_coherence(s.medium, ray, 1.5, 0.01, opts);
    const double rho = std::pow(2 * kPi * 0.09, -1.5);
    const double closed = analytic_lorentz_solution(ray.x, k, 1.5, s).trace().real() / rho;
    CHECK(std::abs(ray.w.trace().real() - closed) <= 1e-12);
}

TEST_CASE("sigma = 0 Monte Carlo matches the ballistic solution") {
    Scenario s = ballistic_lorentz(100000);
    const PhaseSpaceHistogram mc = run_simulation(s);
    const PhaseSpaceHistogram exact = ballistic_histogram(s);
    const double d = l1_distance(mc, exact);
    MESSAGE("L1 distance " << d);
    CHECK(d <= 0.02);
    CHECK(std::abs(mc.total_weight + mc.escaped_weight - exact.total_weight - exact.escaped_weight) <= 1e-12);
    for (const auto& [key, bin] : mc.bins) {
        Eigen::SelfAdjointEigenSolver<CMatX> es(bin.coherence);
        CHECK((bin.coherence - bin.coherence.adjoint()).norm() <= 1e-14 * bin.trace);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10 * bin.trace);
    }
}

TEST_CASE("elastic scattering conserves weight times trace") {
    Scenario s = scattering_lorentz(20000, 1.0);
    ShellSampler sampler(s.medium, s.spectrum, s.numerics.shell);
    const double rate = sampler.state(sampler.prepare(2, 1.0)).rate;
    s.numerics.horizon = 3.0 / rate;
    const PhaseSpaceHistogram h = run_simulation(s);
    const double drift = std::abs(h.total_weight - 1.0);
    MESSAGE("drift " << drift << " batch sigma " << h.total_error << " events " << h.scatter_events);
    CHECK(drift <= 0.01);
    CHECK(drift <= 3.0 * h.total_error + 1e-12);
    CHECK(h.escaped_weight == 0.0);
    CHECK(h.scatter_events > 2 * s.source.particles);
}

TEST_CASE("worker count does not change the histogram") {
    Scenario s = scattering_lorentz(800, 2.0);
    s.numerics.workers = 1;
    const PhaseSpaceHistogram a = run_simulation(s);
    s.numerics.workers = 8;
    const PhaseSpaceHistogram b = run_simulation(s);
    REQUIRE(a.bins.size() == b.bins.size());
    for (auto ia = a.bins.begin(), ib = b.bins.begin(); ia != a.bins.end(); ++ia, ++ib) {
        CHECK(ia->first == ib->first);
        CHECK(ia->second.trace == ib->second.trace);
        CHECK(ia->second.coherence == ib->second.coherence);
        CHECK(ia->second.error == ib->second.error);
    }
    CHECK(a.total_weight == b.total_weight);
}

TEST_CASE("batch error scales as N^-1/2") {
    Scenario s = ballistic_lorentz(8000);
    s.bins.theta_cells = s.bins.phi_cells = 1;
    s.numerics.batches = 256;
    const PhaseSpaceHistogram small = run_simulation(s);
    s.source.particles = 32000;
    const PhaseSpaceHistogram large = run_simulation(s);
    double es = 0.0, el = 0.0;
    for (const auto& [key, bin] : small.bins) {
        es += bin.error;
        el += large.bins.at(key).error;
    }
    MESSAGE("error ratio " << es / el);
    CHECK(es / el == doctest::Approx(2.0).epsilon(0.3));
}

TEST_CASE("macroscopic fields") {
    Scenario s;
    s.medium = OpticalResponse::isotropic(2.0, 1.0);
    s.source.k = Vec3(0, 0, 1);
    s.source.particles = 500;
    s.numerics.horizon = 0.5;
    s.bins.region = Box{Vec3::Constant(-2), Vec3::Constant(2)};
    const PhaseSpaceHistogram beam = run_simulation(s);
    const FieldEstimate f = estimate_fields(beam);
    REQUIRE(f.energy.size() == 1);
    CHECK(f.energy[0] == doctest::Approx(0.5).epsilon(1e-12));
    const double c0 = s.medium.reference_speed();
    CHECK((f.flux[0] - c0 * f.energy[0] * Vec3::UnitZ()).norm() <= 0.02 * c0 * f.energy[0]);

    s.source.direction = SourceSpec::Direction::Isotropic;
    s.source.particles = 20000;
    const FieldEstimate iso = estimate_fields(run_simulation(s));
    const double noise = 0.5 * c0 / std::sqrt(3.0 * 20000);
    for (int d = 0; d < 3; ++d) CHECK(std::abs(iso.flux[0][d]) <= 3.0 * noise);

    PhaseSpaceHistogram empty;
    CHECK_THROWS_AS(estimate_fields(empty), Error);
}

TEST_CASE("scenario validation") {
    auto expect_invalid = [](const Scenario& s, const std::string& field) {
        try {
            s.validate();
            FAIL("expected ConfigInvalid for " << field);
        } catch (const Error& e) {
            INFO(std::string(e.what()));
            CHECK(e.code() == ErrorCode::ConfigInvalid);
            CHECK(std::string(e.what()).find(field) != std::string::npos);
        }
    };
    Scenario s;
    s.numerics.batches = 8;
    expect_invalid(s, "numerics.batches");
    s = Scenario{};
    s.source.mode = 0;
    expect_invalid(s, "source.mode");
    s = Scenario{};
    s.source.particles = 0;
    expect_invalid(s, "source.particles");
    s = Scenario{};
    s.source.coherence = CMatX::Identity(2, 2);
    expect_invalid(s, "source.coherence");
    s = Scenario{};
    s.medium.family = MediumFamily::Generic;
    s.source.mode = 2;
    s.spectrum = uniform_channel(RadialSpectrum::gaussian(1.0), 0.1);
    expect_invalid(s, "spectrum");
    CHECK_NOTHROW(Scenario{}.validate());
}

TEST_CASE("heterogeneous ballistic run keeps the weight") {
    Scenario s;
    s.medium = OpticalResponse::isotropic(1.0, 1.0);
    s.medium.profile.gradient = Vec3(0.0, 0.0, 0.1);
    s.source.k = Vec3(1, 0, 0);
    s.source.particles = 32;
    s.source.direction = SourceSpec::Direction::Isotropic;
    s.numerics.horizon = 1.0;
    s.numerics.dt = 0.05;
    s.domain = Box{Vec3::Constant(-3), Vec3::Constant(3)};
    s.bins.region = s.domain;
    const PhaseSpaceHistogram h = run_simulation(s);
    CHECK(h.total_weight == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h.escaped_weight == 0.0);
}

TEST_CASE("histogram export") {
    Scenario s = ballistic_lorentz(200);
    const PhaseSpaceHistogram h = run_simulation(s);
    const auto dir = std::filesystem::temp_directory_path() / "emt_rte_export";
    write_histogram(h, (dir / "h.csv").string(), (dir / "h.f64").string(), "abc");
    const auto raw = io::read_raw_f64((dir / "h.f64").string());
    CHECK(raw.size() == h.bins.size() * 18);
    CHECK(std::filesystem::exists(dir / "h.f64.json"));
    const auto rows = io::read_numeric_csv((dir / "h.csv").string(), 16);
    CHECK(rows.size() == h.bins.size());
    std::filesystem::remove_all(dir);
}
