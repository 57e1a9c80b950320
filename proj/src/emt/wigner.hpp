#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emt/quadrature.hpp"
#include "emt/types.hpp"

namespace emt {

// Uniform periodic 1D lattice.
struct LineGrid {
    int n = 256;
    double spacing = 1.0 / 256.0;
    double origin = 0.0;

    double position(int i) const { return origin + i * spacing; }
    double length() const { return n * spacing; }
};

struct SampledField {
    LineGrid grid;
    std::vector<cplx> values;
    double epsilon = 1.0;
};

// W(x_i, k_m): rows index x, columns index k_m = 2 pi m eps / L for m = -n/2 .. n/2 - 1.
struct PhaseSpaceGrid {
    LineGrid grid;
    double epsilon = 1.0;
    std::vector<double> k;
    CMatX values;

    double dk() const { return k.size() > 1 ? k[1] - k[0] : 0.0; }
};

using RealFunction = std::function<double(double)>;

// Re{a(x) exp(i S(x) / eps)}; UnderResolved unless spacing <= eps / 4.
SampledField wkb_field(const RealFunction& amplitude, const RealFunction& phase, double epsilon, const LineGrid& grid);
// a(x) exp(i S(x) / eps) without taking the real part.
SampledField complex_wkb_field(const RealFunction& amplitude, const RealFunction& phase, double epsilon,
                               const LineGrid& grid);
SampledField sample_field(const std::function<cplx(double)>& f, double epsilon, const LineGrid& grid);

double field_energy(const SampledField& u);  // sum |u|^2 dx

// (dy / 2 pi) sum_j exp(i k y_j) u(x - eps y_j) conj(v(x)), y_j = j dx / eps, via FFT in y.
PhaseSpaceGrid discrete_wigner(const SampledField& u, const SampledField& v);
inline PhaseSpaceGrid discrete_wigner(const SampledField& u) { return discrete_wigner(u, u); }

// sum_k W(x, k) dk at every x.
std::vector<cplx> k_marginal(const PhaseSpaceGrid& w);

// Exact band-limited translation u(x - shift).
SampledField shift_field(const SampledField& u, double shift);
// Same translation along x applied to every k column.
PhaseSpaceGrid shift_phase_space(const PhaseSpaceGrid& w, double shift);

// Normalized L1 distance between W[u0(. - c t)] and W[u0](x - c t, k).
double free_transport_check(const SampledField& u0, double speed, double t);

// Fraction of sum |W| with |k - slope(x)| <= half_width.
double concentration_fraction(const PhaseSpaceGrid& w, const RealFunction& slope, double half_width);

using ScalarField3 = std::function<double(const Vec3&)>;

// t (4 pi)^-1 Int g(x - c t p) dOmega(p) with the given sphere rule.
double kirchhoff_spherical_mean(const ScalarField3& g, const Vec3& x, double speed, double t,
                                const std::vector<SphereNode>& rule);
double kirchhoff_spherical_mean(const ScalarField3& g, const Vec3& x, double speed, double t, int lebedev_points = 50);

void write_phase_space(const PhaseSpaceGrid& w, const std::string& csv_path);

}  // namespace emt
