#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's numerics; they are written from the physics directly.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>

#include <Eigen/Dense>

namespace oracle {

using cd = std::complex<double>;
using Mat = Eigen::Matrix4cd;

constexpr double kHbar = 1.054571817e-34;
constexpr double kEps0 = 8.8541878128e-12;
constexpr double kC = 299792458.0;
constexpr double kKb = 1.380649e-23;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kGamma = kTwoPi * 5.746e6;

// |i><j| with 0-based indices.
inline Mat sigma(int i, int j) {
    Mat m = Mat::Zero();
    m(i, j) = 1.0;
    return m;
}

struct Levels {
    double omega21, omega43, delta;
    double d[4][4] = {};      // d[e][g]
    double decay[4][4] = {};  // decay[e][g]
    double dephasing = 0.0;
};

// Rotating-frame Hamiltonian written term by term as operator sums.
inline Mat hamiltonian(const Levels& p, cd field) {
    Mat h = kHbar * (p.omega21 * sigma(1, 1) - p.delta * sigma(2, 2) + (p.omega43 - p.delta) * sigma(3, 3));
    Mat coupling = Mat::Zero();
    for (int e = 2; e < 4; ++e)
        for (int g = 0; g < 2; ++g) coupling += p.d[e][g] * sigma(e, g);
    const Mat v = cd(0.0, -1.0) * field * coupling;
    return h + v + v.adjoint();
}

// Master equation from commutator and explicit jump-operator sums.
inline Mat lindblad(const Levels& p, const Mat& rho, cd field) {
    const Mat h = hamiltonian(p, field);
    Mat out = cd(0.0, -1.0 / kHbar) * (h * rho - rho * h);
    for (int e = 2; e < 4; ++e)
        for (int g = 0; g < 2; ++g) {
            const Mat lower = sigma(g, e), raise = sigma(e, g), pe = sigma(e, e);
            out += 0.5 * p.decay[e][g] * (2.0 * lower * rho * raise - pe * rho - rho * pe);
        }
    for (int e = 2; e < 4; ++e)
        for (int g = 0; g < 2; ++g) {
            out(e, g) -= p.dephasing * rho(e, g);
            out(g, e) -= p.dephasing * rho(g, e);
        }
    return out;
}

// Hermitian, unit-trace, positive semidefinite matrix from A A^dagger.
inline Mat random_density(std::mt19937& rng) {
    std::normal_distribution<double> n;
    Mat a;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a(i, j) = cd(n(rng), n(rng));
    Mat rho = a * a.adjoint();
    rho /= rho.trace().real();
    for (int i = 0; i < 4; ++i) rho(i, i) = rho(i, i).real();
    return rho;
}

// Saturated vapor pressure of liquid Rb in Pa, evaluated term by term.
inline double rb_vapor_pressure_pa(double celsius) {
    const double t = celsius + 273.15;
    const double a = 15.88253, b = 4529.635, c = 0.00058663, d = 2.99138;
    const double torr = std::pow(10.0, a - b / t + c * t - d * std::log10(t));
    return torr * 133.32236842105263;
}

// Steady-state linear optical depth of a homogeneously broadened two-level line:
// alpha = n omega d^2 / (eps0 c hbar) * Gc / (Gc^2 + Delta^2), intensity OD = alpha L.
inline double two_level_od(double density, double length, double omega, double dipole, double coherence_decay,
                           double detuning) {
    const double peak = density * omega * dipole * dipole / (kEps0 * kC * kHbar);
    return peak * coherence_decay / (coherence_decay * coherence_decay + detuning * detuning) * length;
}

inline double gaussian(double t, double fwhm) { return std::exp(-4.0 * std::numbers::ln2 * t * t / (fwhm * fwhm)); }

inline double lorentzian_area_normalized(double x, double fwhm) {
    const double g = 0.5 * fwhm;
    return g / (std::numbers::pi * (x * x + g * g));
}

inline double gaussian_area_normalized(double x, double sigma) {
    return std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

// Composite Simpson rule with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
    if (panels % 2) ++panels;
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace oracle
