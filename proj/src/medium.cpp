#include "mbprop/medium.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "mbprop/constants.hpp"
#include "mbprop/error.hpp"

namespace mbprop {

void validate(const VaporSpec& spec) {
    if (!(spec.cell_length > 0.0)) throw ParameterError("cell_length must be > 0");
    if (!(spec.doppler_fwhm >= 0.0) || !(spec.pressure_fwhm >= 0.0)) throw ParameterError("broadening widths must be >= 0");
    if (!(spec.isotope_fraction > 0.0) || spec.isotope_fraction > 1.0)
        throw ParameterError("isotope_fraction must be in (0, 1]");
}

double vapor_pressure(double temperature_celsius) {
    if (!(temperature_celsius >= kMinTemperature && temperature_celsius <= kMaxTemperature))
        throw RangeError(fmt::format("temperature {} C outside the supported range [{}, {}] C", temperature_celsius,
                                     kMinTemperature, kMaxTemperature));
    const double tk = temperature_celsius + constants::celsius_offset;
    const double log10_torr = 15.88253 - 4529.635 / tk + 0.00058663 * tk - 2.99138 * std::log10(tk);
    return std::pow(10.0, log10_torr) * constants::torr;
}

double number_density(const VaporSpec& spec) {
    validate(spec);
    const double tk = spec.temperature + constants::celsius_offset;
    return spec.isotope_fraction * vapor_pressure(spec.temperature) / (constants::boltzmann * tk);
}

double effective_dephasing(const VaporSpec& spec, double natural_gamma, Broadening mode) {
    validate(spec);
    const double target = mode == Broadening::Effective ? spec.doppler_fwhm + spec.pressure_fwhm : spec.pressure_fwhm;
    const double gamma = std::numbers::pi * target - 0.5 * natural_gamma;
    // Allow round-off at the natural-linewidth boundary.
    if (gamma < -1e-9 * natural_gamma || target <= 0.0)
        throw ParameterError(fmt::format("linewidth {} Hz is below the natural linewidth {} Hz", target,
                                         natural_gamma / constants::two_pi));
    return std::max(gamma, 0.0);
}

std::vector<VelocityClass> velocity_classes(const VaporSpec& spec, int count) {
    validate(spec);
    if (count < 1) throw ParameterError("need at least one velocity class");
    if (count == 1 || spec.doppler_fwhm == 0.0) return {VelocityClass{0.0, 1.0}};

    // Golub-Welsch for physicists' Hermite polynomials (weight exp(-x^2)).
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(count, count);
    for (int i = 1; i < count; ++i) jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(i / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);

    const double sigma_hz = spec.doppler_fwhm / (2.0 * std::sqrt(2.0 * constants::ln2));
    std::vector<VelocityClass> classes(static_cast<std::size_t>(count));
    double total = 0.0;
    for (int i = 0; i < count; ++i) {
        const double x = solver.eigenvalues()(i);
        const double v0 = solver.eigenvectors()(0, i);
        classes[static_cast<std::size_t>(i)] = {constants::two_pi * std::numbers::sqrt2 * sigma_hz * x, v0 * v0};
        total += v0 * v0;
    }
    for (auto& c : classes) c.weight /= total;
    return classes;
}

std::vector<std::size_t> SimGrid::stored_planes() const {
    const std::size_t n = planes();
    const std::size_t cap = std::max<std::size_t>(max_state_planes, 2);
    const std::size_t stride = n <= cap ? 1 : (nz + cap - 2) / (cap - 1);
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < n; k += stride) out.push_back(k);
    if (out.back() != nz) out.push_back(nz);
    return out;
}

std::vector<std::size_t> SimGrid::stored_times() const {
    const std::size_t stride = std::max<std::size_t>(state_time_stride, 1);
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < nt; j += stride) out.push_back(j);
    return out;
}

double SimGrid::estimated_bytes(std::size_t velocity_classes) const {
    const double field = static_cast<double>(planes()) * static_cast<double>(nt) * 16.0;
    const double stored = static_cast<double>(stored_planes().size()) * static_cast<double>(stored_times().size()) * 160.0;
    const double working = static_cast<double>(planes()) * static_cast<double>(velocity_classes) * 2.0 * 256.0;
    return field + stored + working;
}

SimGrid make_grid(const VaporSpec& spec, const PulseSpec& pulse, double dt, double dz, const GridOptions& options) {
    validate(spec);
    validate(pulse);
    if (!(dt > 0.0) || !(dz > 0.0)) throw ParameterError("grid steps dt and dz must be > 0");

    SimGrid grid;
    grid.nz = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.cell_length / dz)));
    grid.dz = spec.cell_length / static_cast<double>(grid.nz);
    grid.dt = dt;

    const double sigma = pulse.temporal_fwhm() / (2.0 * std::sqrt(constants::ln2));  // amplitude sigma
    const double lead = std::max(options.lead, 4.0 * sigma);
    const double tail = std::max(options.tail, 1.5e-9);
    grid.t0 = pulse.arrival_time - lead;
    grid.nt = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround((lead + tail) / dt)));
    grid.state_time_stride = std::max<std::size_t>(1, options.state_time_stride);
    grid.max_state_planes = options.max_state_planes;

    if (grid.estimated_bytes() > options.memory_budget)
        throw ResourceError(fmt::format("grid {} x {} needs ~{:.0f} MB, above the {:.0f} MB budget", grid.planes(),
                                        grid.nt, grid.estimated_bytes() / 1048576.0, options.memory_budget / 1048576.0));
    return grid;
}

}  // namespace mbprop
