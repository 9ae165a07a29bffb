#pragma once

#include <cstddef>
#include <vector>

#include "mbprop/pulse.hpp"
#include "mbprop/series.hpp"

namespace mbprop {

/// Vapor cell description.
struct VaporSpec {
    double temperature = 75.0;      ///< degrees C
    double cell_length = 0.05;      ///< m
    double doppler_fwhm = 5.0e8;    ///< Hz
    double pressure_fwhm = 3.0e8;   ///< Hz
    double isotope_fraction = 0.2783;

    bool operator==(const VaporSpec&) const = default;
};

inline constexpr double kMinTemperature = 20.0;
inline constexpr double kMaxTemperature = 120.0;

/// Throws ParameterError on non-positive length, negative widths or a fraction outside (0, 1].
void validate(const VaporSpec& spec);

/// Saturated Rb vapor pressure in Pa from the liquid-phase formula.
/// Throws RangeError outside [20, 120] C.
double vapor_pressure(double temperature_celsius);

/// 87Rb number density in m^-3.
double number_density(const VaporSpec& spec);

/// How inhomogeneous broadening enters the atomic model.
enum class Broadening {
    Effective,        ///< Doppler and pressure folded into one Lorentzian dephasing
    VelocityClasses,  ///< pressure as dephasing, Doppler as sampled velocity classes
};

/// Extra coherence dephasing so the Lorentzian FWHM (natural_gamma/2 + gamma)/pi
/// matches the target width. Throws ParameterError if the target is narrower
/// than the natural line.
double effective_dephasing(const VaporSpec& spec, double natural_gamma, Broadening mode = Broadening::Effective);

struct VelocityClass {
    double detuning_offset;  ///< Doppler shift, rad/s
    double weight;           ///< sums to one over all classes
};

/// Gauss-Hermite sampling of the Maxwell-Boltzmann Doppler profile.
std::vector<VelocityClass> velocity_classes(const VaporSpec& spec, int count);

struct GridOptions {
    double lead = 0.5e-9;                 ///< window start before the pulse peak, s
    double tail = 2.5e-9;                 ///< window end after the pulse peak, s
    std::size_t state_time_stride = 4;    ///< keep every n-th retarded-time sample of rho
    std::size_t max_state_planes = 257;   ///< z planes kept in the state grid
    double memory_budget = 2.0 * 1024 * 1024 * 1024;  ///< bytes
};

/// Retarded-time x depth discretisation. Field lives on planes k = 0..nz at
/// z_k = k dz; retarded time on t_j = t0 + j dt, j = 0..nt-1.
struct SimGrid {
    std::size_t nz = 1;
    std::size_t nt = 2;
    double dz = 0.0;
    double dt = 0.0;
    double t0 = 0.0;
    std::size_t state_time_stride = 4;
    std::size_t max_state_planes = 257;

    Axis time_axis() const { return Axis{t0, dt, nt, "s"}; }
    double length() const noexcept { return static_cast<double>(nz) * dz; }
    std::size_t planes() const noexcept { return nz + 1; }

    /// Plane indices stored in the state grid; always includes z = 0 and z = L.
    std::vector<std::size_t> stored_planes() const;
    /// Time indices stored in the state grid.
    std::vector<std::size_t> stored_times() const;

    /// Approximate resident bytes of one run on this grid.
    double estimated_bytes(std::size_t velocity_classes = 1) const;

    bool operator==(const SimGrid&) const = default;
};

/// Builds a grid with nz * dz equal to the cell length and a window covering
/// at least [-4 sigma, +1.5 ns] around the pulse peak. Throws ParameterError for
/// non-positive steps and ResourceError above the memory budget.
SimGrid make_grid(const VaporSpec& spec, const PulseSpec& pulse, double dt, double dz, const GridOptions& options = {});

}  // namespace mbprop
