#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mbprop/atomic.hpp"
#include "mbprop/medium.hpp"
#include "mbprop/series.hpp"

namespace mbprop {

/// Slow envelope E(z_k, t_j) in V/m on every plane of the grid.
class FieldGrid {
public:
    FieldGrid() = default;
    explicit FieldGrid(const SimGrid& grid);

    const SimGrid& grid() const noexcept { return grid_; }
    complex& at(std::size_t plane, std::size_t t) { return values_[plane * grid_.nt + t]; }
    complex at(std::size_t plane, std::size_t t) const { return values_[plane * grid_.nt + t]; }
    std::span<const complex> plane(std::size_t k) const { return {values_.data() + k * grid_.nt, grid_.nt}; }
    std::span<complex> plane(std::size_t k) { return {values_.data() + k * grid_.nt, grid_.nt}; }
    ComplexSeries plane_series(std::size_t k) const;
    const std::vector<complex>& values() const noexcept { return values_; }

private:
    SimGrid grid_;
    std::vector<complex> values_;
};

/// Decimated rho(z, t). Stores the upper triangle; `at` rebuilds the Hermitian matrix.
class StateGrid {
public:
    StateGrid() = default;
    StateGrid(const SimGrid& grid, std::vector<std::size_t> planes, std::vector<std::size_t> times);

    bool empty() const noexcept { return data_.empty(); }
    const std::vector<std::size_t>& planes() const noexcept { return planes_; }
    const std::vector<std::size_t>& times() const noexcept { return times_; }
    double z(std::size_t plane_slot) const { return static_cast<double>(planes_[plane_slot]) * grid_.dz; }
    double t(std::size_t time_slot) const { return grid_.time_axis().value(times_[time_slot]); }
    std::size_t time_stride() const noexcept { return grid_.state_time_stride; }

    DensityMatrix at(std::size_t plane_slot, std::size_t time_slot) const;
    void store(std::size_t plane_slot, std::size_t time_slot, const DensityMatrix& rho);

    /// Slot of grid plane `k`, if stored.
    std::optional<std::size_t> plane_slot(std::size_t k) const;

private:
    static constexpr int kPacked = 10;
    SimGrid grid_;
    std::vector<std::size_t> planes_, times_;
    std::vector<std::array<complex, kPacked>> data_;
};

struct Diagnostics {
    double max_trace_error = 0.0;
    double max_hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;
};

struct RunResult {
    FieldGrid field;
    StateGrid states;
    AtomicParams params;
    VaporSpec vapor;
    double density = 0.0;  ///< m^-3
    std::vector<VelocityClass> classes;
    Diagnostics diagnostics;
    double wall_time = 0.0;  ///< s
};

enum class Schedule {
    Serial,     ///< reference: z outer, retarded time inner
    Wavefront,  ///< OpenMP over anti-diagonals of (plane, time block)
};

struct SolverOptions {
    Schedule schedule = Schedule::Wavefront;
    std::size_t block = 64;  ///< retarded-time samples per wavefront task
    int threads = 0;         ///< 0: OpenMP default
    GroundWeighting initial = GroundWeighting::Degeneracy;
    /// > 1 samples Doppler velocity classes; otherwise a single homogeneous class.
    int velocity_classes = 0;
    std::optional<double> density;  ///< overrides number_density(vapor)
    double trace_tolerance = 1e-6;
    double eigenvalue_floor = -1e-5;
    bool store_states = true;
};

/// Right-hand side of dE/dz at fixed retarded time, V/m^2.
complex polarization_source(const AtomicParams& params, const DensityMatrix& rho, double density);

/// Marches the coupled Maxwell-Bloch system over the grid: RK4 in retarded
/// time for rho on each plane, trapezoidal predictor-corrector in z for E.
/// Throws NumericalFailure naming the first (plane, time) index out of tolerance.
RunResult propagate(const AtomicParams& params, const VaporSpec& vapor, const SimGrid& grid,
                    const ComplexSeries& input, const SolverOptions& options = {});

struct ScanOptions {
    double dt = 1e-12;
    std::size_t nz = 20;
    double ramp = 1e-9;     ///< cos^2 turn-on, s
    double plateau = 3e-9;  ///< constant drive after the ramp, s
    double amplitude = 1.0; ///< V/m
    SolverOptions solver{Schedule::Serial, 64, 1, GroundWeighting::Degeneracy, 0, std::nullopt, 1e-6, -1e-5, false};
};

/// Steady-state power transmission |E(L)|^2 / |E(0)|^2 of a weak quasi-CW probe
/// at each detuning. Detunings run in parallel.
std::vector<double> probe_transmission_scan(const AtomicParams& params, const VaporSpec& vapor,
                                            const std::vector<double>& detunings, const ScanOptions& options = {});

}  // namespace mbprop
