#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mbprop/atomic.hpp"
#include "mbprop/series.hpp"
#include "mbprop/solver.hpp"

namespace mbprop {

enum class ObservableKind {
    TransmittedIntensity,
    CoherenceAbs,
    Population,
    EnsembleEnergy,
};

/// One-dimensional observable over retarded time.
struct ObservableSeries {
    ObservableKind kind = ObservableKind::TransmittedIntensity;
    std::string unit;
    TimeSeries series;
};

/// Two-dimensional observable on the stored (z, t) state grid; values[z_slot * t.size() + t_slot].
struct ObservableMap {
    ObservableKind kind = ObservableKind::CoherenceAbs;
    int i = 0, j = 0;  ///< 1-based level labels
    std::vector<double> z;
    std::vector<double> t;
    std::vector<double> values;

    double at(std::size_t z_slot, std::size_t t_slot) const { return values[z_slot * t.size() + t_slot]; }
    /// Time trace at the stored plane slot.
    TimeSeries row(std::size_t z_slot) const;
};

/// |E(L, t)|^2 in V^2/m^2.
ObservableSeries transmitted_intensity(const RunResult& result);

/// |E(0, t)|^2, the input the run was driven with.
ObservableSeries input_intensity(const RunResult& result);

/// |rho_ij(z, t)| on the stored state grid. Throws RangeError for i == j or labels outside 1..4.
ObservableMap coherence_map(const RunResult& result, Level i, Level j);

/// rho_ii(z, t) on the stored state grid.
ObservableMap population_map(const RunResult& result, Level i);

/// Excitation energy of one atom relative to |1>, in photon quanta hbar omega_p.
double excitation_quanta(const AtomicParams& params, const DensityMatrix& rho);

/// Energy gained by the atoms inside the mode volume, n A_mode int dz of the
/// per-atom excitation measured from the pre-pulse (thermal) baseline, in quanta.
/// Throws ValidationError when the state grid is missing or mode_area <= 0.
ObservableSeries ensemble_energy(const RunResult& result, double mode_area);

/// Photons carried through area A_mode by |E|^2 over the window,
/// 2 eps0 c A int |E|^2 dt / (hbar omega_p).
double photon_number(const TimeSeries& intensity, double mode_area, double omega_p);

/// Scales `series` so that the reference's peak equals one. Throws ValidationError on a
/// zero reference peak or incompatible axes.
ObservableSeries normalize_series(const ObservableSeries& series, const ObservableSeries& reference);

struct Comparison {
    double rms_residual = 0.0;
    double time_shift = 0.0;  ///< data(t) ~ sim(t - shift)
};

/// RMS residual between a simulated series and a data histogram, resampled by
/// linear interpolation onto the coarser axis. With `free_shift`, the
/// simulation is translated to the residual minimum first. Throws
/// ValidationError when the axes do not overlap.
Comparison compare_to_histogram(const TimeSeries& sim, const TimeSeries& data, bool free_shift);

/// Local maxima after the main peak that exceed `min_relative` of it.
std::vector<double> ringing_lobes(const TimeSeries& series, double min_relative = 1e-4);

/// Long-format z,t,value CSV for maps; t,value pairs for series.
void write_map_csv(const std::filesystem::path& path, const ObservableMap& map, std::size_t time_stride = 1);
void write_series_csv(const std::filesystem::path& path, const ObservableSeries& series);

std::string kind_name(ObservableKind kind);

}  // namespace mbprop
