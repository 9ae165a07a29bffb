#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbprop/atomic.hpp"
#include "mbprop/medium.hpp"
#include "mbprop/pulse.hpp"
#include "mbprop/solver.hpp"

namespace mbprop {

/// Everything one temperature sweep needs. Only the temperature varies between runs.
struct ExperimentConfig {
    std::vector<double> temperatures;  ///< C
    double reference_temperature = 55.0;
    std::optional<double> amplitude = 1.0;  ///< V/m; empty means "fit"
    double amplitude_guess = 10.0;          ///< V/m, centre of the fit bracket
    double mode_area = 7.85e-9;             ///< m^2

    VaporSpec vapor;  ///< temperature field is ignored
    Broadening broadening = Broadening::Effective;
    int velocity_classes = 9;  ///< used with Broadening::VelocityClasses

    PulseSpec pulse;  ///< amplitude field is ignored

    double omega43 = 0.0;        ///< rad/s
    std::optional<double> d32;   ///< C m, overrides the default dipole
    std::optional<double> d42;
    GroundWeighting initial = GroundWeighting::Degeneracy;

    double dt = 0.5e-12;
    double dz = 0.25e-3;
    GridOptions grid;

    Schedule schedule = Schedule::Wavefront;
    std::size_t block = 64;
    int threads = 0;

    bool free_shift = false;  ///< allow a time offset per dataset in the amplitude fit
    std::size_t map_time_stride = 4;
    bool write_maps = true;

    std::filesystem::path output_dir = "out";
    std::map<double, std::filesystem::path> datasets;  ///< temperature -> histogram CSV
};

ExperimentConfig default_config();

nlohmann::json to_json(const ExperimentConfig& config);
/// Unknown keys and wrong types are ConfigErrors, as is an empty temperature list.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void validate(const ExperimentConfig& config);

/// SHA-256 of the canonical JSON dump, hex encoded.
std::string config_hash(const ExperimentConfig& config);

AtomicParams atomic_params(const ExperimentConfig& config);
VaporSpec vapor_at(const ExperimentConfig& config, double temperature);
SimGrid grid_for(const ExperimentConfig& config);
SolverOptions solver_options(const ExperimentConfig& config, bool store_states);

/// Input envelope of the given peak amplitude on the grid's time axis.
ComplexSeries input_envelope(const ExperimentConfig& config, const SimGrid& grid, double amplitude);

/// Peak envelope of a Gaussian pulse carrying one photon through `mode_area`.
double single_photon_amplitude(const PulseSpec& pulse, double mode_area, double omega_p);

struct TemperatureRun {
    double temperature = 0.0;
    RunResult result;
    TimeSeries transmitted;  ///< |E(L)|^2
};

struct SweepResult {
    std::vector<TemperatureRun> runs;
    double amplitude = 0.0;
    std::optional<double> fitted_amplitude;
    std::vector<double> residuals;  ///< per temperature, filled by the fit
    std::string config_hash;

    /// Rejects runs whose parameters differ in anything but the temperature.
    static SweepResult assemble(std::vector<TemperatureRun> runs, double amplitude, std::string hash);
};

struct SweepOptions {
    int workers = 0;         ///< concurrent temperatures, 0 = available parallelism
    bool store_states = true;
    bool write_outputs = true;
};

/// One propagate() per configured temperature at `amplitude` (the config's if omitted).
/// Outputs land in config.output_dir as run<idx>_T<T>C_<kind>.csv plus a JSON sidecar.
SweepResult run_sweep(const ExperimentConfig& config, const SweepOptions& options = {},
                      std::optional<double> amplitude = std::nullopt);

/// Emission-time smearing of every transmitted intensity.
std::vector<TimeSeries> forward_pipeline(const SweepResult& sweep, double lifetime);

struct AmplitudeFit {
    double amplitude = 0.0;
    std::vector<double> residuals;  ///< per temperature at the optimum
    std::vector<double> time_shifts;
    double objective = 0.0;
    int evaluations = 0;
    std::vector<std::pair<double, double>> curve;  ///< (amplitude, objective) at each evaluation
};

/// Brent search over log-amplitude in [1e-3, 1e3] x amplitude_guess minimising the
/// summed histogram residuals of the forward pipeline against `datasets`
/// (one per configured temperature, in order). Throws FitError, carrying the
/// best amplitude, when the optimum sits on the bracket edge.
AmplitudeFit fit_global_amplitude(const ExperimentConfig& config, const std::vector<TimeSeries>& datasets,
                                  int workers = 0);

/// read_csv with an extra non-negativity check.
TimeSeries import_histogram(const std::filesystem::path& path);

/// Loads the histogram for each configured temperature from config.datasets, or
/// from <dir>/T<T>C.csv when `dir` is given.
std::vector<TimeSeries> load_datasets(const ExperimentConfig& config,
                                      const std::optional<std::filesystem::path>& dir = std::nullopt);

/// Transmitted intensity convolved with the emission kernel, next to the
/// kernel-weighted average of re-simulations whose input pulse arrives late by
/// each quadrature node. Both live on one grid long enough for the latest arrival.
struct ConvolutionOrder {
    TimeSeries convolved;
    TimeSeries resimulated;
    std::vector<double> shifts;
    std::vector<double> weights;
};

/// Arrival-time nodes over [0, span_lifetimes * tau] with density falling as
/// exp(-s / 3 tau), and weights integrating the unit exponential kernel against
/// local cubic interpolation through the four nearest nodes. The kernel tail
/// past the last node is folded into it. Needs at least four nodes.
void emission_quadrature(double lifetime, std::size_t count, double span_lifetimes, std::vector<double>& shifts,
                         std::vector<double>& weights);

ConvolutionOrder compare_convolution_order(const ExperimentConfig& config, double temperature, double amplitude,
                                           std::size_t shifts = 20);

}  // namespace mbprop
