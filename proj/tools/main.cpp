// Command-line front end: temperature sweeps, the global amplitude fit and
// the pulse-processing helpers.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mbprop/error.hpp"
#include "mbprop/experiments.hpp"
#include "mbprop/observables.hpp"
#include "mbprop/pulse.hpp"

namespace fs = std::filesystem;
using namespace mbprop;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kNumerical = 3, kFit = 4 };

ExperimentConfig config_or_defaults(const std::string& path) {
    return path.empty() ? default_config() : load_config(path);
}

int simulate(const std::string& config_path, const std::vector<double>& temperatures, const std::string& out,
             int workers, bool no_maps) {
    ExperimentConfig config = config_or_defaults(config_path);
    if (!temperatures.empty()) config.temperatures = temperatures;
    if (!out.empty()) config.output_dir = out;
    if (no_maps) config.write_maps = false;
    if (!config.amplitude) throw ConfigError("simulate needs a fixed amplitude; use `fit` for amplitude \"fit\"");
    validate(config);

    const auto sweep = run_sweep(config, SweepOptions{workers, true, true});
    for (std::size_t i = 0; i < sweep.runs.size(); ++i) {
        const auto& r = sweep.runs[i];
        const auto& tr = r.transmitted;
        const double peak = *std::max_element(tr.values.begin(), tr.values.end());
        fmt::print("run {:2}  T = {:5.1f} C  n = {:.3e} m^-3  peak |E|^2 = {:.4e}  at {:.1f} ps  ({:.2f} s)\n", i,
                   r.temperature, r.result.density, peak, peak_position(tr) * 1e12, r.result.wall_time);
    }
    fmt::print("outputs in {} (config {})\n", config.output_dir.string(), sweep.config_hash.substr(0, 12));
    return kOk;
}

int fit(const std::string& config_path, const std::string& data_dir, const std::string& out, int workers) {
    ExperimentConfig config = config_or_defaults(config_path);
    if (!out.empty()) config.output_dir = out;
    std::optional<fs::path> dir;
    if (!data_dir.empty()) dir = data_dir;
    const auto datasets = load_datasets(config, dir);

    const auto result = fit_global_amplitude(config, datasets, workers);
    fmt::print("amplitude = {:.6g} V/m after {} sweeps, summed residual {:.6g}\n", result.amplitude,
               result.evaluations, result.objective);
    for (std::size_t i = 0; i < result.residuals.size(); ++i)
        fmt::print("  T = {:5.1f} C  residual {:.6g}  shift {:.2f} ps\n", config.temperatures[i],
                   result.residuals[i], result.time_shifts[i] * 1e12);

    fs::create_directories(config.output_dir);
    nlohmann::json j = {{"config_hash", config_hash(config)},
                        {"amplitude_v_per_m", result.amplitude},
                        {"objective", result.objective},
                        {"evaluations", result.evaluations},
                        {"temperatures", config.temperatures},
                        {"residuals", result.residuals},
                        {"time_shifts_s", result.time_shifts}};
    std::ofstream(config.output_dir / "amplitude_fit.json") << j.dump(2) << '\n';
    std::ofstream curve(config.output_dir / "amplitude_fit_curve.csv");
    curve << "amplitude [V/m],objective [V^2/m^2]\n";
    for (const auto& [a, f] : result.curve) curve << fmt::format("{:.17g},{:.17g}\n", a, f);

    config.amplitude = result.amplitude;
    run_sweep(config, SweepOptions{workers, true, true});
    fmt::print("fitted sweep written to {}\n", config.output_dir.string());
    return kOk;
}

int fit_emg_cmd(const std::string& input) {
    const auto series = import_histogram(input);
    const auto f = fit_emg(series);
    fmt::print("t0 = {:.4f} ps\nwidth_fwhm = {:.4f} ps\nlifetime = {:.4f} ps\nscale = {:.6g}\nrms = {:.6g}\n",
               f.t0 * 1e12, f.width_fwhm * 1e12, f.lifetime * 1e12, f.scale, f.rms_residual);
    return kOk;
}

int deconvolve_cmd(const std::string& input, const std::string& output, double lifetime, double epsilon) {
    const auto series = import_histogram(input);
    const auto out = deconvolve_emission(series, lifetime, epsilon);
    write_csv(output, out, "t", "deconvolved", "1");
    fmt::print("wrote {} samples to {}\n", out.size(), output);
    return kOk;
}

int spectrum_cmd(const std::string& input, const std::string& output) {
    const Spectrum s = read_csv(input);
    const auto g = fit_gaussian(s);
    fmt::print("effective Gaussian: centre {:.4f} GHz, FWHM {:.4f} GHz -> temporal FWHM {:.3f} ps\n", g.center * 1e-9,
               g.fwhm * 1e-9, temporal_fwhm_from_spectral(g.fwhm) * 1e12);
    if (!output.empty()) {
        const auto t = spectrum_to_time(s);
        write_csv(output, t, "t", "intensity", "1");
        fmt::print("transform-limited profile: FWHM {:.3f} ps, written to {}\n", fwhm(t) * 1e12, output);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Maxwell-Bloch propagation of single-photon pulses through warm 87Rb vapor"};
    app.require_subcommand(1);

    std::string config_path, out, data_dir, input, output;
    std::vector<double> temperatures;
    int workers = 0;
    bool dump = false, no_maps = false;
    double lifetime = 134e-12, epsilon = 1e-3;

    auto* sim = app.add_subcommand("simulate", "run a temperature sweep");
    sim->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sim->add_option("--temperature", temperatures, "override the temperature list (C), repeatable");
    sim->add_option("--out", out, "output directory");
    sim->add_option("--workers", workers, "concurrent temperature runs (0 = all cores)");
    sim->add_flag("--dump-defaults", dump, "print the default config and exit");
    sim->add_flag("--no-maps", no_maps, "skip the (z, t) coherence and population maps");

    auto* fitc = app.add_subcommand("fit", "fit the global field amplitude to measured histograms");
    fitc->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    fitc->add_option("--data", data_dir, "directory with T<temperature>C.csv histograms");
    fitc->add_option("--out", out, "output directory");
    fitc->add_option("--workers", workers, "concurrent temperature runs (0 = all cores)");

    auto* tools = app.add_subcommand("pulse-tools", "pulse processing helpers");
    tools->require_subcommand(1);
    auto* emg = tools->add_subcommand("fit-emg", "fit an exponentially modified Gaussian to a histogram");
    emg->add_option("--input", input, "two-column CSV")->required()->check(CLI::ExistingFile);
    auto* dec = tools->add_subcommand("deconvolve", "remove the exponential emission kernel");
    dec->add_option("--input", input, "two-column CSV")->required()->check(CLI::ExistingFile);
    dec->add_option("--output", output, "output CSV")->required();
    dec->add_option("--lifetime", lifetime, "emission lifetime, s");
    dec->add_option("--epsilon", epsilon, "regularisation in (0, 1]");
    auto* spec = tools->add_subcommand("spectrum", "effective Gaussian and transform-limited profile of a spectrum");
    spec->add_option("--input", input, "two-column CSV, frequency in Hz")->required()->check(CLI::ExistingFile);
    spec->add_option("--output", output, "write the temporal intensity profile here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*sim) {
            if (dump) {
                fmt::print("{}\n", to_json(default_config()).dump(2));
                return kOk;
            }
            return simulate(config_path, temperatures, out, workers, no_maps);
        }
        if (*fitc) return fit(config_path, data_dir, out, workers);
        if (*emg) return fit_emg_cmd(input);
        if (*dec) return deconvolve_cmd(input, output, lifetime, epsilon);
        if (*spec) return spectrum_cmd(input, output);
    } catch (const NumericalFailure& e) {
        fmt::print(stderr, "numerical failure: {}\n", e.what());
        return kNumerical;
    } catch (const FitError& e) {
        fmt::print(stderr, "fit failed: {}\n", e.what());
        return kFit;
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const ParameterError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const RangeError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const ResourceError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const FormatError& e) {
        fmt::print(stderr, "input error: {}\n", e.what());
        return kConfig;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kFailure;
    }
    return kOk;
}
