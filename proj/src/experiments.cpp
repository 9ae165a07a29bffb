#include "mbprop/experiments.hpp"

#include <omp.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>
#include <fmt/os.h>

#include "mbprop/constants.hpp"
#include "mbprop/error.hpp"
#include "mbprop/observables.hpp"

namespace mbprop {

using nlohmann::json;

namespace {

constexpr const char* kWeightingNames[] = {"degeneracy", "equal", "lower_only"};

std::string weighting_name(GroundWeighting w) { return kWeightingNames[static_cast<int>(w)]; }

GroundWeighting weighting_from(const std::string& s) {
    for (int i = 0; i < 3; ++i)
        if (s == kWeightingNames[i]) return static_cast<GroundWeighting>(i);
    throw ConfigError(fmt::format("unknown ground_weighting '{}'", s));
}

std::string temperature_key(double t) { return fmt::format("{:g}", t); }

int resolve_workers(int workers) { return workers > 0 ? workers : omp_get_max_threads(); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be a table", where));
    for (const auto& [key, value] : j.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
        if (!known) throw ConfigError(fmt::format("unknown key '{}' in '{}'", key, where));
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("bad value for '{}': {}", key, e.what()));
    }
}

void read_optional(const json& j, const char* key, std::optional<double>& out) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        out.reset();
        return;
    }
    double v = 0.0;
    read(j, key, v);
    out = v;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string sha256_hex(const std::string& text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string run_stem(std::size_t index, double temperature) {
    return fmt::format("run{:02}_T{}C", index, temperature_key(temperature));
}

// Rethrow the first failure in index order, tagged with the run that raised it.
void rethrow_first(const std::vector<std::exception_ptr>& errors, const std::vector<double>& temperatures) {
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const NumericalFailure& e) {
            throw NumericalFailure(fmt::format("run {} (T = {} C): {}", i, temperatures[i], e.what()), e.z_index(),
                                   e.t_index());
        }
    }
}

void write_run_outputs(const ExperimentConfig& config, const SweepResult& sweep, std::size_t index,
                       const TimeSeries* reference) {
    const auto& run = sweep.runs[index];
    const auto& r = run.result;
    const auto dir = config.output_dir;
    const auto stem = run_stem(index, run.temperature);
    std::vector<std::string> files;
    const auto path = [&](const std::string& kind) {
        files.push_back(stem + "_" + kind + ".csv");
        return dir / files.back();
    };

    write_series_csv(path("transmitted"), transmitted_intensity(r));
    write_series_csv(path("input"), input_intensity(r));
    TimeSeries convolved = convolve_emission(run.transmitted, config.pulse.emission_lifetime);
    write_csv(path("convolved"), convolved, "t", "convolved_intensity", "V^2/m^2");
    if (reference) {
        const double peak = *std::max_element(reference->values.begin(), reference->values.end());
        if (peak > 0.0) {
            TimeSeries normalized = run.transmitted;
            for (double& v : normalized.values) v /= peak;
            write_csv(path("normalized"), normalized, "t", "normalized_intensity", "1");
        }
    }
    if (!r.states.empty()) {
        write_series_csv(path("energy"), ensemble_energy(r, config.mode_area));
        if (config.write_maps) {
            write_map_csv(path("rho31"), coherence_map(r, Level::E3, Level::G1), config.map_time_stride);
            write_map_csv(path("rho41"), coherence_map(r, Level::E4, Level::G1), config.map_time_stride);
            write_map_csv(path("rho43"), coherence_map(r, Level::E4, Level::E3), config.map_time_stride);
            write_map_csv(path("rho33"), population_map(r, Level::E3), config.map_time_stride);
            write_map_csv(path("rho44"), population_map(r, Level::E4), config.map_time_stride);
        }
    }

    const auto& g = r.field.grid();
    const auto& p = r.params;
    json meta = {
        {"config_hash", sweep.config_hash},
        {"run", index},
        {"temperature_c", run.temperature},
        {"amplitude_v_per_m", sweep.amplitude},
        {"density_m3", r.density},
        {"grid", {{"nz", g.nz}, {"nt", g.nt}, {"dz", g.dz}, {"dt", g.dt}, {"t0", g.t0}}},
        {"atomic",
         {{"omega21", p.omega21},
          {"omega43", p.omega43},
          {"delta_p", p.delta_p},
          {"omega_p", p.omega_p},
          {"dipoles", {p.d31, p.d32, p.d41, p.d42}},
          {"decay", {p.gamma31, p.gamma32, p.gamma41, p.gamma42}},
          {"gamma_deph", p.gamma_deph}}},
        {"velocity_classes", r.classes.size()},
        {"diagnostics",
         {{"max_trace_error", r.diagnostics.max_trace_error},
          {"max_hermiticity_error", r.diagnostics.max_hermiticity_error},
          {"min_eigenvalue", r.diagnostics.min_eigenvalue}}},
        {"wall_time_s", r.wall_time},
        {"files", files},
    };
    std::ofstream(dir / (stem + ".json")) << meta.dump(2) << '\n';
}

double kernel_tail(double s, double lifetime) { return std::exp(-s / lifetime); }

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig c;
    for (double t = 55.0; t <= 105.0; t += 5.0) c.temperatures.push_back(t);
    c.omega43 = constants::rb87_excited_splitting;
    return c;
}

json to_json(const ExperimentConfig& c) {
    json datasets = json::object();
    for (const auto& [t, p] : c.datasets) datasets[temperature_key(t)] = p.string();
    return {
        {"temperatures", c.temperatures},
        {"reference_temperature", c.reference_temperature},
        {"amplitude", c.amplitude ? json(*c.amplitude) : json("fit")},
        {"amplitude_guess", c.amplitude_guess},
        {"mode_area", c.mode_area},
        {"output_dir", c.output_dir.string()},
        {"datasets", datasets},
        {"vapor",
         {{"cell_length", c.vapor.cell_length},
          {"doppler_fwhm", c.vapor.doppler_fwhm},
          {"pressure_fwhm", c.vapor.pressure_fwhm},
          {"isotope_fraction", c.vapor.isotope_fraction},
          {"broadening", c.broadening == Broadening::Effective ? "effective" : "velocity_classes"},
          {"velocity_classes", c.velocity_classes}}},
        {"pulse",
         {{"spectral_fwhm", c.pulse.spectral_fwhm},
          {"center_detuning", c.pulse.center_detuning},
          {"emission_lifetime", c.pulse.emission_lifetime},
          {"arrival_time", c.pulse.arrival_time}}},
        {"atomic",
         {{"omega43", c.omega43},
          {"d32", optional_json(c.d32)},
          {"d42", optional_json(c.d42)},
          {"ground_weighting", weighting_name(c.initial)}}},
        {"grid",
         {{"dt", c.dt},
          {"dz", c.dz},
          {"lead", c.grid.lead},
          {"tail", c.grid.tail},
          {"state_time_stride", c.grid.state_time_stride},
          {"max_state_planes", c.grid.max_state_planes},
          {"memory_budget", c.grid.memory_budget}}},
        {"solver",
         {{"schedule", c.schedule == Schedule::Serial ? "serial" : "wavefront"},
          {"block", c.block},
          {"threads", c.threads}}},
        {"fit", {{"free_shift", c.free_shift}}},
        {"output", {{"write_maps", c.write_maps}, {"map_time_stride", c.map_time_stride}}},
    };
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c = default_config();
    check_keys(j, "config",
               {"temperatures", "reference_temperature", "amplitude", "amplitude_guess", "mode_area", "output_dir",
                "datasets", "vapor", "pulse", "atomic", "grid", "solver", "fit", "output"});
    read(j, "temperatures", c.temperatures);
    read(j, "reference_temperature", c.reference_temperature);
    if (j.contains("amplitude")) {
        const auto& a = j.at("amplitude");
        if (a.is_string() && a.get<std::string>() == "fit")
            c.amplitude.reset();
        else if (a.is_number())
            c.amplitude = a.get<double>();
        else
            throw ConfigError("'amplitude' must be a number (V/m) or \"fit\"");
    }
    read(j, "amplitude_guess", c.amplitude_guess);
    read(j, "mode_area", c.mode_area);
    std::string out = c.output_dir.string();
    read(j, "output_dir", out);
    c.output_dir = out;
    if (j.contains("datasets")) {
        const auto& d = j.at("datasets");
        if (!d.is_object()) throw ConfigError("'datasets' must be a table of temperature -> path");
        for (const auto& [key, value] : d.items()) {
            double t = 0.0;
            try {
                t = std::stod(key);
            } catch (const std::exception&) {
                throw ConfigError(fmt::format("dataset key '{}' is not a temperature", key));
            }
            if (!value.is_string()) throw ConfigError(fmt::format("dataset path for {} C must be a string", key));
            c.datasets[t] = value.get<std::string>();
        }
    }

    if (j.contains("vapor")) {
        const auto& v = j.at("vapor");
        check_keys(v, "vapor",
                   {"cell_length", "doppler_fwhm", "pressure_fwhm", "isotope_fraction", "broadening",
                    "velocity_classes"});
        read(v, "cell_length", c.vapor.cell_length);
        read(v, "doppler_fwhm", c.vapor.doppler_fwhm);
        read(v, "pressure_fwhm", c.vapor.pressure_fwhm);
        read(v, "isotope_fraction", c.vapor.isotope_fraction);
        std::string mode = "effective";
        read(v, "broadening", mode);
        if (mode == "effective")
            c.broadening = Broadening::Effective;
        else if (mode == "velocity_classes")
            c.broadening = Broadening::VelocityClasses;
        else
            throw ConfigError(fmt::format("unknown broadening '{}'", mode));
        read(v, "velocity_classes", c.velocity_classes);
    }
    if (j.contains("pulse")) {
        const auto& p = j.at("pulse");
        check_keys(p, "pulse", {"spectral_fwhm", "center_detuning", "emission_lifetime", "arrival_time"});
        read(p, "spectral_fwhm", c.pulse.spectral_fwhm);
        read(p, "center_detuning", c.pulse.center_detuning);
        read(p, "emission_lifetime", c.pulse.emission_lifetime);
        read(p, "arrival_time", c.pulse.arrival_time);
    }
    if (j.contains("atomic")) {
        const auto& a = j.at("atomic");
        check_keys(a, "atomic", {"omega43", "d32", "d42", "ground_weighting"});
        read(a, "omega43", c.omega43);
        read_optional(a, "d32", c.d32);
        read_optional(a, "d42", c.d42);
        std::string w = weighting_name(c.initial);
        read(a, "ground_weighting", w);
        c.initial = weighting_from(w);
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        check_keys(g, "grid", {"dt", "dz", "lead", "tail", "state_time_stride", "max_state_planes", "memory_budget"});
        read(g, "dt", c.dt);
        read(g, "dz", c.dz);
        read(g, "lead", c.grid.lead);
        read(g, "tail", c.grid.tail);
        read(g, "state_time_stride", c.grid.state_time_stride);
        read(g, "max_state_planes", c.grid.max_state_planes);
        read(g, "memory_budget", c.grid.memory_budget);
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        check_keys(s, "solver", {"schedule", "block", "threads"});
        std::string schedule = "wavefront";
        read(s, "schedule", schedule);
        if (schedule == "serial")
            c.schedule = Schedule::Serial;
        else if (schedule == "wavefront")
            c.schedule = Schedule::Wavefront;
        else
            throw ConfigError(fmt::format("unknown schedule '{}'", schedule));
        read(s, "block", c.block);
        read(s, "threads", c.threads);
    }
    if (j.contains("fit")) {
        check_keys(j.at("fit"), "fit", {"free_shift"});
        read(j.at("fit"), "free_shift", c.free_shift);
    }
    if (j.contains("output")) {
        const auto& o = j.at("output");
        check_keys(o, "output", {"write_maps", "map_time_stride"});
        read(o, "write_maps", c.write_maps);
        read(o, "map_time_stride", c.map_time_stride);
    }
    validate(c);
    return c;
}

void validate(const ExperimentConfig& c) {
    if (c.temperatures.empty()) throw ConfigError("temperature list is empty");
    for (double t : c.temperatures)
        if (!(t >= kMinTemperature && t <= kMaxTemperature))
            throw ConfigError(fmt::format("temperature {} C outside [{}, {}] C", t, kMinTemperature, kMaxTemperature));
    if (c.amplitude && !(*c.amplitude > 0.0)) throw ConfigError("amplitude must be > 0");
    if (!(c.amplitude_guess > 0.0)) throw ConfigError("amplitude_guess must be > 0");
    if (!(c.mode_area > 0.0)) throw ConfigError("mode_area must be > 0");
    if (!(c.dt > 0.0) || !(c.dz > 0.0)) throw ConfigError("grid steps must be > 0");
    if (c.broadening == Broadening::VelocityClasses && c.velocity_classes < 2)
        throw ConfigError("velocity_classes must be >= 2 in velocity_classes mode");
    if (c.block == 0) throw ConfigError("solver block must be > 0");
    try {
        validate(c.vapor);
        validate(PulseSpec{c.pulse.spectral_fwhm, 1.0, c.pulse.center_detuning, c.pulse.emission_lifetime,
                           c.pulse.arrival_time});
        validate(atomic_params(c));
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    ExperimentConfig c = config_from_json(j);
    // Dataset paths are relative to the config file.
    for (auto& [t, p] : c.datasets)
        if (p.is_relative()) p = path.parent_path() / p;
    return c;
}

std::string config_hash(const ExperimentConfig& config) { return sha256_hex(to_json(config).dump()); }

AtomicParams atomic_params(const ExperimentConfig& c) {
    AtomicParams p = default_rb87_params(c.pulse.center_detuning);
    p.omega43 = c.omega43;
    if (c.d32) p.d32 = *c.d32;
    if (c.d42) p.d42 = *c.d42;
    p.gamma_deph = effective_dephasing(c.vapor, constants::rb87_natural_linewidth, c.broadening);
    return p;
}

VaporSpec vapor_at(const ExperimentConfig& c, double temperature) {
    VaporSpec v = c.vapor;
    v.temperature = temperature;
    return v;
}

SimGrid grid_for(const ExperimentConfig& c) {
    return make_grid(vapor_at(c, c.temperatures.front()), c.pulse, c.dt, c.dz, c.grid);
}

SolverOptions solver_options(const ExperimentConfig& c, bool store_states) {
    SolverOptions o;
    o.schedule = c.schedule;
    o.block = c.block;
    o.threads = c.threads;
    o.initial = c.initial;
    o.velocity_classes = c.broadening == Broadening::VelocityClasses ? c.velocity_classes : 0;
    o.store_states = store_states;
    return o;
}

ComplexSeries input_envelope(const ExperimentConfig& c, const SimGrid& grid, double amplitude) {
    PulseSpec p = c.pulse;
    p.amplitude = amplitude;
    return gaussian_envelope(p, grid.time_axis());
}

double single_photon_amplitude(const PulseSpec& pulse, double mode_area, double omega_p) {
    if (!(mode_area > 0.0) || !(omega_p > 0.0)) throw ParameterError("mode_area and omega_p must be > 0");
    const double dt = pulse.temporal_fwhm();
    const double shape_integral = dt * std::sqrt(std::numbers::pi / (4.0 * constants::ln2));
    const double flux = 2.0 * constants::epsilon0 * constants::speed_of_light * mode_area;
    return std::sqrt(constants::hbar * omega_p / (flux * shape_integral));
}

SweepResult SweepResult::assemble(std::vector<TemperatureRun> runs, double amplitude, std::string hash) {
    for (std::size_t i = 1; i < runs.size(); ++i) {
        const auto& a = runs.front().result;
        const auto& b = runs[i].result;
        VaporSpec va = a.vapor, vb = b.vapor;
        va.temperature = vb.temperature = 0.0;
        const bool same = a.params == b.params && va == vb && a.field.grid() == b.field.grid() &&
                          a.classes.size() == b.classes.size() &&
                          std::equal(a.classes.begin(), a.classes.end(), b.classes.begin(),
                                     [](const VelocityClass& x, const VelocityClass& y) {
                                         return x.detuning_offset == y.detuning_offset && x.weight == y.weight;
                                     }) &&
                          a.field.plane(0).size() == b.field.plane(0).size() &&
                          std::equal(a.field.plane(0).begin(), a.field.plane(0).end(), b.field.plane(0).begin());
        if (!same)
            throw ValidationError(
                fmt::format("run {} differs from run 0 in a parameter other than the temperature", i));
    }
    SweepResult s;
    s.runs = std::move(runs);
    s.amplitude = amplitude;
    s.config_hash = std::move(hash);
    return s;
}

SweepResult run_sweep(const ExperimentConfig& config, const SweepOptions& options, std::optional<double> amplitude) {
    validate(config);
    const double a = amplitude ? *amplitude : config.amplitude.value_or(config.amplitude_guess);
    const AtomicParams params = atomic_params(config);
    const SimGrid grid = grid_for(config);
    const ComplexSeries input = input_envelope(config, grid, a);
    const SolverOptions solver = solver_options(config, options.store_states);

    const auto& temps = config.temperatures;
    const auto n = static_cast<long>(temps.size());
    std::vector<TemperatureRun> runs(temps.size());
    std::vector<std::exception_ptr> errors(temps.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(options.workers))
    for (long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            runs[k].temperature = temps[k];
            runs[k].result = propagate(params, vapor_at(config, temps[k]), grid, input, solver);
            runs[k].transmitted = transmitted_intensity(runs[k].result).series;
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    rethrow_first(errors, temps);

    SweepResult sweep = SweepResult::assemble(std::move(runs), a, config_hash(config));
    if (options.write_outputs) {
        std::filesystem::create_directories(config.output_dir);
        const TemperatureRun* reference = nullptr;
        for (const auto& r : sweep.runs)
            if (r.temperature == config.reference_temperature) {
                reference = &r;
                break;
            }
        for (std::size_t i = 0; i < sweep.runs.size(); ++i)
            write_run_outputs(config, sweep, i, reference ? &reference->transmitted : nullptr);
        std::ofstream(config.output_dir / "config.json") << to_json(config).dump(2) << '\n';
    }
    return sweep;
}

std::vector<TimeSeries> forward_pipeline(const SweepResult& sweep, double lifetime) {
    std::vector<TimeSeries> out;
    out.reserve(sweep.runs.size());
    for (const auto& r : sweep.runs) out.push_back(convolve_emission(r.transmitted, lifetime));
    return out;
}

AmplitudeFit fit_global_amplitude(const ExperimentConfig& config, const std::vector<TimeSeries>& datasets,
                                  int workers) {
    validate(config);
    if (datasets.size() != config.temperatures.size())
        throw ConfigError(fmt::format("{} datasets for {} temperatures", datasets.size(), config.temperatures.size()));

    AmplitudeFit fit;
    const SweepOptions options{workers, false, false};
    const auto objective = [&](double log_amplitude) {
        const double a = std::exp(log_amplitude);
        const auto sim = forward_pipeline(run_sweep(config, options, a), config.pulse.emission_lifetime);
        double total = 0.0;
        for (std::size_t i = 0; i < sim.size(); ++i)
            total += compare_to_histogram(sim[i], datasets[i], config.free_shift).rms_residual;
        fit.curve.emplace_back(a, total);
        return total;
    };

    const double centre = std::log(config.amplitude_guess);
    const double half = std::log(1e3);
    std::uintmax_t max_iter = 80;
    const auto [best, value] =
        boost::math::tools::brent_find_minima(objective, centre - half, centre + half, 24, max_iter);
    fit.evaluations = static_cast<int>(fit.curve.size());

    const double a = std::exp(best);
    if (std::abs(best - (centre - half)) < 1e-3 * half || std::abs(best - (centre + half)) < 1e-3 * half) {
        std::string dump;
        auto curve = fit.curve;
        std::sort(curve.begin(), curve.end());
        for (const auto& [x, f] : curve) dump += fmt::format("\n  {:.6g} V/m -> {:.6g}", x, f);
        throw FitError(fmt::format("amplitude optimum {:.6g} V/m sits on the bracket edge [{:.3g}, {:.3g}] V/m; "
                                   "residual curve:{}",
                                   a, config.amplitude_guess * 1e-3, config.amplitude_guess * 1e3, dump),
                       {a});
    }

    fit.amplitude = a;
    fit.objective = value;
    const auto sim = forward_pipeline(run_sweep(config, options, a), config.pulse.emission_lifetime);
    for (std::size_t i = 0; i < sim.size(); ++i) {
        const auto c = compare_to_histogram(sim[i], datasets[i], config.free_shift);
        fit.residuals.push_back(c.rms_residual);
        fit.time_shifts.push_back(c.time_shift);
    }
    return fit;
}

TimeSeries import_histogram(const std::filesystem::path& path) {
    TimeSeries s = read_csv(path);
    for (double v : s.values)
        if (v < 0.0) throw FormatError(fmt::format("{}: negative histogram value", path.string()));
    return s;
}

std::vector<TimeSeries> load_datasets(const ExperimentConfig& config, const std::optional<std::filesystem::path>& dir) {
    std::vector<TimeSeries> out;
    for (double t : config.temperatures) {
        std::filesystem::path p;
        if (dir) {
            p = *dir / fmt::format("T{}C.csv", temperature_key(t));
        } else {
            const auto it = config.datasets.find(t);
            if (it == config.datasets.end()) throw ConfigError(fmt::format("no dataset for {} C", t));
            p = it->second;
        }
        out.push_back(import_histogram(p));
    }
    return out;
}

void emission_quadrature(double lifetime, std::size_t count, double span_lifetimes, std::vector<double>& shifts,
                         std::vector<double>& weights) {
    if (!(lifetime > 0.0) || count < 4 || !(span_lifetimes > 0.0))
        throw ParameterError("emission quadrature needs lifetime > 0, four nodes and a positive span");
    const double scale = 3.0 * lifetime;
    const double mass = 1.0 - std::exp(-span_lifetimes * lifetime / scale);
    shifts.assign(count, 0.0);
    weights.assign(count, 0.0);
    for (std::size_t i = 1; i < count; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(count - 1);
        shifts[i] = -scale * std::log(1.0 - u * mass);
    }
    shifts.back() = span_lifetimes * lifetime;
    // Each interval integrates K against the cubic through its four nearest nodes.
    using Rule = boost::math::quadrature::gauss<double, 10>;
    for (std::size_t i = 0; i + 1 < count; ++i) {
        const std::size_t lo = std::min(i > 0 ? i - 1 : 0, count - 4);
        const double a = shifts[i], b = shifts[i + 1];
        for (std::size_t j = lo; j < lo + 4; ++j) {
            const auto basis = [&](double s) {
                double l = std::exp(-(s - a) / lifetime) / lifetime;
                for (std::size_t k = lo; k < lo + 4; ++k)
                    if (k != j) l *= (s - shifts[k]) / (shifts[j] - shifts[k]);
                return l;
            };
            weights[j] += std::exp(-a / lifetime) * Rule::integrate(basis, a, b);
        }
    }
    weights.back() += kernel_tail(shifts.back(), lifetime);
}

ConvolutionOrder compare_convolution_order(const ExperimentConfig& config, double temperature, double amplitude,
                                           std::size_t shifts) {
    constexpr double kSpan = 8.0;
    const double tau = config.pulse.emission_lifetime;
    ExperimentConfig c = config;
    c.temperatures = {temperature};
    c.grid.tail += kSpan * tau;
    validate(c);

    ConvolutionOrder out;
    emission_quadrature(tau, shifts, kSpan, out.shifts, out.weights);

    const AtomicParams params = atomic_params(c);
    const VaporSpec vapor = vapor_at(c, temperature);
    const SimGrid grid = grid_for(c);
    const SolverOptions solver = solver_options(c, false);

    const auto run = [&](double arrival) {
        ExperimentConfig shifted = c;
        shifted.pulse.arrival_time += arrival;
        return transmitted_intensity(propagate(params, vapor, grid, input_envelope(shifted, grid, amplitude), solver))
            .series;
    };

    out.convolved = convolve_emission(run(0.0), tau);

    const auto n = static_cast<long>(shifts);
    std::vector<TimeSeries> traces(shifts);
    std::vector<std::exception_ptr> errors(shifts);
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) {
        try {
            traces[static_cast<std::size_t>(i)] = run(out.shifts[static_cast<std::size_t>(i)]);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    out.resimulated = traces.front();
    std::fill(out.resimulated.values.begin(), out.resimulated.values.end(), 0.0);
    for (std::size_t i = 0; i < shifts; ++i)
        for (std::size_t j = 0; j < out.resimulated.values.size(); ++j)
            out.resimulated.values[j] += out.weights[i] * traces[i].values[j];
    return out;
}

}  // namespace mbprop
