#include "mbprop/observables.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/os.h>

#include "mbprop/constants.hpp"
#include "mbprop/error.hpp"

namespace mbprop {

namespace {

TimeSeries intensity_of(const FieldGrid& field, std::size_t plane) {
    TimeSeries s;
    s.axis = field.grid().time_axis();
    s.axis.unit = "s";
    const auto p = field.plane(plane);
    s.values.resize(p.size());
    std::transform(p.begin(), p.end(), s.values.begin(), [](complex e) { return std::norm(e); });
    return s;
}

void require_states(const RunResult& result) {
    if (result.states.empty()) throw ValidationError("run result carries no state grid");
}

template <typename F>
ObservableMap map_of(const RunResult& result, ObservableKind kind, int i, int j, F&& value) {
    require_states(result);
    const auto& st = result.states;
    ObservableMap map;
    map.kind = kind;
    map.i = i;
    map.j = j;
    for (std::size_t p = 0; p < st.planes().size(); ++p) map.z.push_back(st.z(p));
    for (std::size_t t = 0; t < st.times().size(); ++t) map.t.push_back(st.t(t));
    map.values.reserve(map.z.size() * map.t.size());
    for (std::size_t p = 0; p < map.z.size(); ++p)
        for (std::size_t t = 0; t < map.t.size(); ++t) map.values.push_back(value(st.at(p, t)));
    return map;
}

}  // namespace

std::string kind_name(ObservableKind kind) {
    switch (kind) {
        case ObservableKind::TransmittedIntensity: return "transmitted_intensity";
        case ObservableKind::CoherenceAbs: return "coherence_abs";
        case ObservableKind::Population: return "population";
        case ObservableKind::EnsembleEnergy: return "ensemble_energy";
    }
    return "unknown";
}

TimeSeries ObservableMap::row(std::size_t z_slot) const {
    TimeSeries s;
    const double step = t.size() > 1 ? t[1] - t[0] : 1.0;
    s.axis = Axis{t.empty() ? 0.0 : t.front(), step, t.size(), "s"};
    s.values.assign(values.begin() + static_cast<std::ptrdiff_t>(z_slot * t.size()),
                    values.begin() + static_cast<std::ptrdiff_t>((z_slot + 1) * t.size()));
    return s;
}

ObservableSeries transmitted_intensity(const RunResult& result) {
    return {ObservableKind::TransmittedIntensity, "V^2/m^2", intensity_of(result.field, result.field.grid().nz)};
}

ObservableSeries input_intensity(const RunResult& result) {
    return {ObservableKind::TransmittedIntensity, "V^2/m^2", intensity_of(result.field, 0)};
}

ObservableMap coherence_map(const RunResult& result, Level i, Level j) {
    if (i == j) throw RangeError("coherence map needs two distinct levels");
    const int a = index_of(i), b = index_of(j);
    return map_of(result, ObservableKind::CoherenceAbs, a + 1, b + 1,
                  [a, b](const DensityMatrix& rho) { return std::abs(rho(a, b)); });
}

ObservableMap population_map(const RunResult& result, Level i) {
    const int a = index_of(i);
    return map_of(result, ObservableKind::Population, a + 1, a + 1,
                  [a](const DensityMatrix& rho) { return rho(a, a).real(); });
}

double excitation_quanta(const AtomicParams& params, const DensityMatrix& rho) {
    const double energy = params.omega21 * rho(1, 1).real() + params.omega31() * rho(2, 2).real() +
                          params.omega41() * rho(3, 3).real();
    return energy / params.omega_p;
}

ObservableSeries ensemble_energy(const RunResult& result, double mode_area) {
    require_states(result);
    if (!(mode_area > 0.0)) throw ValidationError("mode_area must be > 0");
    const auto& st = result.states;
    const std::size_t np = st.planes().size();
    const std::size_t nt = st.times().size();

    std::vector<double> baseline(np);
    for (std::size_t p = 0; p < np; ++p) baseline[p] = excitation_quanta(result.params, st.at(p, 0));

    TimeSeries s;
    s.axis = Axis{st.t(0), nt > 1 ? st.t(1) - st.t(0) : 1.0, nt, "s"};
    s.values.assign(nt, 0.0);
    const double atoms_per_length = result.density * mode_area;
    for (std::size_t t = 0; t < nt; ++t) {
        double integral = 0.0;
        for (std::size_t p = 0; p + 1 < np; ++p) {
            const double q0 = excitation_quanta(result.params, st.at(p, t)) - baseline[p];
            const double q1 = excitation_quanta(result.params, st.at(p + 1, t)) - baseline[p + 1];
            integral += 0.5 * (q0 + q1) * (st.z(p + 1) - st.z(p));
        }
        s.values[t] = atoms_per_length * integral;
    }
    return {ObservableKind::EnsembleEnergy, "quanta", std::move(s)};
}

double photon_number(const TimeSeries& intensity, double mode_area, double omega_p) {
    const double flux = 2.0 * constants::epsilon0 * constants::speed_of_light * mode_area / (constants::hbar * omega_p);
    return flux * integrate(intensity);
}

ObservableSeries normalize_series(const ObservableSeries& series, const ObservableSeries& reference) {
    if (series.series.axis.unit != reference.series.axis.unit || std::abs(series.series.axis.step - reference.series.axis.step) >
                                                                     1e-9 * std::abs(reference.series.axis.step))
        throw ValidationError("normalize_series: incompatible axes");
    const auto& ref = reference.series.values;
    const double peak = ref.empty() ? 0.0 : *std::max_element(ref.begin(), ref.end());
    if (!(peak > 0.0)) throw ValidationError("normalize_series: reference peak is zero");
    ObservableSeries out = series;
    out.unit = "normalized";
    for (double& v : out.series.values) v /= peak;
    return out;
}

Comparison compare_to_histogram(const TimeSeries& sim, const TimeSeries& data, bool free_shift) {
    validate(sim);
    validate(data);
    if (sim.values.empty() || data.values.empty()) throw ValidationError("compare_to_histogram: empty series");
    const double lo = std::max(sim.axis.start, data.axis.start);
    const double hi = std::min(sim.axis.back(), data.axis.back());
    if (!(hi > lo)) throw ValidationError("compare_to_histogram: series do not overlap");

    const bool sim_coarser = sim.axis.step > data.axis.step;
    const double step = std::max(sim.axis.step, data.axis.step);
    const double fine = std::min(sim.axis.step, data.axis.step);
    std::vector<double> ts;
    const double anchor = sim_coarser ? sim.axis.start : data.axis.start;
    for (double k = std::ceil((lo - anchor) / step - 1e-9); anchor + k * step <= hi + 1e-12 * step; k += 1.0)
        ts.push_back(anchor + k * step);
    if (ts.empty()) throw ValidationError("compare_to_histogram: no common samples");

    std::vector<double> target(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) target[i] = sample_linear(data, ts[i]);

    const auto residual = [&](double shift) {
        double sum = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const double d = sample_linear(sim, ts[i] - shift) - target[i];
            sum += d * d;
        }
        return std::sqrt(sum / static_cast<double>(ts.size()));
    };

    Comparison out{residual(0.0), 0.0};
    if (!free_shift) return out;

    const double span = 0.25 * (hi - lo);
    const auto n = static_cast<long>(std::floor(span / fine));
    double best_shift = 0.0, best = out.rms_residual;
    for (long k = -n; k <= n; ++k) {
        const double s = static_cast<double>(k) * fine;
        const double r = residual(s);
        if (r < best) {
            best = r;
            best_shift = s;
        }
    }
    // Parabolic refinement through the neighbours of the best grid shift.
    const double rm = residual(best_shift - fine), rp = residual(best_shift + fine);
    const double denom = rm - 2.0 * best + rp;
    if (denom > 0.0) {
        const double offset = 0.5 * (rm - rp) / denom * fine;
        if (std::abs(offset) <= fine) {
            const double r = residual(best_shift + offset);
            if (r <= best) {
                best = r;
                best_shift += offset;
            }
        }
    }
    return {best, best_shift};
}

std::vector<double> ringing_lobes(const TimeSeries& series, double min_relative) {
    const auto& y = series.values;
    std::vector<double> lobes;
    if (y.size() < 3) return lobes;
    const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    const double threshold = min_relative * y[peak];
    for (std::size_t i = peak + 1; i + 1 < y.size(); ++i)
        if (y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] >= threshold) lobes.push_back(series.axis.value(i));
    return lobes;
}

void write_map_csv(const std::filesystem::path& path, const ObservableMap& map, std::size_t time_stride) {
    auto out = fmt::output_file(path.string());
    out.print("z [m],t [s],{} [{}]\n", map.kind == ObservableKind::Population ? fmt::format("rho{}{}", map.i, map.j)
                                                                            : fmt::format("abs_rho{}{}", map.i, map.j),
              map.kind == ObservableKind::Population ? "1" : "1");
    const std::size_t stride = std::max<std::size_t>(time_stride, 1);
    for (std::size_t p = 0; p < map.z.size(); ++p)
        for (std::size_t t = 0; t < map.t.size(); t += stride)
            out.print("{:.17g},{:.17g},{:.17g}\n", map.z[p], map.t[t], map.at(p, t));
}

void write_series_csv(const std::filesystem::path& path, const ObservableSeries& series) {
    write_csv(path, series.series, "t", kind_name(series.kind), series.unit);
}

}  // namespace mbprop
