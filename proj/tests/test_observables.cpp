#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "mbprop/constants.hpp"
#include "mbprop/error.hpp"
#include "mbprop/observables.hpp"
#include "mbprop/solver.hpp"
#include "oracles.hpp"

using namespace mbprop;

namespace {

RunResult run_at(double temperature, double dz = 0.25e-3, double dt = 0.5e-12, std::optional<double> density = {}) {
    VaporSpec v;
    v.temperature = temperature;
    PulseSpec pulse;
    auto p = default_rb87_params(0.0);
    p.gamma_deph = effective_dephasing(v, constants::rb87_natural_linewidth);
    const auto grid = make_grid(v, pulse, dt, dz);
    SolverOptions o;
    o.density = density;
    return propagate(p, v, grid, gaussian_envelope(pulse, grid.time_axis()), o);
}

// The default-grid 75 C run, shared by the tests that look at its structure.
const RunResult& warm() {
    static const RunResult r = run_at(75.0);
    return r;
}

double peak_of(const TimeSeries& s) { return *std::max_element(s.values.begin(), s.values.end()); }

TimeSeries shifted_gaussian(double shift, double step = 1e-12) {
    TimeSeries s;
    s.axis = Axis{-1e-9, step, static_cast<std::size_t>(std::llround(3e-9 / step)), "s"};
    for (std::size_t i = 0; i < s.axis.size; ++i) s.values.push_back(oracle::gaussian(s.axis.value(i) - shift, 120e-12));
    return s;
}

// Indices of strict local maxima of |v| above `floor` of its peak, after index `from`.
std::vector<std::size_t> maxima(const std::vector<double>& v, std::size_t from, double floor) {
    const double top = *std::max_element(v.begin() + static_cast<std::ptrdiff_t>(from), v.end());
    std::vector<std::size_t> out;
    for (std::size_t i = std::max<std::size_t>(from, 1); i + 1 < v.size(); ++i)
        if (v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > floor * top) out.push_back(i);
    return out;
}

}  // namespace

TEST_CASE("transmitted intensity") {
    SUBCASE("equals the input at zero density") {
        const auto r = run_at(75.0, 2.5e-3, 1e-12, 0.0);
        CHECK(transmitted_intensity(r).series.values == input_intensity(r).series.values);
    }
    SUBCASE("nonnegative with the expected units") {
        const auto t = transmitted_intensity(warm());
        CHECK(t.unit == "V^2/m^2");
        CHECK(*std::min_element(t.series.values.begin(), t.series.values.end()) >= 0.0);
        CHECK(t.series.values.size() == warm().field.grid().nt);
    }
    SUBCASE("peak drops from 55 to 75 C") {
        double previous = 1e300;
        for (double t : {55.0, 65.0, 75.0}) {
            const double peak = peak_of(transmitted_intensity(run_at(t, 1e-3, 1e-12)).series);
            CHECK(peak < previous);
            previous = peak;
        }
    }
}

TEST_CASE("coherence and population maps") {
    const auto& r = warm();
    const auto m31 = coherence_map(r, Level::E3, Level::G1);
    CHECK(m31.i == 3);
    CHECK(m31.j == 1);
    CHECK(m31.z.size() == r.states.planes().size());

    SUBCASE("no coherence before the pulse") {
        for (std::size_t p = 0; p < m31.z.size(); ++p) CHECK(m31.at(p, 0) == 0.0);
        const auto m43 = coherence_map(r, Level::E4, Level::E3);
        for (std::size_t p = 0; p < m43.z.size(); ++p) CHECK(m43.at(p, 0) == 0.0);
    }
    SUBCASE("bounded by one") {
        for (const auto& level : {std::pair{Level::E3, Level::G1}, std::pair{Level::E4, Level::G1},
                                  std::pair{Level::E4, Level::E3}}) {
            const auto m = coherence_map(r, level.first, level.second);
            CHECK(*std::max_element(m.values.begin(), m.values.end()) <= 1.0);
        }
    }
    SUBCASE("same level is rejected") {
        CHECK_THROWS_AS(coherence_map(r, Level::E3, Level::E3), RangeError);
    }
    SUBCASE("populations sum to one pointwise") {
        std::vector<ObservableMap> pops;
        for (auto l : {Level::G1, Level::G2, Level::E3, Level::E4}) pops.push_back(population_map(r, l));
        double worst = 0.0;
        for (std::size_t k = 0; k < pops[0].values.size(); ++k) {
            double sum = 0.0;
            for (const auto& m : pops) sum += m.values[k];
            worst = std::max(worst, std::abs(sum - 1.0));
        }
        CHECK(worst < 1e-9);
        const auto p3 = pops[2];
        CHECK(*std::min_element(p3.values.begin(), p3.values.end()) >= -1e-12);
    }
    SUBCASE("excited-state coherence outlives the pulse at the cell exit") {
        const auto m43 = coherence_map(r, Level::E4, Level::E3);
        const auto row = m43.row(m43.z.size() - 1);
        const auto top = static_cast<std::size_t>(std::max_element(row.values.begin(), row.values.end()) -
                                                  row.values.begin());
        CHECK(row.values[top] > 0.0);
        const double later = row.axis.value(top) + 1.0e-9;
        CHECK(sample_linear(row, later) > 0.05 * row.values[top]);
        CHECK(sample_linear(row, later) < row.values[top]);
    }
    SUBCASE("field and rho31 lobes alternate at the cell exit") {
        const auto intensity = transmitted_intensity(r).series;
        const auto row = m31.row(m31.z.size() - 1);
        std::vector<double> field, coherence;
        for (std::size_t t = 0; t < row.values.size(); ++t) {
            field.push_back(sample_linear(intensity, row.axis.value(t)));
            coherence.push_back(row.values[t] * row.values[t]);
        }
        // Energy sloshes between light and atoms, so the first field lobes and
        // the coherence lobes alternate in time.
        const auto fm = maxima(field, 0, 1e-3);
        const auto cm = maxima(coherence, 0, 1e-3);
        REQUIRE(fm.size() >= 3);
        REQUIRE(cm.size() >= 2);
        // Between two consecutive field maxima lies exactly one coherence maximum.
        for (std::size_t i = 0; i + 1 < 3; ++i) {
            const auto between = std::count_if(cm.begin(), cm.end(), [&](std::size_t c) { return c > fm[i] && c < fm[i + 1]; });
            CHECK(between == 1);
        }
    }
}

TEST_CASE("ensemble energy") {
    const auto p = default_rb87_params(0.0);
    CHECK(excitation_quanta(p, thermal_state(GroundWeighting::LowerOnly)) == 0.0);
    CHECK(excitation_quanta(p, oracle::sigma(2, 2)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(excitation_quanta(p, oracle::sigma(1, 1)) == doctest::Approx(p.omega21 / p.omega_p).epsilon(1e-12));

    const auto& r = warm();
    const auto e = ensemble_energy(r, 7.85e-9);
    CHECK(e.unit == "quanta");
    CHECK(e.series.values.front() == 0.0);
    for (std::size_t t = 0; t < e.series.values.size(); ++t)
        if (e.series.axis.value(t) < r.field.grid().t0 + 0.1e-9) CHECK(std::abs(e.series.values[t]) <= 1e-12);

    SUBCASE("slow decay after the pulse") {
        const auto top = static_cast<std::size_t>(std::max_element(e.series.values.begin(), e.series.values.end()) -
                                                  e.series.values.begin());
        const double peak_time = e.series.axis.value(top);
        CHECK(sample_linear(e.series, peak_time + 1e-9) > 0.1 * e.series.values[top]);
    }
    SUBCASE("scales with the mode area") {
        const auto twice = ensemble_energy(r, 2.0 * 7.85e-9);
        for (std::size_t t = 0; t < e.series.values.size(); t += 50)
            CHECK(twice.series.values[t] == doctest::Approx(2.0 * e.series.values[t]).epsilon(1e-12));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(ensemble_energy(r, 0.0), ValidationError);
        RunResult bare;
        CHECK_THROWS_AS(ensemble_energy(bare, 1e-8), ValidationError);
    }
}

TEST_CASE("photon number of a pulse") {
    PulseSpec pulse;
    const Axis axis{-0.5e-9, 0.1e-12, 10001, "s"};
    const auto env = gaussian_envelope(pulse, axis);
    TimeSeries i;
    i.axis = axis;
    for (const auto& v : env.values) i.values.push_back(std::norm(v));
    const double area = 7.85e-9, omega = default_rb87_params(0.0).omega_p;
    const double fluence = pulse.temporal_fwhm() * std::sqrt(std::numbers::pi / (4.0 * std::numbers::ln2));
    const double expected = 2.0 * oracle::kEps0 * oracle::kC * area * fluence / (oracle::kHbar * omega);
    CHECK(photon_number(i, area, omega) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("normalisation against a reference run") {
    const auto a = transmitted_intensity(run_at(55.0, 1e-3, 1e-12));
    const auto b = transmitted_intensity(run_at(75.0, 1e-3, 1e-12));
    CHECK(peak_of(normalize_series(a, a).series) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(peak_of(normalize_series(b, a).series) < 1.0);

    auto a2 = a, b2 = b;
    for (auto& v : a2.series.values) v *= 2.0;
    for (auto& v : b2.series.values) v *= 2.0;
    const auto n1 = normalize_series(b, a).series.values, n2 = normalize_series(b2, a2).series.values;
    for (std::size_t i = 0; i < n1.size(); ++i) CHECK(n2[i] == doctest::Approx(n1[i]).epsilon(1e-15));

    auto zero = a;
    std::fill(zero.series.values.begin(), zero.series.values.end(), 0.0);
    CHECK_THROWS_AS(normalize_series(b, zero), ValidationError);
}

TEST_CASE("histogram comparison") {
    SUBCASE("identical series") {
        const auto s = shifted_gaussian(0.0);
        const auto c = compare_to_histogram(s, s, true);
        CHECK(c.rms_residual == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
        CHECK(c.time_shift == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    }
    SUBCASE("recovers a 50 ps shift") {
        const auto sim = shifted_gaussian(0.0);
        const auto data = shifted_gaussian(50e-12);
        const auto c = compare_to_histogram(sim, data, true);
        CHECK(std::abs(c.time_shift - 50e-12) <= sim.axis.step);
        CHECK(c.rms_residual < 1e-3);
        CHECK(compare_to_histogram(sim, data, false).rms_residual > 0.1);
    }
    SUBCASE("coarse histogram against fine simulation") {
        const auto sim = shifted_gaussian(0.0, 0.5e-12);
        const auto data = shifted_gaussian(-30e-12, 8e-12);
        const auto c = compare_to_histogram(sim, data, true);
        CHECK(std::abs(c.time_shift + 30e-12) <= sim.axis.step);
    }
    SUBCASE("noise floor") {
        std::mt19937 rng(5);
        std::normal_distribution<double> n(0.0, 0.01);
        const auto sim = shifted_gaussian(0.0, 4e-12);
        auto data = sim;
        for (double& v : data.values) v += n(rng);
        const auto c = compare_to_histogram(sim, data, false);
        CHECK(c.rms_residual == doctest::Approx(0.01).epsilon(0.1));
    }
    SUBCASE("disjoint axes") {
        auto far = shifted_gaussian(0.0);
        far.axis.start += 1e-6;
        CHECK_THROWS_AS(compare_to_histogram(shifted_gaussian(0.0), far, false), ValidationError);
    }
}

TEST_CASE("ringing lobes and CSV export") {
    const auto t = transmitted_intensity(warm());
    const auto lobes = ringing_lobes(t.series);
    CHECK(lobes.size() >= 2);
    CHECK(std::is_sorted(lobes.begin(), lobes.end()));
    CHECK(lobes.front() > peak_position(t.series));

    const auto dir = std::filesystem::temp_directory_path() / "mbprop_tests";
    std::filesystem::create_directories(dir);
    write_series_csv(dir / "series.csv", t);
    const auto back = read_csv(dir / "series.csv");
    CHECK(back.values == t.series.values);

    const auto m = coherence_map(warm(), Level::E4, Level::E3);
    write_map_csv(dir / "map.csv", m, 10);
    std::ifstream in(dir / "map.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "z [m],t [s],abs_rho43 [1]");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == m.z.size() * ((m.t.size() + 9) / 10));
}
