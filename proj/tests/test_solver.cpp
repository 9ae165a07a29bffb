#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mbprop/constants.hpp"
#include "mbprop/error.hpp"
#include "mbprop/solver.hpp"
#include "oracles.hpp"

using namespace mbprop;

namespace {

struct Small {
    VaporSpec vapor;
    PulseSpec pulse;
    AtomicParams params;
    SimGrid grid;
    ComplexSeries input;

    explicit Small(double temperature = 75.0, double dz = 2.5e-3, double dt = 1e-12) {
        vapor.temperature = temperature;
        params = default_rb87_params(0.0);
        params.gamma_deph = effective_dephasing(vapor, constants::rb87_natural_linewidth);
        GridOptions o;
        o.tail = 1.5e-9;
        grid = make_grid(vapor, pulse, dt, dz, o);
        input = gaussian_envelope(pulse, grid.time_axis());
    }
};

std::vector<double> out_intensity(const RunResult& r) {
    std::vector<double> v;
    for (const auto& e : r.field.plane(r.field.grid().nz)) v.push_back(std::norm(e));
    return v;
}

}  // namespace

TEST_CASE("polarization source") {
    const auto p = default_rb87_params(0.0);
    DensityMatrix rho = thermal_state();
    CHECK(polarization_source(p, rho, 1e18) == complex(0.0));

    rho(2, 0) = complex(0.01, -0.02);
    rho(0, 2) = std::conj(rho(2, 0));
    CHECK(polarization_source(p, rho, 0.0) == complex(0.0));

    const double n = 2.3e17;
    const double coeff = p.omega_p * n / (2.0 * oracle::kEps0 * oracle::kC);
    const complex expected = coeff * p.d31 * rho(2, 0);
    const complex got = polarization_source(p, rho, n);
    CHECK(std::abs(got - expected) <= 1e-14 * std::abs(expected));

    // Every ground-excited coherence enters with its own dipole.
    DensityMatrix all = DensityMatrix::Zero();
    all(2, 0) = 1.0;
    all(2, 1) = 2.0;
    all(3, 0) = 3.0;
    all(3, 1) = 4.0;
    const complex sum = coeff * (p.d31 + 2.0 * p.d32 + 3.0 * p.d41 + 4.0 * p.d42);
    CHECK(std::abs(polarization_source(p, all, n) - sum) <= 1e-14 * std::abs(sum));
}

TEST_CASE("zero density leaves the envelope unchanged on every plane") {
    Small s;
    SolverOptions o;
    o.density = 0.0;
    const auto r = propagate(s.params, s.vapor, s.grid, s.input, o);
    double worst = 0.0;
    for (std::size_t k = 0; k < s.grid.planes(); ++k)
        for (std::size_t j = 0; j < s.grid.nt; ++j) worst = std::max(worst, std::abs(r.field.at(k, j) - s.input.values[j]));
    CHECK(worst <= 1e-12);
}

TEST_CASE("wavefront schedule is bit-identical to the serial march") {
    Small s(85.0, 5e-3, 1e-12);
    SolverOptions serial;
    serial.schedule = Schedule::Serial;
    const auto ref = propagate(s.params, s.vapor, s.grid, s.input, serial);

    for (auto [threads, block] : {std::pair{1, 64}, std::pair{2, 16}, std::pair{4, 1000}, std::pair{3, 7}}) {
        SolverOptions wf;
        wf.schedule = Schedule::Wavefront;
        wf.threads = threads;
        wf.block = static_cast<std::size_t>(block);
        const auto r = propagate(s.params, s.vapor, s.grid, s.input, wf);
        CHECK(r.field.values() == ref.field.values());
        bool same_states = true;
        for (std::size_t p = 0; p < ref.states.planes().size(); ++p)
            for (std::size_t t = 0; t < ref.states.times().size(); ++t)
                same_states = same_states && r.states.at(p, t) == ref.states.at(p, t);
        CHECK(same_states);
        CHECK(r.diagnostics.max_trace_error == ref.diagnostics.max_trace_error);
    }
}

TEST_CASE("medium response is causal") {
    Small s(95.0, 5e-3);
    // Start the pulse late so a stretch of the window sees exactly zero input.
    PulseSpec late = s.pulse;
    late.arrival_time = 0.6e-9;
    const auto input = gaussian_envelope(late, s.grid.time_axis());
    ComplexSeries gated = input;
    std::size_t first = 0;
    for (std::size_t j = 0; j < gated.values.size(); ++j) {
        if (s.grid.time_axis().value(j) < 0.3e-9)
            gated.values[j] = 0.0;
        else if (!first)
            first = j;
    }
    const auto r = propagate(s.params, s.vapor, s.grid, gated, SolverOptions{});
    double peak = 0.0, early = 0.0;
    for (std::size_t k = 0; k < s.grid.planes(); ++k)
        for (std::size_t j = 0; j < s.grid.nt; ++j) {
            peak = std::max(peak, std::abs(r.field.at(k, j)));
            if (j < first) early = std::max(early, std::abs(r.field.at(k, j)));
        }
    CHECK(early <= 1e-10 * peak);
}

TEST_CASE("weak-field response is linear") {
    Small s(75.0, 2.5e-3);
    SolverOptions o;
    o.store_states = false;
    const auto full = propagate(s.params, s.vapor, s.grid, s.input, o);
    ComplexSeries half = s.input;
    for (auto& v : half.values) v *= 0.5;
    const auto r = propagate(s.params, s.vapor, s.grid, half, o);
    const auto a = out_intensity(full), b = out_intensity(r);
    const double pa = *std::max_element(a.begin(), a.end()), pb = *std::max_element(b.begin(), b.end());
    double worst = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(a[j] / pa - b[j] / pb));
    CHECK(worst < 1e-3);
}

TEST_CASE("diagnostics stay within tolerance for a physical run") {
    Small s(75.0, 2.5e-3);
    const auto r = propagate(s.params, s.vapor, s.grid, s.input, SolverOptions{});
    CHECK(r.diagnostics.max_trace_error < 1e-9);
    CHECK(r.diagnostics.max_hermiticity_error < 1e-12);
    CHECK(r.diagnostics.min_eigenvalue > -1e-8);
    CHECK(r.density > 0.0);
    CHECK(r.wall_time > 0.0);
    for (const auto& v : r.field.values()) CHECK_FALSE((!std::isfinite(v.real()) || !std::isfinite(v.imag())));
}

TEST_CASE("unstable integration is reported with its first offending index") {
    Small s(75.0, 10e-3, 5e-12);
    ComplexSeries strong = s.input;
    for (auto& v : strong.values) v *= 5e8;
    bool thrown = false;
    try {
        propagate(s.params, s.vapor, s.grid, strong, SolverOptions{});
    } catch (const NumericalFailure& e) {
        thrown = true;
        CHECK(e.z_index() <= s.grid.nz);
        CHECK(e.t_index() < s.grid.nt);
        CHECK(std::string(e.what()).find("plane") != std::string::npos);
    }
    CHECK(thrown);
}

TEST_CASE("input must be sampled on the grid") {
    Small s;
    ComplexSeries shifted = s.input;
    shifted.axis.start += 0.5 * s.grid.dt;
    CHECK_THROWS_AS(propagate(s.params, s.vapor, s.grid, shifted, SolverOptions{}), ValidationError);
    ComplexSeries shorter = s.input;
    shorter.values.pop_back();
    shorter.axis.size--;
    CHECK_THROWS_AS(propagate(s.params, s.vapor, s.grid, shorter, SolverOptions{}), ValidationError);
}

TEST_CASE("stored state grid decimation") {
    Small s(75.0, 2.5e-3);
    const auto r = propagate(s.params, s.vapor, s.grid, s.input, SolverOptions{});
    CHECK(r.states.planes().size() == s.grid.planes());
    CHECK(r.states.times().size() == (s.grid.nt + s.grid.state_time_stride - 1) / s.grid.state_time_stride);
    CHECK(r.states.z(r.states.planes().size() - 1) == doctest::Approx(s.vapor.cell_length));
    const auto rho = r.states.at(3, 100);
    CHECK(hermiticity_error(rho) == 0.0);
    SolverOptions o;
    o.store_states = false;
    CHECK(propagate(s.params, s.vapor, s.grid, s.input, o).states.empty());
}

TEST_CASE("velocity-class averaging") {
    Small s(75.0, 5e-3);
    auto p = s.params;
    p.gamma_deph = effective_dephasing(s.vapor, constants::rb87_natural_linewidth, Broadening::VelocityClasses);
    SolverOptions o;
    o.velocity_classes = 7;
    o.store_states = false;
    const auto r = propagate(p, s.vapor, s.grid, s.input, o);
    CHECK(r.classes.size() == 7);
    const auto v = out_intensity(r);
    const double peak = *std::max_element(v.begin(), v.end());
    CHECK(peak > 0.0);
    CHECK(peak < 1.0);
    // A single class with zero Doppler width reproduces the homogeneous run.
    VaporSpec cold = s.vapor;
    cold.doppler_fwhm = 0.0;
    const auto a = propagate(p, cold, s.grid, s.input, o);
    o.velocity_classes = 0;
    const auto b = propagate(p, cold, s.grid, s.input, o);
    CHECK(a.field.values() == b.field.values());
}

TEST_CASE("probe transmission scan") {
    VaporSpec v;
    v.temperature = 60.0;
    auto p = default_rb87_params(0.0);
    p.gamma_deph = effective_dephasing(v, constants::rb87_natural_linewidth);
    ScanOptions o;
    o.nz = 10;
    o.dt = 2e-12;

    SUBCASE("transparent far from resonance") {
        const auto t = probe_transmission_scan(p, v, {oracle::kTwoPi * 60e9, -oracle::kTwoPi * 60e9}, o);
        for (double x : t) CHECK(x >= 0.999);
    }
    SUBCASE("two dips at the two excited levels") {
        // With the full 800 MHz width the weak |1>-|3> line is only a shoulder of the
        // five times stronger |1>-|4> line, so resolve them with pressure broadening alone.
        v.doppler_fwhm = 0.0;
        v.temperature = 40.0;
        p.gamma_deph = effective_dephasing(v, constants::rb87_natural_linewidth);
        const double w43 = constants::rb87_excited_splitting;
        const auto t = probe_transmission_scan(p, v, {-0.5 * w43, 0.0, 0.5 * w43, w43, 1.5 * w43}, o);
        CHECK(t[1] < t[0]);
        CHECK(t[1] < t[2]);
        CHECK(t[3] < t[2]);
        CHECK(t[3] < t[4]);
        for (double x : t) CHECK(x < 1.0);
    }
}
