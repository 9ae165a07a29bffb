#include "mbprop/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>

#include <fmt/format.h>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "mbprop/constants.hpp"
#include "mbprop/error.hpp"

namespace mbprop {

FieldGrid::FieldGrid(const SimGrid& grid) : grid_(grid), values_(grid.planes() * grid.nt, complex{}) {}

ComplexSeries FieldGrid::plane_series(std::size_t k) const {
    ComplexSeries s;
    s.axis = grid_.time_axis();
    const auto p = plane(k);
    s.values.assign(p.begin(), p.end());
    return s;
}

StateGrid::StateGrid(const SimGrid& grid, std::vector<std::size_t> planes, std::vector<std::size_t> times)
    : grid_(grid), planes_(std::move(planes)), times_(std::move(times)), data_(planes_.size() * times_.size()) {}

DensityMatrix StateGrid::at(std::size_t plane_slot, std::size_t time_slot) const {
    const auto& packed = data_[plane_slot * times_.size() + time_slot];
    DensityMatrix rho;
    int n = 0;
    for (int i = 0; i < kNumLevels; ++i)
        for (int j = i; j < kNumLevels; ++j) {
            rho(i, j) = packed[static_cast<std::size_t>(n++)];
            rho(j, i) = std::conj(rho(i, j));
        }
    for (int i = 0; i < kNumLevels; ++i) rho(i, i) = rho(i, i).real();
    return rho;
}

void StateGrid::store(std::size_t plane_slot, std::size_t time_slot, const DensityMatrix& rho) {
    auto& packed = data_[plane_slot * times_.size() + time_slot];
    int n = 0;
    for (int i = 0; i < kNumLevels; ++i)
        for (int j = i; j < kNumLevels; ++j) packed[static_cast<std::size_t>(n++)] = rho(i, j);
}

std::optional<std::size_t> StateGrid::plane_slot(std::size_t k) const {
    const auto it = std::lower_bound(planes_.begin(), planes_.end(), k);
    if (it == planes_.end() || *it != k) return std::nullopt;
    return static_cast<std::size_t>(it - planes_.begin());
}

complex polarization_source(const AtomicParams& params, const DensityMatrix& rho, double density) {
    // Real coefficient: with H_31 = -i d31 E the i of the lab-frame form is absorbed in E.
    const double coeff = params.omega_p * density / (2.0 * constants::epsilon0 * constants::speed_of_light);
    return coeff * (params.d31 * rho(2, 0) + params.d32 * rho(2, 1) + params.d41 * rho(3, 0) + params.d42 * rho(3, 1));
}

namespace {

// Mutable per-plane march state: rho on plane k and the predictor's rho on plane k+1.
struct PlaneWork {
    std::vector<DensityMatrix> rho;
    std::vector<DensityMatrix> rho_pred;
    complex pred_prev{};
};

struct Failure {
    std::size_t plane = std::numeric_limits<std::size_t>::max();
    std::size_t time = std::numeric_limits<std::size_t>::max();
    std::string what;

    bool set() const { return plane != std::numeric_limits<std::size_t>::max(); }
    bool before(std::size_t k, std::size_t j) const { return plane < k || (plane == k && time < j); }
};

struct LocalDiagnostics {
    Diagnostics d;
    Failure failure;

    void merge(const LocalDiagnostics& other) {
        d.max_trace_error = std::max(d.max_trace_error, other.d.max_trace_error);
        d.max_hermiticity_error = std::max(d.max_hermiticity_error, other.d.max_hermiticity_error);
        d.min_eigenvalue = std::min(d.min_eigenvalue, other.d.min_eigenvalue);
        if (other.failure.set() && (!failure.set() || other.failure.before(failure.plane, failure.time)))
            failure = other.failure;
    }
};

class Marcher {
public:
    Marcher(const AtomicParams& params, const SimGrid& grid, double density, std::vector<VelocityClass> classes,
            const SolverOptions& options, FieldGrid& field, StateGrid* states)
        : params_(params), grid_(grid), density_(density), classes_(std::move(classes)), options_(options),
          field_(field), states_(states) {
        for (const auto& c : classes_) {
            AtomicParams shifted = params;
            shifted.delta_p += c.detuning_offset;
            kernels_.emplace_back(shifted);
        }
        const DensityMatrix rho0 = thermal_state(options.initial);
        work_.resize(grid.planes());
        for (auto& w : work_) {
            w.rho.assign(classes_.size(), rho0);
            w.rho_pred.assign(classes_.size(), rho0);
        }
        if (states_) {
            const auto& times = states_->times();
            time_slot_.assign(grid.nt, kNone);
            for (std::size_t s = 0; s < times.size(); ++s) time_slot_[times[s]] = s;
            plane_slot_.assign(grid.planes(), kNone);
            for (std::size_t s = 0; s < states_->planes().size(); ++s) plane_slot_[states_->planes()[s]] = s;
        }
    }

    // Advances plane k over retarded-time samples [j_begin, j_end).
    void advance(std::size_t k, std::size_t j_begin, std::size_t j_end, LocalDiagnostics& diag) {
        auto& w = work_[k];
        const double dt = grid_.dt;
        const double dz = grid_.dz;
        const bool last = k == grid_.nz;
        const auto here = field_.plane(k);
        const std::size_t nc = classes_.size();
        const std::size_t eig_stride = std::max<std::size_t>(grid_.state_time_stride, 1);

        for (std::size_t j = j_begin; j < j_end; ++j) {
            if (j > 0)
                for (std::size_t c = 0; c < nc; ++c) kernels_[c].rk4_step(w.rho[c], here[j - 1], here[j], dt);
            const DensityMatrix rho = ensemble(w.rho);
            check(rho, k, j, j % eig_stride == 0, diag);
            if (states_ && plane_slot_[k] != kNone && time_slot_[j] != kNone)
                states_->store(plane_slot_[k], time_slot_[j], rho);
            if (last) continue;

            const complex source = polarization_source(params_, rho, density_);
            const complex pred = here[j] + dz * source;
            if (j > 0)
                for (std::size_t c = 0; c < nc; ++c) kernels_[c].rk4_step(w.rho_pred[c], w.pred_prev, pred, dt);
            w.pred_prev = pred;
            const complex source_pred = polarization_source(params_, ensemble(w.rho_pred), density_);
            field_.at(k + 1, j) = here[j] + 0.5 * dz * (source + source_pred);
        }
    }

private:
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    DensityMatrix ensemble(const std::vector<DensityMatrix>& per_class) const {
        if (per_class.size() == 1) return per_class.front();
        DensityMatrix sum = DensityMatrix::Zero();
        for (std::size_t c = 0; c < per_class.size(); ++c) sum += classes_[c].weight * per_class[c];
        return sum;
    }

    void check(const DensityMatrix& rho, std::size_t k, std::size_t j, bool eigen, LocalDiagnostics& diag) const {
        const double tr = trace_error(rho);
        diag.d.max_trace_error = std::max(diag.d.max_trace_error, tr);
        bool bad = !(tr <= options_.trace_tolerance);
        std::string what;
        if (bad) what = fmt::format("trace error {:.3g}", tr);
        if (eigen) {
            diag.d.max_hermiticity_error = std::max(diag.d.max_hermiticity_error, hermiticity_error(rho));
            const double ev = min_eigenvalue(rho);
            diag.d.min_eigenvalue = std::min(diag.d.min_eigenvalue, ev);
            if (!(ev >= options_.eigenvalue_floor)) {
                if (!bad) what = fmt::format("eigenvalue {:.3g}", ev);
                bad = true;
            }
        }
        if (bad && (!diag.failure.set() || Failure{k, j, {}}.before(diag.failure.plane, diag.failure.time)))
            diag.failure = Failure{k, j, what};
    }

    const AtomicParams& params_;
    const SimGrid& grid_;
    double density_;
    std::vector<VelocityClass> classes_;
    const SolverOptions& options_;
    std::vector<LindbladKernel> kernels_;
    FieldGrid& field_;
    StateGrid* states_;
    std::vector<PlaneWork> work_;
    std::vector<std::size_t> time_slot_, plane_slot_;
};

void run_serial(Marcher& marcher, const SimGrid& grid, LocalDiagnostics& diag) {
    for (std::size_t k = 0; k < grid.planes(); ++k) marcher.advance(k, 0, grid.nt, diag);
}

// Task (k, b) needs plane k's field on block b (written by task (k-1, b)) and the
// plane's march state at the end of block b-1, so every anti-diagonal k + b is
// independent.
void run_wavefront(Marcher& marcher, const SimGrid& grid, const SolverOptions& options, LocalDiagnostics& diag) {
    const std::size_t block = std::max<std::size_t>(options.block, 1);
    const std::size_t nb = (grid.nt + block - 1) / block;
    const std::size_t np = grid.planes();
    const auto diagonals = static_cast<long>(np + nb - 1);
    std::mutex merge_mutex;

#ifdef _OPENMP
    const int threads = options.threads > 0 ? options.threads : omp_get_max_threads();
#pragma omp parallel num_threads(threads)
#endif
    {
        LocalDiagnostics local;
        for (long d = 0; d < diagonals; ++d) {
            const long k_lo = std::max<long>(0, d - static_cast<long>(nb) + 1);
            const long k_hi = std::min<long>(d, static_cast<long>(np) - 1);
#ifdef _OPENMP
#pragma omp for schedule(dynamic, 1)
#endif
            for (long k = k_lo; k <= k_hi; ++k) {
                const auto b = static_cast<std::size_t>(d - k);
                marcher.advance(static_cast<std::size_t>(k), b * block, std::min(grid.nt, (b + 1) * block), local);
            }
        }
        std::lock_guard lock(merge_mutex);
        diag.merge(local);
    }
}

}  // namespace

RunResult propagate(const AtomicParams& params, const VaporSpec& vapor, const SimGrid& grid,
                    const ComplexSeries& input, const SolverOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    validate(params);
    validate(vapor);
    validate(input);
    if (grid.nz < 1 || grid.nt < 2 || !(grid.dt > 0.0) || !(grid.dz > 0.0)) throw ParameterError("degenerate simulation grid");
    if (input.values.size() != grid.nt || std::abs(input.axis.step - grid.dt) > 1e-9 * grid.dt ||
        std::abs(input.axis.start - grid.t0) > 1e-6 * grid.dt)
        throw ValidationError("input envelope is not sampled on the grid's time axis");

    RunResult result;
    result.params = params;
    result.vapor = vapor;
    result.density = options.density ? *options.density : number_density(vapor);
    if (!(result.density >= 0.0)) throw ParameterError("number density must be >= 0");
    result.classes = options.velocity_classes > 1 ? velocity_classes(vapor, options.velocity_classes)
                                                  : std::vector<VelocityClass>{{0.0, 1.0}};

    result.field = FieldGrid(grid);
    std::copy(input.values.begin(), input.values.end(), result.field.plane(0).begin());
    if (options.store_states) result.states = StateGrid(grid, grid.stored_planes(), grid.stored_times());

    Marcher marcher(params, grid, result.density, result.classes, options, result.field,
                    options.store_states ? &result.states : nullptr);
    LocalDiagnostics diag;
    if (options.schedule == Schedule::Serial)
        run_serial(marcher, grid, diag);
    else
        run_wavefront(marcher, grid, options, diag);

    result.diagnostics = diag.d;
    if (diag.failure.set())
        throw NumericalFailure(fmt::format("{} at z = {:.6g} m, t = {:.6g} s (plane {}, sample {})", diag.failure.what,
                                           static_cast<double>(diag.failure.plane) * grid.dz,
                                           grid.time_axis().value(diag.failure.time), diag.failure.plane,
                                           diag.failure.time),
                               diag.failure.plane, diag.failure.time);
    for (const auto& v : result.field.values())
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw NumericalFailure("non-finite field value", 0, 0);

    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

std::vector<double> probe_transmission_scan(const AtomicParams& params, const VaporSpec& vapor,
                                            const std::vector<double>& detunings, const ScanOptions& options) {
    if (!(options.dt > 0.0) || options.nz < 1 || !(options.ramp > 0.0) || !(options.plateau >= 0.0))
        throw ParameterError("invalid scan options");

    SimGrid grid;
    grid.nz = options.nz;
    grid.dz = vapor.cell_length / static_cast<double>(options.nz);
    grid.dt = options.dt;
    grid.t0 = 0.0;
    grid.nt = static_cast<std::size_t>(std::llround((options.ramp + options.plateau) / options.dt)) + 1;
    grid.state_time_stride = 64;

    ComplexSeries input;
    input.axis = grid.time_axis();
    input.values.resize(grid.nt);
    for (std::size_t j = 0; j < grid.nt; ++j) {
        const double t = input.axis.value(j);
        const double s = t >= options.ramp ? 1.0 : std::sin(0.5 * std::numbers::pi * t / options.ramp);
        input.values[j] = options.amplitude * s * s;
    }

    std::vector<double> out(detunings.size(), 0.0);
    std::exception_ptr error;
    std::mutex error_mutex;
    SolverOptions solver = options.solver;
    solver.schedule = Schedule::Serial;
    solver.store_states = false;

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (long i = 0; i < static_cast<long>(detunings.size()); ++i) {
        try {
            AtomicParams p = params;
            const double shift = detunings[static_cast<std::size_t>(i)] - params.delta_p;
            p.delta_p += shift;
            p.omega_p += shift;
            const auto run = propagate(p, vapor, grid, input, solver);
            const complex in = run.field.at(0, grid.nt - 1);
            const complex outv = run.field.at(grid.nz, grid.nt - 1);
            out[static_cast<std::size_t>(i)] = std::norm(outv) / std::norm(in);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace mbprop
