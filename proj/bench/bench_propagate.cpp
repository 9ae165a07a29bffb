// Serial reference vs OpenMP wavefront schedule of the same march.
#include <benchmark/benchmark.h>
#include <omp.h>

#include "mbprop/experiments.hpp"

namespace {

using namespace mbprop;

struct Setup {
    ExperimentConfig config = default_config();
    AtomicParams params;
    VaporSpec vapor;
    SimGrid grid;
    ComplexSeries input;

    Setup() {
        config.dz = 1e-3;  // 50 planes keeps one iteration around a second
        params = atomic_params(config);
        vapor = vapor_at(config, 75.0);
        grid = grid_for(config);
        input = input_envelope(config, grid, 1.0);
    }
};

const Setup& setup() {
    static const Setup s;
    return s;
}

void run(benchmark::State& state, Schedule schedule) {
    const auto& s = setup();
    SolverOptions options = solver_options(s.config, false);
    options.schedule = schedule;
    options.threads = static_cast<int>(state.range(0));
    options.block = static_cast<std::size_t>(state.range(1));
    for (auto _ : state) {
        auto result = propagate(s.params, s.vapor, s.grid, s.input, options);
        benchmark::DoNotOptimize(result.field.values().data());
    }
    state.counters["cells/s"] = benchmark::Counter(static_cast<double>(s.grid.nz * s.grid.nt),
                                                   benchmark::Counter::kIsIterationInvariantRate);
}

void BM_Serial(benchmark::State& state) { run(state, Schedule::Serial); }
void BM_Wavefront(benchmark::State& state) { run(state, Schedule::Wavefront); }

void thread_args(benchmark::internal::Benchmark* b) {
    for (int t = 1; t <= omp_get_num_procs(); t *= 2) b->Args({t, 64});
    b->Args({omp_get_num_procs(), 256});
}

}  // namespace

BENCHMARK(BM_Serial)->Args({1, 64})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Wavefront)->Apply(thread_args)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
