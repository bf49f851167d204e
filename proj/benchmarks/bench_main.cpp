#include <benchmark/benchmark.h>

#include "dagevo/dag.hpp"
#include "dagevo/evolution.hpp"
#include "dagevo/network.hpp"

namespace {

using namespace dagevo;

Dag sample_dag(std::uint64_t seed, const EvolutionConfig& cfg) {
    Rng rng = make_rng(seed);
    return random_dag(rng, cfg.bounds, cfg.space);
}

Tensor sample_batch(std::size_t batch, std::size_t time, std::size_t channels) {
    Rng rng = make_rng(99);
    Tensor x({batch, time, channels});
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = uniform_real(rng, -1.0, 1.0);
    }
    return x;
}

void BM_RandomDag(benchmark::State& state) {
    const EvolutionConfig cfg;
    Rng rng = make_rng(1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(random_dag(rng, cfg.bounds, cfg.space));
    }
}
BENCHMARK(BM_RandomDag);

void BM_Validate(benchmark::State& state) {
    const EvolutionConfig cfg;
    const Dag d = sample_dag(2, cfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(validate(d, cfg.bounds));
    }
}
BENCHMARK(BM_Validate);

void BM_MutateArchitecture(benchmark::State& state) {
    const EvolutionConfig cfg;
    const Dag d = sample_dag(3, cfg);
    Rng rng = make_rng(3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mutate_architecture(d, rng, cfg));
    }
}
BENCHMARK(BM_MutateArchitecture);

void BM_Crossover(benchmark::State& state) {
    const EvolutionConfig cfg;
    const Dag a = sample_dag(4, cfg);
    const Dag b = sample_dag(5, cfg);
    Rng rng = make_rng(4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(crossover(a, b, rng, cfg));
    }
}
BENCHMARK(BM_Crossover);

// Forward pass on a batch of 64 windows, lag 24, one series; arg is the genome seed.
void BM_Forward(benchmark::State& state) {
    const EvolutionConfig cfg;
    const Dag d = sample_dag(static_cast<std::uint64_t>(state.range(0)), cfg);
    const auto net = nn::Network::build(d, {24, 1}, {12, 1}, 7);
    const Tensor x = sample_batch(64, 24, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.predict(x));
    }
    state.counters["weights"] = static_cast<double>(net.parameter_count());
}
BENCHMARK(BM_Forward)->Arg(10)->Arg(11)->Arg(12);

void BM_ForwardBackward(benchmark::State& state) {
    const EvolutionConfig cfg;
    const Dag d = sample_dag(static_cast<std::uint64_t>(state.range(0)), cfg);
    auto net = nn::Network::build(d, {24, 1}, {12, 1}, 7);
    const Tensor x = sample_batch(64, 24, 1);
    const Tensor y({64, 12, 1}, 0.5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(nn::gradients(net, x, y));
    }
    state.counters["weights"] = static_cast<double>(net.parameter_count());
}
BENCHMARK(BM_ForwardBackward)->Arg(10)->Arg(11)->Arg(12);

}  // namespace

BENCHMARK_MAIN();
