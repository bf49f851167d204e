// Acceptance driver: one PASS/FAIL line per criterion. `--only N` runs a single one.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dagevo/analysis.hpp"
#include "dagevo/autograd.hpp"
#include "dagevo/data_io.hpp"
#include "dagevo/evaluation.hpp"
#include "dagevo/evolution.hpp"
#include "dagevo/network.hpp"
#include "test_helpers.hpp"

namespace dagevo {
namespace {

using Clock = std::chrono::steady_clock;
using nn::Variable;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& why) {
        if (!ok && pass) {
            pass = false;
            detail = why;
        }
    }
};

// 1 ---------------------------------------------------------------------------

Verdict graph_fuzz() {
    Verdict v;
    const auto start = Clock::now();
    EvolutionConfig cfg;
    Rng rng = make_rng(2024);
    std::vector<Dag> pool;
    pool.reserve(10000);
    std::size_t checked = 0;
    for (int i = 0; i < 10000; ++i) {
        const double density = uniform_real(rng, 0.0, 1.0);
        pool.push_back(random_dag(rng, cfg.bounds, cfg.space, density));
        v.require(validate(pool.back(), cfg.bounds).ok(), "random_dag produced an invalid graph at draw " +
                                                              std::to_string(i));
        ++checked;
    }
    for (int i = 0; i < 10000; ++i) {
        const Dag& parent = pool[uniform_index(rng, pool.size())];
        const Dag child = mutate_architecture(parent, rng, cfg);
        v.require(validate(child, cfg.bounds).ok(), "mutation produced an invalid graph at step " + std::to_string(i));
        ++checked;
    }
    for (int i = 0; i < 10000; ++i) {
        const Dag& a = pool[uniform_index(rng, pool.size())];
        const Dag& b = pool[uniform_index(rng, pool.size())];
        const auto [c1, c2] = crossover(a, b, rng, cfg);
        v.require(validate(c1, cfg.bounds).ok() && validate(c2, cfg.bounds).ok(),
                  "crossover produced an invalid graph at step " + std::to_string(i));
        ++checked;
    }
    const double secs = seconds_since(start);
    v.require(secs < 30.0, "runtime " + std::to_string(secs) + " s exceeds 30 s");
    if (v.pass) {
        v.detail = std::to_string(checked) + " graphs valid in " + std::to_string(secs) + " s";
    }
    return v;
}

// 2 ---------------------------------------------------------------------------

struct KindVariant {
    std::string label;
    NodeSpec node;
    nn::Mode mode = nn::Mode::Eval;
};

std::vector<KindVariant> kind_variants() {
    std::vector<KindVariant> out;
    auto add = [&](std::string label, LayerKind kind, ParamMap params, nn::Mode mode = nn::Mode::Eval) {
        NodeSpec n;
        n.kind = kind;
        n.params = std::move(params);
        out.push_back({std::move(label), n, mode});
    };
    add("identity", LayerKind::Identity, {});
    add("dense", LayerKind::Dense, {{"output_units", std::int64_t{3}}});
    add("attention/convolution", LayerKind::Attention,
        {{"heads", std::int64_t{2}}, {"init_type", std::string("convolution")}});
    add("attention/random", LayerKind::Attention, {{"heads", std::int64_t{1}}, {"init_type", std::string("random")}});
    add("conv1d", LayerKind::Conv1D, {{"kernel_size", std::int64_t{3}}});
    for (const char* cell : {"lstm", "gru", "rnn"}) {
        add(std::string("recurrence/") + cell, LayerKind::Recurrence,
            {{"output_units", std::int64_t{2}}, {"cell", std::string(cell)}});
    }
    add("pooling/max", LayerKind::Pooling, {{"pool_size", std::int64_t{3}}, {"pool_type", std::string("max")}});
    add("pooling/average", LayerKind::Pooling,
        {{"pool_size", std::int64_t{2}}, {"pool_type", std::string("average")}});
    add("dropout/train", LayerKind::Dropout, {{"rate", 0.3}}, nn::Mode::Train);
    add("dropout/eval", LayerKind::Dropout, {{"rate", 0.3}});
    return out;
}

// Worst relative error between analytic and central-difference gradients.
// Each target sits one unit away from its prediction: the absolute error has
// no kink within reach of the perturbation and the loss stays near 1, which
// keeps cancellation noise in the differences small.
double worst_gradient_error(nn::Network& net, const Tensor& x, nn::Mode mode, std::uint64_t dropout_seed) {
    Rng probe_rng = make_rng(dropout_seed, 2);
    Tensor target = net.forward(Variable(x), mode, &probe_rng).value();
    for (std::size_t i = 0; i < target.size(); ++i) {
        target[i] += i % 2 == 0 ? 1.0 : -1.0;
    }
    auto loss = [&] {
        nn::NoGradGuard guard;
        Rng r = make_rng(dropout_seed, 2);
        return nn::mean_abs_error(net.forward(Variable(x), mode, &r), target).value()[0];
    };
    const auto g = nn::gradients(net, x, target, mode, dropout_seed);
    constexpr double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < net.parameters().size(); ++k) {
        Tensor& w = net.parameters()[k].var.mutable_value();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double keep = w[i];
            w[i] = keep + eps;
            const double up = loss();
            w[i] = keep - eps;
            const double down = loss();
            w[i] = keep;
            const double numeric = (up - down) / (2 * eps);
            const double analytic = g.per_parameter[k][i];
            const double rel =
                std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

Verdict gradient_oracle() {
    Verdict v;
    const auto start = Clock::now();
    const nn::InputShape in{4, 3};
    const nn::OutputShape out{2, 1};
    Rng data_rng = make_rng(31);
    Tensor x({2, 4, 3});
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = uniform_real(data_rng, -1.0, 1.0);
    }
    double worst = 0.0;
    std::size_t networks = 0;
    std::size_t max_weights = 0;
    for (const auto& variant : kind_variants()) {
        for (Activation act : kAllActivations) {
            for (Combiner comb : kAllCombiners) {
                NodeSpec probe = variant.node;
                probe.activation = act;
                probe.combiner = comb;
                // Input -> v1 (dense) ; {Input, v1} -> v2 (probe) -> Output.
                const Dag d = testing::make_dag({testing::dense_node(2), probe}, {{0, 1}, {0, 2}, {1, 2}, {2, 3}});
                const std::string label = variant.label + "/" + std::string(to_string(act)) + "/" +
                                          std::string(to_string(comb));
                if (!validate(d).ok()) {
                    v.require(false, label + ": test graph invalid");
                    continue;
                }
                auto net = nn::Network::build(d, in, out, 1000 + networks);
                max_weights = std::max(max_weights, net.parameter_count());
                v.require(net.parameter_count() <= 500, label + ": more than 500 weights");
                const double err = worst_gradient_error(net, x, variant.mode, 500 + networks);
                v.require(err <= 1e-4, label + ": relative error " + std::to_string(err));
                worst = std::max(worst, err);
                ++networks;
            }
        }
    }
    const double secs = seconds_since(start);
    v.require(secs < 120.0, "runtime " + std::to_string(secs) + " s exceeds 120 s");
    if (v.pass) {
        std::ostringstream s;
        s << networks << " networks (<= " << max_weights << " weights), worst relative error " << worst << " in "
          << secs << " s";
        v.detail = s.str();
    }
    return v;
}

// 3 ---------------------------------------------------------------------------

Tensor column(const std::vector<double>& v) {
    return Tensor({v.size(), 1}, v);
}

Verdict mase_identities() {
    Verdict v;
    Rng rng = make_rng(3);
    for (std::size_t n : {2u, 5u, 24u, 101u, 1000u}) {
        std::vector<double> y(n);
        for (auto& e : y) {
            e = uniform_real(rng, -10.0, 10.0);
        }
        v.require(mase(column(y), column(y)) == 0.0, "mase(Y, Y) != 0 at n=" + std::to_string(n));
        std::vector<double> naive(n);
        naive[0] = y[0];
        for (std::size_t t = 1; t < n; ++t) {
            naive[t] = y[t - 1];
        }
        const double nn = static_cast<double>(n);
        const double got = mase(column(y), column(naive));
        v.require(std::abs(got - (nn - 1.0) / nn) <= 4 * std::numeric_limits<double>::epsilon(),
                  "naive forecast gives " + std::to_string(got) + " at n=" + std::to_string(n));
    }
    v.require(std::abs(mase(column({1, 2, 4}), column({1, 1, 1})) - 8.0 / 9.0) <= 1e-12, "hand case != 8/9");
    // Dyadic values make every affine image exact in binary floating point.
    const std::vector<double> y = {1.0, 2.5, 0.75, 4.0, 3.25, -1.5};
    const std::vector<double> p = {0.5, 2.0, 1.5, 3.0, 3.0, 0.25};
    const double base = mase(column(y), column(p));
    for (double a : {2.0, 0.5, -4.0, 1024.0}) {
        for (double b : {0.0, 8.0, -16.0}) {
            std::vector<double> ys = y;
            std::vector<double> ps = p;
            for (std::size_t i = 0; i < y.size(); ++i) {
                ys[i] = a * y[i] + b;
                ps[i] = a * p[i] + b;
            }
            v.require(mase(column(ys), column(ps)) == base, "affine map changed MASE");
        }
    }
    if (v.pass) {
        v.detail = "zero, (n-1)/n, 8/9 and affine invariance hold";
    }
    return v;
}

// 4 ---------------------------------------------------------------------------

Verdict elitism_determinism() {
    Verdict v;
    const auto start = Clock::now();
    const Evaluator surrogate = [](const Individual& ind) {
        return std::abs(static_cast<double>(ind.dag.hidden.size()) - 5.0);
    };
    std::size_t runs = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        EvolutionConfig cfg;
        cfg.population_size = 16;
        cfg.generations = 30;
        cfg.master_seed = seed;
        const EvolutionResult a = evolve(cfg, surrogate);
        const EvolutionResult b = evolve(cfg, surrogate);
        v.require(a.best.fitness && *a.best.fitness == 0.0, "seed " + std::to_string(seed) + " did not reach 0");
        for (const auto* r : {&a, &b}) {
            for (std::size_t g = 1; g < r->logs.size(); ++g) {
                v.require(r->logs[g].best_so_far <= r->logs[g - 1].best_so_far,
                          "best-so-far increased at generation " + std::to_string(g));
            }
        }
        v.require(per_individual_csv(a.logs) == per_individual_csv(b.logs) &&
                      summary_csv(a.logs) == summary_csv(b.logs),
                  "logs differ between identical runs, seed " + std::to_string(seed));
        runs += 2;
    }
    const double secs = seconds_since(start);
    v.require(secs < 10.0, "runtime " + std::to_string(secs) + " s exceeds 10 s");
    if (v.pass) {
        v.detail = std::to_string(runs) + " runs reach 0 with monotone, identical logs in " + std::to_string(secs) +
                   " s";
    }
    return v;
}

// 5 ---------------------------------------------------------------------------

// Naive last-value MASE on the validation split, derived from the raw series
// and split arithmetic alone.
double oracle_naive_valid(const std::vector<double>& y, std::size_t lag, std::size_t horizon, double valid_fraction,
                          double test_fraction, std::size_t expected_windows) {
    const std::size_t total = y.size();
    const auto n_valid = static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(total)));
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(total)));
    const std::size_t begin = total - n_test - n_valid;
    const std::size_t end = total - n_test;
    std::vector<double> truth;
    std::vector<double> guess;
    std::size_t windows = 0;
    for (std::size_t s = begin; s + lag + horizon <= end; ++s, ++windows) {
        for (std::size_t h = 0; h < horizon; ++h) {
            truth.push_back(y[s + lag + h]);
            guess.push_back(y[s + lag - 1]);
        }
    }
    if (windows != expected_windows) {
        return std::nan("");
    }
    double err = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        err += std::abs(truth[i] - guess[i]);
    }
    double diff = 0.0;
    for (std::size_t i = 1; i < truth.size(); ++i) {
        diff += std::abs(truth[i] - truth[i - 1]);
    }
    return (err / static_cast<double>(truth.size())) / (diff / static_cast<double>(truth.size() - 1));
}

Verdict desk_experiment() {
    Verdict v;
    const std::size_t cores = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t jobs = std::min<std::size_t>(cores, 4);
    const Dataset ds = synth(SynthKind::Sine, SynthParams{1.0, 24.0, 0.1, 0.5, 0.0}, 600, 0);
    const SplitOptions split;
    const DataSplits splits = split_and_window(ds, 24, 12, split);
    const double naive = oracle_naive_valid({ds.y.values().begin(), ds.y.values().end()}, 24, 12, split.valid_fraction, split.test_fraction,
                                            splits.valid.size());
    v.require(std::isfinite(naive), "naive oracle window count disagrees with the split");

    nn::TrainConfig train;
    train.epochs = 30;
    int wins = 0;
    double slowest = 0.0;
    std::ostringstream runs;
    const auto start = Clock::now();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        EvolutionConfig cfg;
        cfg.population_size = 8;
        cfg.generations = 10;
        cfg.schedule = {3, 2};
        cfg.master_seed = seed;
        cfg.jobs = jobs;
        const auto run_start = Clock::now();
        const EvolutionResult r =
            evolve(cfg, [&](const Individual& ind) { return evaluate_individual(ind, splits, train); });
        const double secs = seconds_since(run_start);
        slowest = std::max(slowest, secs);
        const double best = *r.best.fitness;
        wins += best < naive ? 1 : 0;
        runs << " seed" << seed << "=" << format_real(best) << "(" << static_cast<int>(secs) << "s)";
        std::cerr << "desk experiment seed " << seed << ": best " << best << " naive " << naive << " in " << secs
                  << " s\n";
    }
    const double total = seconds_since(start);
    v.require(wins >= 4, "beat the naive baseline in only " + std::to_string(wins) + " of 5 seeds");
    v.require(slowest < 600.0, "slowest run took " + std::to_string(slowest) + " s on " + std::to_string(jobs) +
                                   " threads");
    std::ostringstream s;
    s << wins << "/5 below naive " << format_real(naive) << ":" << runs.str() << "; slowest run " << slowest
      << " s, total " << total << " s on " << jobs << " of " << cores << " cores";
    if (v.pass) {
        v.detail = s.str();
    } else {
        v.detail += " [" + s.str() + "]";
    }
    return v;
}

// 6 ---------------------------------------------------------------------------

Verdict structural_indicators() {
    Verdict v;
    const Dag fig = testing::figure_graph();
    const Indicators f = indicators(fig, 1, 1);
    v.require(validate(fig).ok(), "example graph invalid");
    v.require(f.depth == 3 && f.depth == testing::brute_depth(fig), "example graph depth");
    v.require(f.width == 2 && f.width == testing::brute_width(fig), "example graph width");
    v.require(f.edges == 2.0, "example graph edges");
    Rng rng = make_rng(6);
    const SearchSpace space = SearchSpace::defaults();
    for (int i = 0; i < 1000; ++i) {
        const Dag d = random_dag(rng, NodeBounds{1, 10}, space, uniform_real(rng, 0.0, 1.0));
        const Indicators ind = indicators(d, 3, 2);
        const double edges =
            static_cast<double>(testing::edge_list(d).size()) / static_cast<double>(d.hidden.size());
        v.require(ind.depth == testing::brute_depth(d) && ind.width == testing::brute_width(d) && ind.edges == edges,
                  "mismatch on random graph " + std::to_string(i));
    }
    if (v.pass) {
        v.detail = "example graph and 1000 random graphs match brute force";
    }
    return v;
}

// 7 ---------------------------------------------------------------------------

Verdict seed_sweep_reproduction() {
    Verdict v;
    const Dataset ds = synth(SynthKind::Sine, SynthParams{1.0, 12.0, 0.1, 0.5, 0.0}, 240, 7);
    const DataSplits splits = split_and_window(ds, 12, 4);
    nn::TrainConfig train;
    train.epochs = 8;
    train.batch_size = 32;
    EvolutionConfig cfg;
    cfg.population_size = 6;
    cfg.generations = 4;
    cfg.bounds = {1, 4};
    cfg.master_seed = 7;
    const EvolutionResult r = evolve(cfg, [&](const Individual& ind) { return evaluate_individual(ind, splits, train); });
    const Individual& best = r.best;
    const auto seeds = sweep_seeds(best.seed, 20, cfg.space.seed_domain);
    const SeedSweep sweep = seed_sweep(best.dag, seeds, splits, train);
    v.require(sweep.scores.size() == 20, "sweep has " + std::to_string(sweep.scores.size()) + " entries");
    const auto own = std::find_if(sweep.scores.begin(), sweep.scores.end(),
                                  [&](const SeedScore& s) { return s.seed == best.seed; });
    v.require(own != sweep.scores.end(), "winning seed missing from the sweep");
    if (own != sweep.scores.end()) {
        v.require(own->mase == *best.fitness, "winning seed gives " + format_real(own->mase) + " instead of " +
                                                  format_real(*best.fitness));
    }
    v.require(sweep.max > sweep.min, "no spread across seeds");
    if (v.pass) {
        v.detail = "winner seed " + std::to_string(best.seed) + " reproduces " + format_real(*best.fitness) +
                   "; spread " + format_real(sweep.min) + " .. " + format_real(sweep.max);
    }
    return v;
}

// 8 ---------------------------------------------------------------------------

Verdict hp_freeze() {
    Verdict v;
    EvolutionConfig cfg;
    Rng rng = make_rng(8);
    Dag d = random_dag(rng, cfg.bounds, cfg.space);
    std::uint64_t seed = 1;
    for (int i = 0; i < 10000; ++i) {
        if (i % 50 == 0) {
            d = random_dag(rng, cfg.bounds, cfg.space, uniform_real(rng, 0.0, 1.0));
        }
        auto [next, next_seed] = mutate_hyperparameters(d, seed, rng, cfg);
        v.require(next.adj == d.adj && next.hidden.size() == d.hidden.size(),
                  "topology changed at application " + std::to_string(i));
        for (std::size_t k = 0; k < d.hidden.size() && k < next.hidden.size(); ++k) {
            v.require(next.hidden[k].kind == d.hidden[k].kind, "layer kind changed at application " +
                                                                   std::to_string(i));
        }
        d = std::move(next);
        seed = next_seed;
    }
    if (v.pass) {
        v.detail = "10000 applications leave adjacency and node count unchanged";
    }
    return v;
}

struct Criterion {
    const char* name;
    std::function<Verdict()> run;
};

}  // namespace
}  // namespace dagevo

int main(int argc, char** argv) {
    using namespace dagevo;
    const std::vector<Criterion> criteria = {
        {"1_graph_fuzz", graph_fuzz},
        {"2_gradient_oracle", gradient_oracle},
        {"3_mase_identities", mase_identities},
        {"4_elitism_determinism", elitism_determinism},
        {"5_desk_experiment", desk_experiment},
        {"6_structural_indicators", structural_indicators},
        {"7_seed_sweep", seed_sweep_reproduction},
        {"8_hp_freeze", hp_freeze},
    };
    std::size_t only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--only" && i + 1 < argc) {
            only = std::strtoul(argv[++i], nullptr, 10);
        } else {
            std::cerr << "usage: " << argv[0] << " [--only N]\n";
            return 2;
        }
    }
    if (only > criteria.size()) {
        std::cerr << "no criterion " << only << "\n";
        return 2;
    }
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && only != i + 1) {
            continue;
        }
        Verdict v;
        try {
            v = criteria[i].run();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        std::cout << (v.pass ? "PASS " : "FAIL ") << criteria[i].name << ": " << v.detail << std::endl;
        all = all && v.pass;
    }
    return all ? 0 : 1;
}
