#include "dagevo/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "dagevo/errors.hpp"

namespace dagevo {

std::string_view to_string(ArchOp op) {
    switch (op) {
        case ArchOp::NodeInsertion: return "node_insertion";
        case ArchOp::NodeDeletion: return "node_deletion";
        case ArchOp::ParentsModification: return "parents_modification";
        case ArchOp::ChildrenModification: return "children_modification";
        case ArchOp::NodeModification: return "node_modification";
    }
    return "?";
}

std::string_view to_string(Scope scope) {
    return scope == Scope::Architecture ? "architecture" : "hyperparameters";
}

Scope ScopeSchedule::scope_of(std::size_t generation) const {
    const std::size_t period = architecture_generations + hyperparameter_generations;
    if (hyperparameter_generations == 0) {
        return Scope::Architecture;
    }
    if (architecture_generations == 0) {
        return Scope::Hyperparameters;
    }
    return generation % period < architecture_generations ? Scope::Architecture : Scope::Hyperparameters;
}

namespace {

void check_probability(double p, const char* key) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError(key, "must lie in [0, 1]");
    }
}

}  // namespace

void EvolutionConfig::check() const {
    if (population_size < 4) {
        throw ConfigError("evolution.population_size", ">= 4 required");
    }
    if (generations < 1) {
        throw ConfigError("evolution.generations", ">= 1 required");
    }
    if (tournament_size < 2) {
        throw ConfigError("evolution.tournament_size", ">= 2 required");
    }
    if (tournament_size > population_size) {
        throw ConfigError("evolution.tournament_size", "must not exceed population_size");
    }
    if (!(immigrant_fraction >= 0.0 && immigrant_fraction < 1.0)) {
        throw ConfigError("evolution.immigrant_fraction", "must lie in [0, 1)");
    }
    if (!(replacement_fraction > 0.0 && replacement_fraction < 1.0)) {
        throw ConfigError("evolution.replacement_fraction", "must lie in (0, 1)");
    }
    check_probability(crossover_probability, "evolution.crossover_probability");
    check_probability(mutation.node_probability, "evolution.node_probability");
    check_probability(mutation.edge_probability, "evolution.edge_probability");
    check_probability(mutation.seed_probability, "evolution.seed_probability");
    check_probability(edge_density, "evolution.edge_density");
    double total = 0.0;
    for (double w : mutation.op_weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ConfigError("evolution.op_weights", "weights must be finite and nonnegative");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw ConfigError("evolution.op_weights", "at least one weight must be positive");
    }
    if (schedule.architecture_generations + schedule.hyperparameter_generations == 0) {
        throw ConfigError("evolution.schedule", "at least one scope block must be nonempty");
    }
    if (bounds.min_nodes < 1 || bounds.min_nodes > bounds.max_nodes) {
        throw ConfigError("evolution.min_nodes", "need 1 <= min_nodes <= max_nodes");
    }
    try {
        space.check();
    } catch (const DomainError& e) {
        throw ConfigError("evolution.space", e.what());
    }
}

Individual random_individual(Rng& rng, const EvolutionConfig& cfg, std::uint64_t id) {
    Individual ind;
    ind.dag = random_dag(rng, cfg.bounds, cfg.space, cfg.edge_density);
    ind.seed = static_cast<std::uint64_t>(uniform_int(rng, cfg.space.seed_domain.lo, cfg.space.seed_domain.hi));
    ind.id = id;
    return ind;
}

// ---------------------------------------------------------------------------
// Architecture mutation

namespace {

/// Sets each cell with probability p; forces one uniformly drawn cell when none was set.
template <typename SetCell>
void draw_edges(std::size_t lo, std::size_t hi, double p, Rng& rng, SetCell set_cell) {
    bool any = false;
    for (std::size_t k = lo; k < hi; ++k) {
        const bool on = bernoulli(rng, p);
        set_cell(k, on);
        any = any || on;
    }
    if (!any) {
        set_cell(lo + uniform_index(rng, hi - lo), true);
    }
}

std::vector<std::size_t> select_nodes(std::size_t n, double p, Rng& rng) {
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < n; ++i) {
        if (bernoulli(rng, p)) {
            selected.push_back(i);
        }
    }
    if (selected.empty()) {
        selected.push_back(uniform_index(rng, n));
    }
    return selected;
}

bool op_allowed(ArchOp op, const Dag& dag, const NodeBounds& bounds) {
    if (op == ArchOp::NodeInsertion) {
        return dag.hidden.size() < bounds.max_nodes;
    }
    if (op == ArchOp::NodeDeletion) {
        return dag.hidden.size() > bounds.min_nodes;
    }
    return true;
}

std::optional<ArchOp> draw_op(const Dag& dag, Rng& rng, const EvolutionConfig& cfg) {
    std::array<double, 5> w = cfg.mutation.op_weights;
    double total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!op_allowed(kAllArchOps[k], dag, cfg.bounds)) {
            w[k] = 0.0;
        }
        total += w[k];
    }
    if (!(total > 0.0)) {
        return std::nullopt;
    }
    double u = uniform_real(rng, 0.0, total);
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (w[k] > 0.0 && u < w[k]) {
            return kAllArchOps[k];
        }
        u -= w[k];
    }
    for (std::size_t k = w.size(); k-- > 0;) {
        if (w[k] > 0.0) {
            return kAllArchOps[k];
        }
    }
    return std::nullopt;
}

void modify_node(NodeSpec& node, Rng& rng, const SearchSpace& space) {
    std::array<bool, 3> redraw{};
    bool any = false;
    for (auto& r : redraw) {
        r = bernoulli(rng, 0.5);
        any = any || r;
    }
    if (!any) {
        redraw[uniform_index(rng, 3)] = true;
    }
    if (redraw[0]) {
        node.combiner = space.combiners[uniform_index(rng, space.combiners.size())];
    }
    if (redraw[1]) {
        node.kind = space.kinds[uniform_index(rng, space.kinds.size())];
        node.params = sample_params(space, node.kind, rng);
    }
    if (redraw[2]) {
        node.activation = space.activations[uniform_index(rng, space.activations.size())];
    }
}

}  // namespace

bool apply_arch_op(Dag& dag, std::size_t index, ArchOp op, Rng& rng, const EvolutionConfig& cfg) {
    if (index >= dag.hidden.size()) {
        throw DomainError("apply_arch_op: node index out of range");
    }
    if (!op_allowed(op, dag, cfg.bounds)) {
        return false;
    }
    const double p = cfg.mutation.edge_probability;
    const std::size_t v = index + 1;
    switch (op) {
        case ArchOp::NodeInsertion: {
            const std::size_t u = v + 1;
            dag.hidden.insert(dag.hidden.begin() + static_cast<std::ptrdiff_t>(index + 1),
                              sample_node(cfg.space, rng));
            dag.adj.insert_vertex(u);
            const std::size_t m = dag.adj.size();
            draw_edges(0, u, p, rng, [&](std::size_t i, bool on) { dag.adj.set(i, u, on); });
            draw_edges(u + 1, m, p, rng, [&](std::size_t j, bool on) { dag.adj.set(u, j, on); });
            break;
        }
        case ArchOp::NodeDeletion:
            dag.hidden.erase(dag.hidden.begin() + static_cast<std::ptrdiff_t>(index));
            dag.adj.erase_vertex(v);
            break;
        case ArchOp::ParentsModification:
            draw_edges(0, v, p, rng, [&](std::size_t i, bool on) { dag.adj.set(i, v, on); });
            break;
        case ArchOp::ChildrenModification:
            draw_edges(v + 1, dag.adj.size(), p, rng, [&](std::size_t j, bool on) { dag.adj.set(v, j, on); });
            break;
        case ArchOp::NodeModification:
            modify_node(dag.hidden[index], rng, cfg.space);
            break;
    }
    dag = repair(std::move(dag), rng);
    return true;
}

Dag mutate_architecture(const Dag& dag, Rng& rng, const EvolutionConfig& cfg) {
    Dag out = dag;
    const std::vector<std::size_t> selected = select_nodes(out.hidden.size(), cfg.mutation.node_probability, rng);
    // Original index of every current hidden position; inserted nodes get npos.
    std::vector<std::size_t> origin(out.hidden.size());
    std::iota(origin.begin(), origin.end(), std::size_t{0});
    constexpr std::size_t kNew = static_cast<std::size_t>(-1);

    for (std::size_t target : selected) {
        const auto it = std::find(origin.begin(), origin.end(), target);
        if (it == origin.end()) {
            continue;
        }
        const auto pos = static_cast<std::size_t>(it - origin.begin());
        const std::optional<ArchOp> op = draw_op(out, rng, cfg);
        if (!op) {
            continue;
        }
        apply_arch_op(out, pos, *op, rng, cfg);
        if (*op == ArchOp::NodeInsertion) {
            origin.insert(origin.begin() + static_cast<std::ptrdiff_t>(pos + 1), kNew);
        } else if (*op == ArchOp::NodeDeletion) {
            origin.erase(origin.begin() + static_cast<std::ptrdiff_t>(pos));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Hyperparameter mutation

std::pair<Dag, std::uint64_t> mutate_hyperparameters(const Dag& dag, std::uint64_t seed, Rng& rng,
                                                     const EvolutionConfig& cfg) {
    const SearchSpace& space = cfg.space;
    Dag out = dag;
    const std::vector<std::size_t> selected = select_nodes(out.hidden.size(), cfg.mutation.node_probability, rng);

    for (std::size_t index : selected) {
        NodeSpec& node = out.hidden[index];
        // Mutable items: 0 = combiner, 1 = activation, k + 2 = k-th kind parameter.
        std::vector<std::size_t> items;
        if (space.combiners.size() >= 2) {
            items.push_back(0);
        }
        if (space.activations.size() >= 2) {
            items.push_back(1);
        }
        const auto& domains = space.domains(node.kind);
        for (std::size_t k = 0; k < domains.size(); ++k) {
            const bool movable = std::visit(
                [](const auto& d) {
                    using D = std::decay_t<decltype(d)>;
                    if constexpr (std::is_same_v<D, CategoricalDomain>) {
                        return d.choices.size() >= 2;
                    } else {
                        return d.lo < d.hi;
                    }
                },
                domains[k].range);
            if (movable) {
                items.push_back(k + 2);
            }
        }
        if (items.empty()) {
            continue;
        }
        const std::size_t h = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<std::int64_t>(items.size())));
        // Partial Fisher-Yates: the first h entries form a uniform subset.
        for (std::size_t k = 0; k < h; ++k) {
            std::swap(items[k], items[k + uniform_index(rng, items.size() - k)]);
        }
        std::sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(h));
        for (std::size_t k = 0; k < h; ++k) {
            const std::size_t item = items[k];
            if (item == 0) {
                node.combiner = neighbor_categorical<Combiner>(node.combiner, space.combiners, rng);
            } else if (item == 1) {
                node.activation = neighbor_categorical<Activation>(node.activation, space.activations, rng);
            } else {
                const HyperDomain& domain = domains[item - 2];
                auto found = node.params.find(domain.name);
                if (found == node.params.end()) {
                    node.params[domain.name] = sample_value(domain, rng);
                } else {
                    found->second = neighbor_value(found->second, domain, rng);
                }
            }
        }
    }

    if (bernoulli(rng, cfg.mutation.seed_probability) && space.seed_domain.lo < space.seed_domain.hi) {
        IntegerDomain whole = space.seed_domain;
        whole.radius = whole.hi - whole.lo;
        auto current = static_cast<std::int64_t>(seed);
        current = std::clamp(current, whole.lo, whole.hi);
        seed = static_cast<std::uint64_t>(neighbor_integer(current, whole, rng));
    }
    return {std::move(out), seed};
}

// ---------------------------------------------------------------------------
// Crossover

CrossoverBlocks draw_crossover_blocks(const Dag& p1, const Dag& p2, Rng& rng, const NodeBounds& bounds) {
    const auto n1 = static_cast<std::int64_t>(p1.hidden.size());
    const auto n2 = static_cast<std::int64_t>(p2.hidden.size());
    const auto lo_b = static_cast<std::int64_t>(bounds.min_nodes);
    const auto hi_b = static_cast<std::int64_t>(bounds.max_nodes);
    // For block lengths (l1, l2): child1 has n1 - l1 + l2 nodes, child2 n2 - l2 + l1.
    auto l2_range = [&](std::int64_t l1) {
        const std::int64_t lo = std::max({std::int64_t{1}, lo_b - n1 + l1, n2 + l1 - hi_b});
        const std::int64_t hi = std::min({n2, hi_b - n1 + l1, n2 + l1 - lo_b});
        return std::pair{lo, hi};
    };
    std::vector<std::int64_t> feasible;
    for (std::int64_t l1 = 1; l1 <= n1; ++l1) {
        auto [lo, hi] = l2_range(l1);
        if (lo <= hi) {
            feasible.push_back(l1);
        }
    }
    if (feasible.empty()) {
        throw DomainError("crossover: no block lengths keep both children within the node bounds");
    }
    const std::int64_t l1 = feasible[uniform_index(rng, feasible.size())];
    const auto [lo, hi] = l2_range(l1);
    const std::int64_t l2 = uniform_int(rng, lo, hi);
    CrossoverBlocks b;
    b.length1 = static_cast<std::size_t>(l1);
    b.length2 = static_cast<std::size_t>(l2);
    b.start1 = static_cast<std::size_t>(uniform_int(rng, 0, n1 - l1));
    b.start2 = static_cast<std::size_t>(uniform_int(rng, 0, n2 - l2));
    return b;
}

namespace {

/// Replaces host hidden nodes [s, s+l) with donor hidden nodes [t, t+k).
Dag splice(const Dag& host, std::size_t s, std::size_t l, const Dag& donor, std::size_t t, std::size_t k, Rng& rng) {
    Dag child;
    child.hidden.assign(host.hidden.begin(), host.hidden.begin() + static_cast<std::ptrdiff_t>(s));
    child.hidden.insert(child.hidden.end(), donor.hidden.begin() + static_cast<std::ptrdiff_t>(t),
                        donor.hidden.begin() + static_cast<std::ptrdiff_t>(t + k));
    child.hidden.insert(child.hidden.end(), host.hidden.begin() + static_cast<std::ptrdiff_t>(s + l),
                        host.hidden.end());

    child.adj = host.adj;
    for (std::size_t r = 0; r < l; ++r) {
        child.adj.erase_vertex(s + 1);
    }
    for (std::size_t r = 0; r < k; ++r) {
        child.adj.insert_vertex(s + 1);
    }
    AdjacencyMatrix& adj = child.adj;
    const std::size_t m = adj.size();
    const std::size_t first = s + 1;
    const std::size_t last = s + k;  // inclusive
    auto in_block = [&](std::size_t v) { return v >= first && v <= last; };

    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            adj.set(first + a, first + b, donor.adj(t + 1 + a, t + 1 + b));
        }
    }
    for (std::size_t u = first; u <= last; ++u) {
        for (std::size_t w = 0; w < m; ++w) {
            if (in_block(w)) {
                continue;
            }
            const bool on = bernoulli(rng, 0.5);
            if (w < u) {
                adj.set(w, u, on);
            } else {
                adj.set(u, w, on);
            }
        }
    }
    // Block nodes left without children or parents get a host neighbor so
    // that repair never needs to touch the block-internal cells.
    for (std::size_t u = first; u <= last; ++u) {
        if (adj.row_empty(u)) {
            const std::size_t j = last + 1 + uniform_index(rng, m - last - 1);
            adj.set(u, j);
        }
        if (adj.column_empty(u)) {
            adj.set(uniform_index(rng, first), u);
        }
    }
    return repair(std::move(child), rng);
}

}  // namespace

std::pair<Dag, Dag> crossover_with(const Dag& p1, const Dag& p2, const CrossoverBlocks& b, Rng& rng) {
    if (b.length1 == 0 || b.length2 == 0 || b.start1 + b.length1 > p1.hidden.size() ||
        b.start2 + b.length2 > p2.hidden.size()) {
        throw DomainError("crossover: block out of range");
    }
    Dag c1 = splice(p1, b.start1, b.length1, p2, b.start2, b.length2, rng);
    Dag c2 = splice(p2, b.start2, b.length2, p1, b.start1, b.length1, rng);
    return {std::move(c1), std::move(c2)};
}

std::pair<Dag, Dag> crossover(const Dag& p1, const Dag& p2, Rng& rng, const EvolutionConfig& cfg) {
    const CrossoverBlocks blocks = draw_crossover_blocks(p1, p2, rng, cfg.bounds);
    return crossover_with(p1, p2, blocks, rng);
}

// ---------------------------------------------------------------------------
// Selection and loop

namespace {

bool better(const Individual& a, const Individual& b) {
    if (*a.fitness != *b.fitness) {
        return *a.fitness < *b.fitness;
    }
    return a.id < b.id;
}

}  // namespace

const Individual& tournament_select(const std::vector<Individual>& population, std::size_t k, Rng& rng) {
    if (k == 0 || k > population.size()) {
        throw DomainError("tournament size must lie in [1, population size]");
    }
    for (const auto& ind : population) {
        if (!ind.fitness) {
            throw StateError("tournament_select: individual " + std::to_string(ind.id) + " has no fitness");
        }
    }
    std::vector<std::size_t> idx(population.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::size_t winner = 0;
    for (std::size_t r = 0; r < k; ++r) {
        std::swap(idx[r], idx[r + uniform_index(rng, idx.size() - r)]);
        if (r == 0 || better(population[idx[r]], population[winner])) {
            winner = idx[r];
        }
    }
    return population[winner];
}

std::vector<double> evaluate_all(const std::vector<Individual>& batch, const Evaluator& evaluator,
                                 std::size_t jobs) {
    std::vector<double> results(batch.size(), 0.0);
    std::vector<std::exception_ptr> errors(batch.size());
    auto run_one = [&](std::size_t i) {
        try {
            results[i] = evaluator(batch[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (jobs == 0) {
        jobs = std::max(1u, std::thread::hardware_concurrency());
    }
    jobs = std::min(jobs, batch.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
            run_one(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(jobs);
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < batch.size(); i = next++) {
                    run_one(i);
                }
            });
        }
        for (auto& t : workers) {
            t.join();
        }
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (errors[i]) {
            try {
                std::rethrow_exception(errors[i]);
            } catch (const EvaluationError&) {
                throw;
            } catch (const std::exception& e) {
                throw EvaluationError(batch[i].id, e.what());
            } catch (...) {
                throw EvaluationError(batch[i].id, "unknown error");
            }
        }
    }
    return results;
}

namespace {

double sanitize(double f) {
    if (!std::isfinite(f) || f < 0.0 || f > kFailedFitness) {
        return kFailedFitness;
    }
    return f;
}

void evaluate_population(std::vector<Individual>& population, const Evaluator& evaluator, std::size_t jobs) {
    const std::vector<double> f = evaluate_all(population, evaluator, jobs);
    for (std::size_t i = 0; i < population.size(); ++i) {
        population[i].fitness = sanitize(f[i]);
    }
}

GenerationLog make_log(std::size_t generation, Scope scope, const std::vector<Individual>& population,
                       double previous_best) {
    GenerationLog log;
    log.generation = generation;
    log.scope = scope;
    double sum = 0.0;
    double best = previous_best;
    for (const auto& ind : population) {
        log.individuals.push_back({ind.id, *ind.fitness});
        sum += *ind.fitness;
        best = std::min(best, *ind.fitness);
    }
    log.best_so_far = best;
    log.mean = sum / static_cast<double>(population.size());
    return log;
}

}  // namespace

EvolutionResult evolve(const EvolutionConfig& cfg, const Evaluator& evaluator) {
    cfg.check();
    Rng rng = make_rng(cfg.master_seed, 0);
    const std::size_t n = cfg.population_size;
    std::uint64_t next_id = 0;

    std::vector<Individual> population;
    population.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        population.push_back(random_individual(rng, cfg, next_id++));
    }
    evaluate_population(population, evaluator, cfg.jobs);

    EvolutionResult result;
    auto track_best = [&](const std::vector<Individual>& pop) {
        for (const auto& ind : pop) {
            if (!result.best.fitness || better(ind, result.best)) {
                result.best = ind;
            }
        }
    };
    track_best(population);
    result.logs.push_back(make_log(0, cfg.schedule.scope_of(0), population, kFailedFitness));

    const auto immigrants = static_cast<std::size_t>(std::llround(cfg.immigrant_fraction * static_cast<double>(n)));
    const auto replaced = std::min(
        n, static_cast<std::size_t>(std::ceil(cfg.replacement_fraction * static_cast<double>(n) - 1e-9)));

    for (std::size_t g = 1; g < cfg.generations; ++g) {
        const Scope scope = cfg.schedule.scope_of(g);

        std::vector<Individual> pool;
        pool.reserve(n);
        for (std::size_t i = 0; i + immigrants < n; ++i) {
            pool.push_back(tournament_select(population, cfg.tournament_size, rng));
        }
        while (pool.size() < n) {
            pool.push_back(random_individual(rng, cfg, 0));
        }
        std::shuffle(pool.begin(), pool.end(), rng);

        std::vector<Individual> offspring;
        offspring.reserve(n);
        for (std::size_t i = 0; i < n; i += 2) {
            Individual a = pool[i];
            if (i + 1 < n) {
                Individual b = pool[i + 1];
                if (scope == Scope::Architecture && bernoulli(rng, cfg.crossover_probability)) {
                    auto [c1, c2] = crossover(a.dag, b.dag, rng, cfg);
                    a.dag = std::move(c1);
                    b.dag = std::move(c2);
                }
                offspring.push_back(std::move(a));
                offspring.push_back(std::move(b));
            } else {
                offspring.push_back(std::move(a));
            }
        }
        for (auto& child : offspring) {
            if (scope == Scope::Architecture) {
                child.dag = mutate_architecture(child.dag, rng, cfg);
            } else {
                auto [dag, seed] = mutate_hyperparameters(child.dag, child.seed, rng, cfg);
                child.dag = std::move(dag);
                child.seed = seed;
            }
            child.fitness.reset();
            child.id = next_id++;
        }
        evaluate_population(offspring, evaluator, cfg.jobs);

        // Worst offspring make room for the best previous individuals.
        std::vector<std::size_t> worst(n);
        std::iota(worst.begin(), worst.end(), std::size_t{0});
        std::sort(worst.begin(), worst.end(),
                  [&](std::size_t a, std::size_t b) { return better(offspring[b], offspring[a]); });
        std::vector<std::size_t> elite(n);
        std::iota(elite.begin(), elite.end(), std::size_t{0});
        std::sort(elite.begin(), elite.end(),
                  [&](std::size_t a, std::size_t b) { return better(population[a], population[b]); });
        for (std::size_t r = 0; r < replaced; ++r) {
            offspring[worst[r]] = population[elite[r]];
        }

        population = std::move(offspring);
        track_best(population);
        result.logs.push_back(make_log(g, scope, population, result.logs.back().best_so_far));
    }
    result.final_population = std::move(population);
    return result;
}

}  // namespace dagevo
