#pragma once

/// @file evolution.hpp
/// Search operators over DAG genomes and the generational loop.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "dagevo/dag.hpp"
#include "dagevo/random.hpp"
#include "dagevo/search_space.hpp"

namespace dagevo {

struct Individual {
    Dag dag;
    std::uint64_t seed = 0;          ///< training seed
    std::optional<double> fitness;   ///< validation MASE, lower is better
    std::uint64_t id = 0;
};

/// Fitness assigned to individuals whose training diverged.
inline constexpr double kFailedFitness = 1e12;

enum class ArchOp { NodeInsertion, NodeDeletion, ParentsModification, ChildrenModification, NodeModification };

inline constexpr std::array<ArchOp, 5> kAllArchOps = {ArchOp::NodeInsertion, ArchOp::NodeDeletion,
                                                      ArchOp::ParentsModification,
                                                      ArchOp::ChildrenModification, ArchOp::NodeModification};

std::string_view to_string(ArchOp op);

struct MutationConfig {
    /// Relative weights, indexed like kAllArchOps.
    std::array<double, 5> op_weights = {1.0, 1.0, 1.0, 1.0, 1.0};
    double node_probability = 0.3;
    /// Probability of each candidate edge when edges are redrawn.
    double edge_probability = 0.3;
    /// Probability that a hyperparameter mutation also redraws the seed.
    double seed_probability = 0.2;
};

enum class Scope { Architecture, Hyperparameters };

std::string_view to_string(Scope scope);

struct ScopeSchedule {
    std::size_t architecture_generations = 5;
    std::size_t hyperparameter_generations = 5;

    /// Generations cycle through an architecture block then a hyperparameter block.
    Scope scope_of(std::size_t generation) const;
};

struct EvolutionConfig {
    std::size_t population_size = 40;
    /// Total generations logged, the random generation 0 included.
    std::size_t generations = 100;
    std::size_t tournament_size = 3;
    double immigrant_fraction = 0.1;
    double replacement_fraction = 0.2;
    double crossover_probability = 0.9;
    ScopeSchedule schedule;
    MutationConfig mutation;
    NodeBounds bounds;
    double edge_density = 0.3;
    SearchSpace space = SearchSpace::defaults();
    std::uint64_t master_seed = 0;
    /// Worker threads for offspring evaluation; 0 means hardware concurrency.
    std::size_t jobs = 1;

    /// Throws ConfigError naming the offending field.
    void check() const;
};

/// Random genome with a uniformly drawn training seed and no fitness.
Individual random_individual(Rng& rng, const EvolutionConfig& cfg, std::uint64_t id);

/// Applies one sub-operation to each node of a random subset of hidden nodes.
Dag mutate_architecture(const Dag& dag, Rng& rng, const EvolutionConfig& cfg);

/// Runs a single sub-operation on hidden node `index`. Returns false, leaving
/// `dag` untouched, when the op is not allowed by the node bounds.
bool apply_arch_op(Dag& dag, std::size_t index, ArchOp op, Rng& rng, const EvolutionConfig& cfg);

/// Moves parameters of a random node subset to neighboring values and
/// possibly redraws the seed. The matrix is never touched.
std::pair<Dag, std::uint64_t> mutate_hyperparameters(const Dag& dag, std::uint64_t seed, Rng& rng,
                                                     const EvolutionConfig& cfg);

/// Contiguous hidden-node block bounds chosen by crossover.
struct CrossoverBlocks {
    std::size_t start1 = 0;
    std::size_t length1 = 0;
    std::size_t start2 = 0;
    std::size_t length2 = 0;
};

/// Draws block lengths so that both children stay within the node bounds.
CrossoverBlocks draw_crossover_blocks(const Dag& p1, const Dag& p2, Rng& rng, const NodeBounds& bounds);

/// Swaps the given blocks. Child 1 hosts p2's block at p1's anchor and vice versa.
std::pair<Dag, Dag> crossover_with(const Dag& p1, const Dag& p2, const CrossoverBlocks& blocks, Rng& rng);

std::pair<Dag, Dag> crossover(const Dag& p1, const Dag& p2, Rng& rng, const EvolutionConfig& cfg);

/// Best of k distinct uniformly drawn individuals; ties go to the lower id.
/// Throws StateError if a fitness is missing, DomainError if k is 0 or
/// exceeds the population.
const Individual& tournament_select(const std::vector<Individual>& population, std::size_t k, Rng& rng);

struct IndividualRecord {
    std::uint64_t id = 0;
    double fitness = 0.0;
};

struct GenerationLog {
    std::size_t generation = 0;
    Scope scope = Scope::Architecture;
    std::vector<IndividualRecord> individuals;
    double best_so_far = 0.0;
    double mean = 0.0;

    bool operator==(const GenerationLog&) const = default;
};

inline bool operator==(const IndividualRecord& a, const IndividualRecord& b) {
    return a.id == b.id && a.fitness == b.fitness;
}

using Evaluator = std::function<double(const Individual&)>;

struct EvolutionResult {
    Individual best;
    std::vector<GenerationLog> logs;
    std::vector<Individual> final_population;
};

/// The generational loop. Evaluator exceptions are rethrown as
/// EvaluationError carrying the individual id.
EvolutionResult evolve(const EvolutionConfig& cfg, const Evaluator& evaluator);

/// Evaluates `batch` on up to `jobs` threads; results are in input order.
std::vector<double> evaluate_all(const std::vector<Individual>& batch, const Evaluator& evaluator,
                                 std::size_t jobs);

}  // namespace dagevo
