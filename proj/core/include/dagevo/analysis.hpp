#pragma once

/// @file analysis.hpp
/// Structural indicators of genomes, seed-sensitivity sweeps and the CSV
/// reports behind convergence plots.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dagevo/dag.hpp"
#include "dagevo/evaluation.hpp"
#include "dagevo/evolution.hpp"

namespace dagevo {

/// Layer-kind buckets in report order.
enum class KindBucket { MLP, Att, CNN, RNN, Drop, Id, Pool };

inline constexpr std::array<std::string_view, 7> kBucketNames = {"MLP", "Att", "CNN", "RNN", "Drop", "Id", "Pool"};

KindBucket bucket_of(LayerKind kind);

struct Indicators {
    std::size_t nodes = 0;
    std::size_t width = 0;  ///< max over hidden nodes of max(in-degree, out-degree)
    std::size_t depth = 0;  ///< hidden nodes on the longest Input -> Output path
    double dim = 0.0;       ///< widest hidden output over max(input, output) channels
    double edges = 0.0;     ///< edge count over hidden node count
    std::array<std::size_t, 7> counts{};  ///< indexed by KindBucket
};

Indicators indicators(const Dag& dag, std::size_t input_channels, std::size_t output_channels);

/// `nodes,width,depth,dim,edges,MLP,Att,CNN,RNN,Drop,Id,Pool`
std::string indicators_header();
std::string indicators_row(const Indicators& ind);

struct SeedScore {
    std::uint64_t seed = 0;
    double mase = 0.0;
};

struct SeedSweep {
    std::vector<SeedScore> scores;  ///< in seed-list order
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
};

/// `count` distinct seeds: `own` first, the rest drawn deterministically from
/// the seed domain.
std::vector<std::uint64_t> sweep_seeds(std::uint64_t own, std::size_t count, const IntegerDomain& domain);

/// Retrains the same genome under every seed of `seeds` and scores it on the
/// validation split. Runs on up to `jobs` threads; order follows `seeds`.
SeedSweep seed_sweep(const Dag& dag, const std::vector<std::uint64_t>& seeds, const DataSplits& splits,
                     const nn::TrainConfig& cfg, std::size_t jobs = 1);

/// Equal-width bins over [min, max] of `values`.
std::vector<std::size_t> histogram(const std::vector<double>& values, std::size_t bins);

/// `generation,scope,individual_id,fitness`
std::string per_individual_csv(const std::vector<GenerationLog>& logs);
/// `generation,scope,best,mean`
std::string summary_csv(const std::vector<GenerationLog>& logs);
/// `seed,mase`
std::string seed_sweep_csv(const SeedSweep& sweep);

/// Writes per_individual.csv and summary.csv into `dir`, creating it if needed.
void report(const std::vector<GenerationLog>& logs, const std::string& dir);

/// Writes `text` to `path`; throws IoError with the path on failure.
void write_text_file(const std::string& path, const std::string& text);

/// Shortest round-trip decimal form.
std::string format_real(double v);

}  // namespace dagevo
