#pragma once

/// @file run_config.hpp
/// Run configuration: flat `key = value` text with dotted section prefixes.
/// Blank lines and lines starting with `#` are ignored; unknown or repeated
/// keys are rejected.
///
///   data.path              CSV file (relative paths resolve against the config file)
///   data.synth             sine | ar1 | trend_noise (instead of data.path)
///   data.length            synthetic length T                     [600]
///   data.seed              synthetic noise seed                   [0]
///   data.amplitude data.period data.noise data.phi data.slope    synthetic parameters
///   data.features          comma-separated CSV columns used as features
///   data.frequency         free-form label
///   data.lag               input window length                    [24]
///   data.horizon           forecast length                        [12]
///   split.valid_fraction   [0.15]
///   split.test_fraction    [0.15]
///   evolution.population_size        [40]
///   evolution.generations            [100]
///   evolution.tournament_size        [3]
///   evolution.immigrant_fraction     [0.1]
///   evolution.replacement_fraction   [0.2]
///   evolution.crossover_probability  [0.9]
///   evolution.architecture_generations [5]
///   evolution.hyperparameter_generations [5]
///   evolution.node_probability       [0.3]
///   evolution.edge_probability       [0.3]
///   evolution.seed_probability       [0.2]
///   evolution.op_weights   five weights: insertion, deletion, parents, children, node [1,1,1,1,1]
///   evolution.min_nodes              [1]
///   evolution.max_nodes              [10]
///   evolution.edge_density           [0.3]
///   evolution.master_seed            [0]
///   train.epochs                     [100]
///   train.batch_size                 [64]
///   train.learning_rate              [0.01]
///   train.clip_norm                  [5]
///   output.dir                       [out]
///   run.jobs               worker threads, 0 = all cores [0]

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dagevo/data_io.hpp"
#include "dagevo/evaluation.hpp"
#include "dagevo/evolution.hpp"
#include "dagevo/training.hpp"

namespace dagevo {

struct DataSource {
    std::optional<std::string> path;
    std::optional<SynthKind> synth;
    SynthParams synth_params;
    std::size_t length = 600;
    std::uint64_t seed = 0;
    std::vector<std::string> feature_columns;
    std::string frequency;
};

struct RunConfig {
    DataSource data;
    std::size_t lag = 24;
    std::size_t horizon = 12;
    SplitOptions split;
    EvolutionConfig evolution;
    nn::TrainConfig train;
    std::string output_dir = "out";
    std::size_t jobs = 0;

    /// Throws ConfigError naming the offending key.
    void check() const;
};

/// Throws ConfigError naming the key (or `config` when the file is unreadable).
RunConfig parse_config(const std::string& path);

/// `base_dir` anchors relative data paths.
RunConfig parse_config_text(const std::string& text, const std::string& base_dir = {});

/// Loads or synthesizes the configured dataset.
Dataset load_dataset(const RunConfig& cfg);

/// Every recognized key, in documentation order.
const std::vector<std::string>& config_keys();

}  // namespace dagevo
