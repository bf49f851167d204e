#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "dagevo/analysis.hpp"
#include "dagevo/data_io.hpp"
#include "dagevo/errors.hpp"
#include "dagevo/evaluation.hpp"
#include "dagevo/evolution.hpp"
#include "dagevo/model_io.hpp"
#include "dagevo/run_config.hpp"

namespace dagevo::cli {

namespace {

std::shared_ptr<spdlog::logger> logger() {
    static std::shared_ptr<spdlog::logger> log = [] {
        auto l = std::make_shared<spdlog::logger>("dagevo", std::make_shared<spdlog::sinks::stderr_sink_mt>());
        l->set_pattern("[%l] %v");
        spdlog::level::level_enum level = spdlog::level::info;
        if (const char* env = std::getenv("DAGEVO_LOG")) {
            const std::string v(env);
            if (v == "error") {
                level = spdlog::level::err;
            } else if (v == "debug") {
                level = spdlog::level::debug;
            }
        }
        l->set_level(level);
        return l;
    }();
    return log;
}

std::string fmt_opt(const std::optional<double>& v) {
    return v ? format_real(*v) : std::string();
}

SplitOptions split_options(const RunConfig& cfg) {
    SplitOptions opts = cfg.split;
    opts.allow_empty_test = cfg.split.test_fraction == 0.0;
    return opts;
}

DataSplits prepare_data(const RunConfig& cfg) {
    const Dataset ds = load_dataset(cfg);
    logger()->info("dataset '{}': T={} N={} F={}", ds.name, ds.length(), ds.series(), ds.features());
    DataSplits splits = split_and_window(ds, cfg.lag, cfg.horizon, split_options(cfg));
    logger()->info("windows: train={} valid={} test={}", splits.train.size(), splits.valid.size(),
                   splits.test.size());
    return splits;
}

/// Test-split MASE, or nothing when the test split is empty.
std::optional<double> test_score(const nn::Network& network, const nn::TrainResult& train, const DataSplits& splits) {
    if (splits.test.size() == 0) {
        return std::nullopt;
    }
    if (train.failed) {
        return kFailedFitness;
    }
    try {
        return score(network, splits, SplitRole::Test);
    } catch (const NumericsError&) {
        return kFailedFitness;
    }
}

void check_model_shapes(const ModelFile& model, const DataSplits& splits) {
    if (model.input_shape.time != splits.input_shape.time ||
        model.input_shape.channels != splits.input_shape.channels ||
        model.output_shape.horizon != splits.output_shape.horizon ||
        model.output_shape.series != splits.output_shape.series) {
        throw SchemaError("model shapes (lag " + std::to_string(model.input_shape.time) + ", channels " +
                          std::to_string(model.input_shape.channels) + ", horizon " +
                          std::to_string(model.output_shape.horizon) + ", series " +
                          std::to_string(model.output_shape.series) + ") do not match the dataset");
    }
}

int cmd_search(const std::string& config_path, const std::optional<std::string>& out_dir,
               const std::optional<std::size_t>& jobs, std::ostream& out) {
    RunConfig cfg = parse_config(config_path);
    if (out_dir) {
        cfg.output_dir = *out_dir;
    }
    if (jobs) {
        cfg.jobs = *jobs;
        cfg.evolution.jobs = *jobs;
    }
    const DataSplits splits = prepare_data(cfg);
    const double naive_valid = naive_mase(splits, SplitRole::Valid);

    const auto evaluator = [&](const Individual& ind) { return evaluate_individual(ind, splits, cfg.train); };
    logger()->info("search: population {} for {} generations", cfg.evolution.population_size,
                   cfg.evolution.generations);
    const EvolutionResult result = evolve(cfg.evolution, evaluator);
    for (const auto& log : result.logs) {
        logger()->debug("generation {} ({}): best {} mean {}", log.generation, to_string(log.scope),
                        log.best_so_far, log.mean);
    }

    const Individual& best = result.best;
    TrainedModel model = train_model(best.dag, best.seed, splits, cfg.train);
    const std::optional<double> test = test_score(model.network, model.train, splits);
    std::optional<double> naive_test;
    if (splits.test.size() > 0) {
        naive_test.emplace(naive_mase(splits, SplitRole::Test));
    }

    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path dir(cfg.output_dir);
    report(result.logs, cfg.output_dir);
    save_model((dir / "best_model.json").string(),
               export_model(best, splits.input_shape, splits.output_shape, &model.network));

    std::ostringstream csv;
    csv << "best_id,best_seed,nodes,best_valid_mase,test_mase,naive_valid_mase,naive_test_mase\n";
    csv << best.id << "," << best.seed << "," << best.dag.hidden.size() << "," << format_real(*best.fitness) << ","
        << fmt_opt(test) << "," << format_real(naive_valid) << "," << fmt_opt(naive_test) << "\n";
    write_text_file((dir / "result.csv").string(), csv.str());
    out << csv.str();
    logger()->info("results written to {}", cfg.output_dir);
    return kOk;
}

int cmd_eval(const std::string& model_path, const std::string& config_path, const std::optional<std::string>& data,
             bool naive, std::ostream& out) {
    RunConfig cfg = parse_config(config_path);
    if (data) {
        cfg.data.path = *data;
        cfg.data.synth.reset();
    }
    const ModelFile model = load_model(model_path);
    const DataSplits splits = prepare_data(cfg);
    check_model_shapes(model, splits);
    if (!model.weights.empty()) {
        nn::Network stored = nn::Network::build(model.dag, model.input_shape, model.output_shape, model.seed);
        load_weights(stored, model);
    }
    if (naive) {
        out << "naive_test_mase\n" << format_real(naive_mase(splits, SplitRole::Test)) << "\n";
        return kOk;
    }
    TrainedModel trained = train_model(model.dag, model.seed, splits, cfg.train);
    const std::optional<double> test = test_score(trained.network, trained.train, splits);
    if (!test) {
        throw InsufficientDataError("test split has no windows", 1, 0);
    }
    out << "test_mase\n" << format_real(*test) << "\n";
    return kOk;
}

int cmd_analyze(const std::string& model_path, std::ostream& out) {
    const ModelFile model = load_model(model_path);
    const Indicators ind = indicators(model.dag, model.input_shape.channels, model.output_shape.series);
    out << indicators_header() << "\n" << indicators_row(ind) << "\n";
    return kOk;
}

int cmd_seed_sweep(const std::string& model_path, const std::string& config_path, std::size_t seeds,
                   const std::optional<std::string>& out_path, const std::optional<std::size_t>& jobs,
                   std::ostream& out) {
    RunConfig cfg = parse_config(config_path);
    const ModelFile model = load_model(model_path);
    const DataSplits splits = prepare_data(cfg);
    check_model_shapes(model, splits);
    const std::vector<std::uint64_t> list = sweep_seeds(model.seed, seeds, cfg.evolution.space.seed_domain);
    const SeedSweep sweep = seed_sweep(model.dag, list, splits, cfg.train, jobs.value_or(cfg.jobs));
    logger()->info("seed sweep over {} seeds: min {} median {} max {}", seeds, sweep.min, sweep.median, sweep.max);
    const std::string csv = seed_sweep_csv(sweep);
    if (out_path) {
        write_text_file(*out_path, csv);
    } else {
        out << csv;
    }
    return kOk;
}

int cmd_synth(const std::string& kind_name, std::size_t length, std::uint64_t seed, const SynthParams& params,
              const std::optional<std::string>& out_path, std::ostream& out) {
    const auto kind = parse_synth_kind(kind_name);
    if (!kind) {
        throw DomainError("unknown synthetic kind '" + kind_name + "'");
    }
    const Dataset ds = synth(*kind, params, length, seed);
    if (out_path) {
        write_csv(ds, *out_path);
    } else {
        out << to_csv(ds);
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Evolutionary search over DAG-encoded forecasting networks"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    std::string config_path;
    std::string model_path;
    std::optional<std::string> out_dir;
    std::optional<std::string> data_path;
    std::optional<std::size_t> jobs;
    bool naive = false;
    std::size_t n_seeds = 20;
    std::string kind = "sine";
    std::size_t length = 600;
    std::uint64_t seed = 0;
    SynthParams params;

    std::string config_keys_help = "Config keys:";
    for (const auto& k : config_keys()) {
        config_keys_help += "\n  " + k;
    }

    auto* search = app.add_subcommand("search", "Run the evolutionary search");
    search->add_option("--config", config_path, "Run configuration file")->required();
    search->add_option("--out", out_dir, "Output directory (overrides output.dir)");
    search->add_option("--jobs", jobs, "Parallel evaluations (0 = all cores)");
    search->footer(config_keys_help);

    auto* eval = app.add_subcommand("eval", "Retrain an exported model and report its test MASE");
    eval->add_option("--model", model_path, "Exported model JSON")->required();
    eval->add_option("--config", config_path, "Run configuration file")->required();
    eval->add_option("--data", data_path, "CSV dataset (overrides the configured data)");
    eval->add_flag("--naive", naive, "Report the naive last-value forecast instead");

    auto* analyze = app.add_subcommand("analyze", "Print structural indicators of an exported model");
    analyze->add_option("--model", model_path, "Exported model JSON")->required();

    auto* sweep = app.add_subcommand("seed-sweep", "Retrain a model under many training seeds");
    sweep->add_option("--model", model_path, "Exported model JSON")->required();
    sweep->add_option("--config", config_path, "Run configuration file")->required();
    sweep->add_option("--seeds", n_seeds, "Number of seeds, the model's own included")->check(CLI::PositiveNumber);
    sweep->add_option("--out", out_dir, "CSV output file (default: stdout)");
    sweep->add_option("--jobs", jobs, "Parallel trainings (0 = all cores)");

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic series as CSV");
    synth_cmd->add_option("--kind", kind, "sine | ar1 | trend_noise")->check(CLI::IsMember({"sine", "ar1", "trend_noise"}));
    synth_cmd->add_option("--t", length, "Series length");
    synth_cmd->add_option("--seed", seed, "Noise seed");
    synth_cmd->add_option("--out", out_dir, "CSV output file (default: stdout)");
    synth_cmd->add_option("--amplitude", params.amplitude);
    synth_cmd->add_option("--period", params.period);
    synth_cmd->add_option("--noise", params.noise, "Gaussian noise sigma");
    synth_cmd->add_option("--phi", params.phi);
    synth_cmd->add_option("--slope", params.slope);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kUsage;
    }

    try {
        if (search->parsed()) {
            return cmd_search(config_path, out_dir, jobs, out);
        }
        if (eval->parsed()) {
            return cmd_eval(model_path, config_path, data_path, naive, out);
        }
        if (analyze->parsed()) {
            return cmd_analyze(model_path, out);
        }
        if (sweep->parsed()) {
            return cmd_seed_sweep(model_path, config_path, n_seeds, out_dir, jobs, out);
        }
        if (synth_cmd->parsed()) {
            return cmd_synth(kind, length, seed, params, out_dir, out);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << "\n";
        return kSchema;
    } catch (const ParseError& e) {
        err << "data error: " << e.what() << "\n";
        return kData;
    } catch (const MissingValueError& e) {
        err << "data error: " << e.what() << "\n";
        return kData;
    } catch (const InsufficientDataError& e) {
        err << "data error: " << e.what() << "\n";
        return kData;
    } catch (const DegenerateSeriesError& e) {
        err << "data error: " << e.what() << "\n";
        return kData;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return kData;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kOther;
    }
    return kUsage;
}

}  // namespace dagevo::cli
