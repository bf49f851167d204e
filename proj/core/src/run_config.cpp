#include "dagevo/run_config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "dagevo/errors.hpp"

namespace dagevo {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || end != v.data() + v.size()) {
        throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
    }
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
    return static_cast<std::size_t>(to_unsigned(key, v));
}

double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || end != v.data() + v.size() || !std::isfinite(out)) {
        throw ConfigError(key, "expected a finite number, got '" + v + "'");
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

struct KeyTable {
    std::vector<std::string> order;
    std::map<std::string, Setter, std::less<>> setters;

    void add(std::string key, Setter setter) {
        order.push_back(key);
        setters.emplace(std::move(key), std::move(setter));
    }
};

const KeyTable& key_table() {
    static const KeyTable table = [] {
        KeyTable t;
        t.add("data.path", [](RunConfig& c, const std::string&, const std::string& v) { c.data.path = v; });
        t.add("data.synth", [](RunConfig& c, const std::string& k, const std::string& v) {
            auto kind = parse_synth_kind(v);
            if (!kind) {
                throw ConfigError(k, "expected sine, ar1 or trend_noise, got '" + v + "'");
            }
            c.data.synth = *kind;
        });
        t.add("data.length", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.length = to_size(k, v); });
        t.add("data.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.seed = to_unsigned(k, v); });
        t.add("data.amplitude", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.synth_params.amplitude = to_real(k, v); });
        t.add("data.period", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.synth_params.period = to_real(k, v); });
        t.add("data.noise", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.synth_params.noise = to_real(k, v); });
        t.add("data.phi", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.synth_params.phi = to_real(k, v); });
        t.add("data.slope", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.synth_params.slope = to_real(k, v); });
        t.add("data.features", [](RunConfig& c, const std::string&, const std::string& v) { c.data.feature_columns = split_list(v); });
        t.add("data.frequency", [](RunConfig& c, const std::string&, const std::string& v) { c.data.frequency = v; });
        t.add("data.lag", [](RunConfig& c, const std::string& k, const std::string& v) { c.lag = to_size(k, v); });
        t.add("data.horizon", [](RunConfig& c, const std::string& k, const std::string& v) { c.horizon = to_size(k, v); });
        t.add("split.valid_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.split.valid_fraction = to_real(k, v); });
        t.add("split.test_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.split.test_fraction = to_real(k, v); });
        t.add("evolution.population_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.population_size = to_size(k, v); });
        t.add("evolution.generations", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.generations = to_size(k, v); });
        t.add("evolution.tournament_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.tournament_size = to_size(k, v); });
        t.add("evolution.immigrant_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.immigrant_fraction = to_real(k, v); });
        t.add("evolution.replacement_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.replacement_fraction = to_real(k, v); });
        t.add("evolution.crossover_probability", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.crossover_probability = to_real(k, v); });
        t.add("evolution.architecture_generations", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.schedule.architecture_generations = to_size(k, v); });
        t.add("evolution.hyperparameter_generations", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.schedule.hyperparameter_generations = to_size(k, v); });
        t.add("evolution.node_probability", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.mutation.node_probability = to_real(k, v); });
        t.add("evolution.edge_probability", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.mutation.edge_probability = to_real(k, v); });
        t.add("evolution.seed_probability", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.mutation.seed_probability = to_real(k, v); });
        t.add("evolution.op_weights", [](RunConfig& c, const std::string& k, const std::string& v) {
            const auto items = split_list(v);
            if (items.size() != c.evolution.mutation.op_weights.size()) {
                throw ConfigError(k, "expected 5 comma-separated weights");
            }
            for (std::size_t i = 0; i < items.size(); ++i) {
                c.evolution.mutation.op_weights[i] = to_real(k, items[i]);
            }
        });
        t.add("evolution.min_nodes", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.bounds.min_nodes = to_size(k, v); });
        t.add("evolution.max_nodes", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.bounds.max_nodes = to_size(k, v); });
        t.add("evolution.edge_density", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.edge_density = to_real(k, v); });
        t.add("evolution.master_seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.evolution.master_seed = to_unsigned(k, v); });
        t.add("train.epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = to_size(k, v); });
        t.add("train.batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = to_size(k, v); });
        t.add("train.learning_rate", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.learning_rate = to_real(k, v); });
        t.add("train.clip_norm", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.clip_norm = to_real(k, v); });
        t.add("output.dir", [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; });
        t.add("run.jobs", [](RunConfig& c, const std::string& k, const std::string& v) { c.jobs = to_size(k, v); });
        return t;
    }();
    return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    return key_table().order;
}

void RunConfig::check() const {
    if (data.path && data.synth) {
        throw ConfigError("data.synth", "data.path and data.synth are mutually exclusive");
    }
    if (!data.path && !data.synth) {
        throw ConfigError("data.path", "a dataset (data.path or data.synth) is required");
    }
    if (data.synth && data.length < 16) {
        throw ConfigError("data.length", ">= 16 required");
    }
    if (data.synth == SynthKind::Ar1 && !(std::abs(data.synth_params.phi) < 1.0)) {
        throw ConfigError("data.phi", "|phi| < 1 required");
    }
    if (data.synth_params.noise < 0.0) {
        throw ConfigError("data.noise", ">= 0 required");
    }
    if (!(data.synth_params.period > 0.0)) {
        throw ConfigError("data.period", "> 0 required");
    }
    if (lag == 0) {
        throw ConfigError("data.lag", ">= 1 required");
    }
    if (horizon == 0) {
        throw ConfigError("data.horizon", ">= 1 required");
    }
    if (!(split.valid_fraction > 0.0 && split.valid_fraction < 1.0)) {
        throw ConfigError("split.valid_fraction", "must lie in (0, 1)");
    }
    if (!(split.test_fraction >= 0.0 && split.valid_fraction + split.test_fraction < 1.0)) {
        throw ConfigError("split.test_fraction", "must be >= 0 with valid + test < 1");
    }
    evolution.check();
    try {
        train.check();
    } catch (const DomainError& e) {
        throw ConfigError("train", e.what());
    }
    if (output_dir.empty()) {
        throw ConfigError("output.dir", "must not be empty");
    }
}

RunConfig parse_config_text(const std::string& text, const std::string& base_dir) {
    RunConfig cfg;
    const KeyTable& table = key_table();
    std::set<std::string> seen;
    std::stringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') {
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(stripped, "line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const auto it = table.setters.find(key);
        if (it == table.setters.end()) {
            throw ConfigError(key, "unknown key");
        }
        if (!seen.insert(key).second) {
            throw ConfigError(key, "repeated key");
        }
        if (value.empty()) {
            throw ConfigError(key, "empty value");
        }
        it->second(cfg, key, value);
    }
    if (cfg.data.path && !base_dir.empty()) {
        std::filesystem::path p(*cfg.data.path);
        if (p.is_relative()) {
            cfg.data.path = (std::filesystem::path(base_dir) / p).lexically_normal().string();
        }
    }
    cfg.evolution.jobs = cfg.jobs;
    cfg.check();
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("config", "cannot open '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string dir = std::filesystem::path(path).parent_path().string();
    return parse_config_text(buffer.str(), dir);
}

Dataset load_dataset(const RunConfig& cfg) {
    Dataset ds;
    if (cfg.data.synth) {
        ds = synth(*cfg.data.synth, cfg.data.synth_params, cfg.data.length, cfg.data.seed);
    } else {
        CsvOptions opts;
        opts.frequency = cfg.data.frequency;
        opts.feature_columns = cfg.data.feature_columns;
        ds = load_csv(*cfg.data.path, opts);
    }
    ds.frequency = cfg.data.frequency;
    ds.lag = cfg.lag;
    ds.horizon = cfg.horizon;
    if (ds.length() <= cfg.lag + cfg.horizon) {
        throw InsufficientDataError("dataset shorter than lag + horizon", cfg.lag + cfg.horizon + 1, ds.length());
    }
    return ds;
}

}  // namespace dagevo
