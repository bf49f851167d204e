#include "dagevo/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>

#include "dagevo/errors.hpp"
#include "dagevo/network.hpp"

namespace dagevo {

KindBucket bucket_of(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return KindBucket::MLP;
        case LayerKind::Attention: return KindBucket::Att;
        case LayerKind::Conv1D: return KindBucket::CNN;
        case LayerKind::Recurrence: return KindBucket::RNN;
        case LayerKind::Dropout: return KindBucket::Drop;
        case LayerKind::Identity: return KindBucket::Id;
        case LayerKind::Pooling: return KindBucket::Pool;
    }
    return KindBucket::Id;
}

Indicators indicators(const Dag& dag, std::size_t input_channels, std::size_t output_channels) {
    const AdjacencyMatrix& adj = dag.adj;
    const std::size_t m = adj.size();
    Indicators ind;
    ind.nodes = dag.hidden.size();
    for (std::size_t v = 1; v + 1 < m; ++v) {
        ind.width = std::max({ind.width, adj.in_degree(v), adj.out_degree(v)});
    }
    // Longest path in vertices, by dynamic programming over the topological order.
    std::vector<std::size_t> longest(m, 0);
    for (std::size_t j = 1; j < m; ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            if (adj(i, j)) {
                longest[j] = std::max(longest[j], longest[i] + 1);
            }
        }
    }
    ind.depth = longest[m - 1] - 1;

    const auto shapes = nn::infer_shapes(dag, nn::InputShape{1, input_channels});
    std::size_t widest = 0;
    for (const auto& s : shapes) {
        widest = std::max(widest, s.out_channels);
    }
    ind.dim = static_cast<double>(widest) / static_cast<double>(std::max(input_channels, output_channels));
    ind.edges = static_cast<double>(adj.edge_count()) / static_cast<double>(ind.nodes);
    for (const auto& node : dag.hidden) {
        ++ind.counts[static_cast<std::size_t>(bucket_of(node.kind))];
    }
    return ind;
}

std::string format_real(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

std::string indicators_header() {
    std::string h = "nodes,width,depth,dim,edges";
    for (auto name : kBucketNames) {
        h += ",";
        h += name;
    }
    return h;
}

std::string indicators_row(const Indicators& ind) {
    std::string r = std::to_string(ind.nodes) + "," + std::to_string(ind.width) + "," + std::to_string(ind.depth) +
                    "," + format_real(ind.dim) + "," + format_real(ind.edges);
    for (std::size_t c : ind.counts) {
        r += "," + std::to_string(c);
    }
    return r;
}

std::vector<std::uint64_t> sweep_seeds(std::uint64_t own, std::size_t count, const IntegerDomain& domain) {
    if (count == 0) {
        throw DomainError("seed sweep needs at least one seed");
    }
    const auto span = static_cast<std::uint64_t>(domain.hi - domain.lo) + 1;
    if (count > span + (own < static_cast<std::uint64_t>(domain.lo) || own > static_cast<std::uint64_t>(domain.hi))) {
        throw DomainError("seed domain holds fewer distinct seeds than requested");
    }
    std::vector<std::uint64_t> seeds{own};
    std::set<std::uint64_t> seen{own};
    Rng rng = make_rng(own, 3);
    while (seeds.size() < count) {
        const auto s = static_cast<std::uint64_t>(uniform_int(rng, domain.lo, domain.hi));
        if (seen.insert(s).second) {
            seeds.push_back(s);
        }
    }
    return seeds;
}

SeedSweep seed_sweep(const Dag& dag, const std::vector<std::uint64_t>& seeds, const DataSplits& splits,
                     const nn::TrainConfig& cfg, std::size_t jobs) {
    if (seeds.empty()) {
        throw DomainError("seed sweep needs at least one seed");
    }
    std::vector<Individual> batch;
    batch.reserve(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        batch.push_back(Individual{dag, seeds[i], std::nullopt, i});
    }
    const std::vector<double> values = evaluate_all(
        batch, [&](const Individual& ind) { return evaluate_individual(ind, splits, cfg); }, jobs);

    SeedSweep sweep;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        sweep.scores.push_back({seeds[i], values[i]});
    }
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    sweep.min = sorted.front();
    sweep.max = sorted.back();
    const std::size_t n = sorted.size();
    sweep.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return sweep;
}

std::vector<std::size_t> histogram(const std::vector<double>& values, std::size_t bins) {
    if (bins == 0) {
        throw DomainError("histogram needs at least one bin");
    }
    std::vector<std::size_t> counts(bins, 0);
    if (values.empty()) {
        return counts;
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double width = (*hi_it - lo) / static_cast<double>(bins);
    for (double v : values) {
        std::size_t b = width > 0.0 ? static_cast<std::size_t>((v - lo) / width) : 0;
        ++counts[std::min(b, bins - 1)];
    }
    return counts;
}

std::string per_individual_csv(const std::vector<GenerationLog>& logs) {
    std::string out = "generation,scope,individual_id,fitness\n";
    for (const auto& log : logs) {
        for (const auto& rec : log.individuals) {
            out += std::to_string(log.generation) + "," + std::string(to_string(log.scope)) + "," +
                   std::to_string(rec.id) + "," + format_real(rec.fitness) + "\n";
        }
    }
    return out;
}

std::string summary_csv(const std::vector<GenerationLog>& logs) {
    std::string out = "generation,scope,best,mean\n";
    for (const auto& log : logs) {
        out += std::to_string(log.generation) + "," + std::string(to_string(log.scope)) + "," +
               format_real(log.best_so_far) + "," + format_real(log.mean) + "\n";
    }
    return out;
}

std::string seed_sweep_csv(const SeedSweep& sweep) {
    std::string out = "seed,mase\n";
    for (const auto& s : sweep.scores) {
        out += std::to_string(s.seed) + "," + format_real(s.mase) + "\n";
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(path, "cannot open file for writing");
    }
    out << text;
    out.flush();
    if (!out) {
        throw IoError(path, "write failed");
    }
}

void report(const std::vector<GenerationLog>& logs, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError(dir, "cannot create directory: " + ec.message());
    }
    const std::filesystem::path base(dir);
    write_text_file((base / "per_individual.csv").string(), per_individual_csv(logs));
    write_text_file((base / "summary.csv").string(), summary_csv(logs));
}

}  // namespace dagevo
