#include "dagevo/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "dagevo/errors.hpp"
#include "dagevo/random.hpp"

namespace dagevo {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return cells;
}

bool is_missing(std::string_view cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

}  // namespace

Dataset parse_csv(std::string_view text, const CsvOptions& options) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        lines.push_back(line);
        if (nl == std::string_view::npos) {
            break;
        }
        start = nl + 1;
    }
    while (!lines.empty() && trim(lines.back()).empty()) {
        lines.pop_back();
    }
    if (lines.empty()) {
        throw ParseError("empty CSV", "header", 1);
    }
    std::string_view header_line = lines[0];
    if (header_line.starts_with("\xEF\xBB\xBF")) {
        header_line.remove_prefix(3);
    }
    const auto header = split_commas(header_line);
    std::size_t first_column = 0;
    if (!header.empty() && header[0] == "timestamp") {
        first_column = 1;
    }
    if (header.size() <= first_column) {
        throw ParseError("no numeric columns", "header", 1);
    }

    Dataset ds;
    ds.name = options.name;
    ds.frequency = options.frequency;
    std::vector<bool> is_feature(header.size(), false);
    for (const auto& f : options.feature_columns) {
        auto it = std::find(header.begin(), header.end(), f);
        if (it == header.end() || it - header.begin() < static_cast<std::ptrdiff_t>(first_column)) {
            throw ParseError("feature column '" + f + "' not found", f, 1);
        }
        is_feature[static_cast<std::size_t>(it - header.begin())] = true;
    }
    for (std::size_t c = first_column; c < header.size(); ++c) {
        (is_feature[c] ? ds.feature_names : ds.target_names).emplace_back(header[c]);
    }
    if (ds.target_names.empty()) {
        throw ParseError("no target columns left after removing features", "header", 1);
    }

    const std::size_t rows = lines.size() - 1;
    std::vector<double> y;
    std::vector<double> x;
    y.reserve(rows * ds.target_names.size());
    x.reserve(rows * ds.feature_names.size());
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split_commas(lines[r]);
        if (cells.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " cells, found " +
                                 std::to_string(cells.size()),
                             "row " + std::to_string(r), r + 1);
        }
        for (std::size_t c = first_column; c < header.size(); ++c) {
            std::string_view cell = cells[c];
            if (is_missing(cell)) {
                throw MissingValueError(r, c + 1);
            }
            double value = 0.0;
            auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc() || end != cell.data() + cell.size() || !std::isfinite(value)) {
                throw ParseError("non-numeric cell at row " + std::to_string(r) + ", column " +
                                     std::to_string(c + 1) + ": '" + std::string(cell) + "'",
                                 std::string(header[c]), r + 1);
            }
            (is_feature[c] ? x : y).push_back(value);
        }
    }
    ds.y = Tensor({rows, ds.target_names.size()}, std::move(y));
    if (!ds.feature_names.empty()) {
        ds.x = Tensor({rows, ds.feature_names.size()}, std::move(x));
    }
    ds.lag = options.lag;
    ds.horizon = options.horizon;
    if ((options.lag > 0 || options.horizon > 0) && rows <= options.lag + options.horizon) {
        throw InsufficientDataError("dataset shorter than lag + horizon", options.lag + options.horizon + 1, rows);
    }
    return ds;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path, "cannot open file");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    CsvOptions opts = options;
    if (opts.name.empty()) {
        opts.name = path;
    }
    return parse_csv(buffer.str(), opts);
}

std::string to_csv(const Dataset& dataset) {
    std::string out;
    const std::size_t n = dataset.series();
    const std::size_t f = dataset.features();
    for (std::size_t c = 0; c < n; ++c) {
        out += (c > 0 ? "," : "");
        out += c < dataset.target_names.size() ? dataset.target_names[c] : "y" + std::to_string(c);
    }
    for (std::size_t c = 0; c < f; ++c) {
        out += ",";
        out += c < dataset.feature_names.size() ? dataset.feature_names[c] : "x" + std::to_string(c);
    }
    out += "\n";
    for (std::size_t t = 0; t < dataset.length(); ++t) {
        for (std::size_t c = 0; c < n; ++c) {
            out += (c > 0 ? "," : "");
            out += format_double(dataset.y[t * n + c]);
        }
        for (std::size_t c = 0; c < f; ++c) {
            out += ",";
            out += format_double((*dataset.x)[t * f + c]);
        }
        out += "\n";
    }
    return out;
}

void write_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(path, "cannot open file for writing");
    }
    out << to_csv(dataset);
    if (!out) {
        throw IoError(path, "write failed");
    }
}

std::optional<SynthKind> parse_synth_kind(std::string_view s) {
    if (s == "sine") {
        return SynthKind::Sine;
    }
    if (s == "ar1") {
        return SynthKind::Ar1;
    }
    if (s == "trend_noise") {
        return SynthKind::TrendNoise;
    }
    return std::nullopt;
}

std::string_view to_string(SynthKind kind) {
    switch (kind) {
        case SynthKind::Sine: return "sine";
        case SynthKind::Ar1: return "ar1";
        case SynthKind::TrendNoise: return "trend_noise";
    }
    return "?";
}

Dataset synth(SynthKind kind, const SynthParams& params, std::size_t length, std::uint64_t seed) {
    if (length < 16) {
        throw DomainError("synthetic series need at least 16 steps");
    }
    if (kind == SynthKind::Ar1 && std::abs(params.phi) >= 1.0) {
        throw DomainError("ar1 needs |phi| < 1");
    }
    if (kind == SynthKind::Sine && !(params.period > 0)) {
        throw DomainError("sine needs a positive period");
    }
    if (params.noise < 0) {
        throw DomainError("noise sigma must be nonnegative");
    }
    Rng rng = make_rng(seed, 0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> y(length);
    double prev = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
        const double eps = params.noise > 0 ? params.noise * gauss(rng) : 0.0;
        const double td = static_cast<double>(t);
        switch (kind) {
            case SynthKind::Sine:
                y[t] = params.amplitude * std::sin(2.0 * std::numbers::pi * td / params.period) + eps;
                break;
            case SynthKind::Ar1:
                y[t] = params.phi * prev + eps;
                prev = y[t];
                break;
            case SynthKind::TrendNoise:
                y[t] = params.slope * td + eps;
                break;
        }
    }
    Dataset ds;
    ds.name = std::string(to_string(kind));
    ds.y = Tensor({length, 1}, std::move(y));
    ds.target_names = {"y"};
    return ds;
}

}  // namespace dagevo
