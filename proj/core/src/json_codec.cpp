#include "json_codec.hpp"

#include <algorithm>

namespace dagevo::detail {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(
                   std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) {
        throw ParseError("missing field '" + std::string(key) + "'", where.empty() ? key : where + "." + key);
    }
    return j.at(key);
}

std::string require_string(const json& j, const char* key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_string()) {
        throw ParseError("expected a string", where + "." + key);
    }
    return v.get<std::string>();
}

const SearchSpace& catalog() {
    static const SearchSpace space = SearchSpace::defaults();
    return space;
}

}  // namespace

json node_to_json(const NodeSpec& node) {
    json params = json::object();
    for (const auto& [name, value] : node.params) {
        std::visit([&params, &name = name](const auto& v) { params[name] = v; }, value);
    }
    return json{{"combiner", to_string(node.combiner)},
                {"kind", to_string(node.kind)},
                {"params", params},
                {"activation", to_string(node.activation)}};
}

NodeSpec node_from_json(const json& j, std::size_t index) {
    const std::string where = "nodes[" + std::to_string(index) + "]";
    if (!j.is_object()) {
        throw ParseError("node must be an object", where);
    }
    NodeSpec node;
    const std::string combiner = require_string(j, "combiner", where);
    const std::string kind = require_string(j, "kind", where);
    const std::string activation = require_string(j, "activation", where);
    auto c = parse_combiner(combiner);
    auto k = parse_layer_kind(kind);
    auto a = parse_activation(activation);
    if (!c) {
        throw ParseError("unknown combiner '" + combiner + "'", where + ".combiner");
    }
    if (!k) {
        throw ParseError("unknown layer kind '" + kind + "'", where + ".kind");
    }
    if (!a) {
        throw ParseError("unknown activation '" + activation + "'", where + ".activation");
    }
    node.combiner = *c;
    node.kind = *k;
    node.activation = *a;

    const json& params = require(j, "params", where);
    if (!params.is_object()) {
        throw ParseError("params must be an object", where + ".params");
    }
    const auto& domains = catalog().domains(node.kind);
    for (const auto& [name, value] : params.items()) {
        const std::string field = where + ".params." + name;
        auto d = std::find_if(domains.begin(), domains.end(),
                              [&name = name](const HyperDomain& h) { return h.name == name; });
        if (d == domains.end()) {
            throw ParseError("parameter not declared for kind '" + kind + "'", field);
        }
        if (std::holds_alternative<IntegerDomain>(d->range)) {
            if (!value.is_number_integer()) {
                throw ParseError("expected an integer", field);
            }
            node.params.emplace(name, value.get<std::int64_t>());
        } else if (std::holds_alternative<FloatDomain>(d->range)) {
            if (!value.is_number()) {
                throw ParseError("expected a number", field);
            }
            node.params.emplace(name, value.get<double>());
        } else {
            if (!value.is_string()) {
                throw ParseError("expected a string", field);
            }
            node.params.emplace(name, value.get<std::string>());
        }
    }
    for (const auto& d : domains) {
        if (!node.params.contains(d.name)) {
            throw ParseError("missing parameter", where + ".params." + d.name);
        }
    }
    return node;
}

json dag_to_json(const Dag& dag) {
    json nodes = json::array();
    for (const auto& node : dag.hidden) {
        nodes.push_back(node_to_json(node));
    }
    json matrix = json::array();
    for (std::size_t i = 0; i < dag.adj.size(); ++i) {
        std::string row(dag.adj.size(), '0');
        for (std::size_t j = 0; j < dag.adj.size(); ++j) {
            if (dag.adj(i, j)) {
                row[j] = '1';
            }
        }
        matrix.push_back(row);
    }
    return json{{"format_version", kFormatVersion}, {"nodes", nodes}, {"matrix", matrix}};
}

Dag dag_from_json(const json& j) {
    if (!j.is_object()) {
        throw ParseError("genome must be a JSON object");
    }
    const json& version = require(j, "format_version", "");
    if (!version.is_number_integer() || version.get<int>() != kFormatVersion) {
        throw ParseError("unsupported format_version", "format_version");
    }
    const json& nodes = require(j, "nodes", "");
    if (!nodes.is_array()) {
        throw ParseError("nodes must be an array", "nodes");
    }
    Dag dag;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        dag.hidden.push_back(node_from_json(nodes[k], k));
    }

    const json& matrix = require(j, "matrix", "");
    if (!matrix.is_array()) {
        throw ParseError("matrix must be an array of strings", "matrix");
    }
    const std::size_t m = matrix.size();
    if (m != dag.hidden.size() + 2) {
        throw ParseError("matrix has " + std::to_string(m) + " rows, expected " +
                             std::to_string(dag.hidden.size() + 2),
                         "matrix");
    }
    dag.adj = AdjacencyMatrix(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::string field = "matrix[" + std::to_string(i) + "]";
        if (!matrix[i].is_string()) {
            throw ParseError("row must be a string", field);
        }
        const auto row = matrix[i].get<std::string>();
        if (row.size() != m) {
            throw ParseError("row has " + std::to_string(row.size()) + " columns, expected " +
                                 std::to_string(m),
                             field);
        }
        for (std::size_t col = 0; col < m; ++col) {
            if (row[col] == '1') {
                if (col <= i) {
                    throw ParseError("not upper triangular", field);
                }
                dag.adj.set(i, col);
            } else if (row[col] != '0') {
                throw ParseError("row may only contain '0' and '1'", field);
            }
        }
    }
    ValidationReport report = validate(dag);
    if (!report.ok()) {
        throw ParseError(report.violations.front().message, "matrix");
    }
    return dag;
}

json parse_json_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), {}, line_of_offset(text, e.byte));
    }
}

}  // namespace dagevo::detail
