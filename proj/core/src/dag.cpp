#include "dagevo/dag.hpp"

#include <algorithm>
#include <deque>

#include "json_codec.hpp"

namespace dagevo {

bool AdjacencyMatrix::row_empty(std::size_t i) const { return out_degree(i) == 0; }

bool AdjacencyMatrix::column_empty(std::size_t j) const { return in_degree(j) == 0; }

std::size_t AdjacencyMatrix::out_degree(std::size_t i) const {
    std::size_t n = 0;
    for (std::size_t j = 0; j < size_; ++j) {
        n += (*this)(i, j) ? 1 : 0;
    }
    return n;
}

std::size_t AdjacencyMatrix::in_degree(std::size_t j) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size_; ++i) {
        n += (*this)(i, j) ? 1 : 0;
    }
    return n;
}

std::size_t AdjacencyMatrix::edge_count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool AdjacencyMatrix::is_upper_triangular() const {
    for (std::size_t i = 0; i < size_; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            if ((*this)(i, j)) {
                return false;
            }
        }
    }
    return true;
}

void AdjacencyMatrix::insert_vertex(std::size_t pos) {
    AdjacencyMatrix grown(size_ + 1);
    auto remap = [pos](std::size_t k) { return k < pos ? k : k + 1; };
    for (std::size_t i = 0; i < size_; ++i) {
        for (std::size_t j = 0; j < size_; ++j) {
            if ((*this)(i, j)) {
                grown.set(remap(i), remap(j));
            }
        }
    }
    *this = std::move(grown);
}

void AdjacencyMatrix::erase_vertex(std::size_t pos) {
    AdjacencyMatrix shrunk(size_ - 1);
    auto remap = [pos](std::size_t k) { return k < pos ? k : k - 1; };
    for (std::size_t i = 0; i < size_; ++i) {
        for (std::size_t j = 0; j < size_; ++j) {
            if (i != pos && j != pos && (*this)(i, j)) {
                shrunk.set(remap(i), remap(j));
            }
        }
    }
    *this = std::move(shrunk);
}

Dag single_node_dag(NodeSpec node) {
    Dag dag;
    dag.hidden.push_back(std::move(node));
    dag.adj = AdjacencyMatrix(3);
    dag.adj.set(0, 1);
    dag.adj.set(1, 2);
    return dag;
}

std::string_view to_string(Rule rule) {
    switch (rule) {
        case Rule::Shape: return "shape";
        case Rule::NotUpperTriangular: return "not_upper_triangular";
        case Rule::InputHasParents: return "input_has_parents";
        case Rule::OutputHasChildren: return "output_has_children";
        case Rule::MissingInputEdge: return "missing_input_edge";
        case Rule::MissingOutputEdge: return "missing_output_edge";
        case Rule::NoChildren: return "no_children";
        case Rule::NoParents: return "no_parents";
        case Rule::Unreachable: return "unreachable";
        case Rule::NodeCount: return "node_count";
        case Rule::NodeContent: return "node_content";
    }
    return "?";
}

bool ValidationReport::has(Rule rule) const {
    return std::any_of(violations.begin(), violations.end(),
                       [rule](const Violation& v) { return v.rule == rule; });
}

namespace {

std::string vertex_name(std::size_t index, std::size_t m) {
    if (index == 0) {
        return "Input";
    }
    if (index + 1 == m) {
        return "Output";
    }
    return "v" + std::to_string(index);
}

// Breadth-first reachability following edges forward (from Input) or backward (from Output).
std::vector<bool> reach(const AdjacencyMatrix& adj, std::size_t start, bool forward) {
    const std::size_t m = adj.size();
    std::vector<bool> seen(m, false);
    std::deque<std::size_t> queue{start};
    seen[start] = true;
    while (!queue.empty()) {
        std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t w = 0; w < m; ++w) {
            bool edge = forward ? adj(u, w) : adj(w, u);
            if (edge && !seen[w]) {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    return seen;
}

const SearchSpace& key_schema() {
    static const SearchSpace space = SearchSpace::defaults();
    return space;
}

}  // namespace

ValidationReport validate(const Dag& dag) {
    ValidationReport report;
    auto add = [&report](Rule rule, std::string message, std::vector<std::size_t> indices = {}) {
        report.violations.push_back({rule, std::move(message), std::move(indices)});
    };

    const AdjacencyMatrix& adj = dag.adj;
    const std::size_t m = adj.size();
    if (dag.hidden.empty()) {
        add(Rule::Shape, "graph needs at least one hidden node");
    }
    if (m != dag.hidden.size() + 2) {
        add(Rule::Shape, "matrix size " + std::to_string(m) + " does not match " +
                             std::to_string(dag.hidden.size()) + " hidden nodes plus Input/Output");
    }
    if (m < 2) {
        return report;
    }

    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            if (adj(i, j)) {
                add(Rule::NotUpperTriangular,
                    "not upper triangular: edge " + vertex_name(i, m) + " -> " + vertex_name(j, m), {i, j});
            }
        }
    }
    if (!adj.column_empty(0)) {
        add(Rule::InputHasParents, "Input has incoming edges", {0});
    }
    if (!adj.row_empty(m - 1)) {
        add(Rule::OutputHasChildren, "Output has outgoing edges", {m - 1});
    }
    if (m >= 3) {
        if (!adj(0, 1)) {
            add(Rule::MissingInputEdge, "missing mandatory edge Input -> v1", {0, 1});
        }
        if (!adj(m - 2, m - 1)) {
            add(Rule::MissingOutputEdge,
                "missing mandatory edge " + vertex_name(m - 2, m) + " -> Output", {m - 2, m - 1});
        }
    }
    for (std::size_t i = 0; i + 1 < m; ++i) {
        if (adj.row_empty(i)) {
            add(Rule::NoChildren, "isolated node " + vertex_name(i, m) + " (no children)", {i});
        }
    }
    for (std::size_t j = 1; j < m; ++j) {
        if (adj.column_empty(j)) {
            add(Rule::NoParents, "isolated node " + vertex_name(j, m) + " (no parents)", {j});
        }
    }
    const auto from_input = reach(adj, 0, true);
    const auto to_output = reach(adj, m - 1, false);
    for (std::size_t k = 1; k + 1 < m; ++k) {
        if (!from_input[k] || !to_output[k]) {
            add(Rule::Unreachable, "node " + vertex_name(k, m) + " is not on an Input -> Output path", {k});
        }
    }

    const SearchSpace& schema = key_schema();
    for (std::size_t k = 0; k < dag.hidden.size(); ++k) {
        const NodeSpec& node = dag.hidden[k];
        const auto& domains = schema.domains(node.kind);
        bool keys_match = node.params.size() == domains.size() &&
                          std::all_of(domains.begin(), domains.end(), [&node](const HyperDomain& d) {
                              auto it = node.params.find(d.name);
                              if (it == node.params.end()) {
                                  return false;
                              }
                              // Value type must follow the domain type.
                              return it->second.index() ==
                                     (std::holds_alternative<IntegerDomain>(d.range)  ? 0u
                                      : std::holds_alternative<FloatDomain>(d.range) ? 1u
                                                                                     : 2u);
                          });
        if (!keys_match) {
            add(Rule::NodeContent,
                "node v" + std::to_string(k + 1) + " parameters do not match kind " +
                    std::string(to_string(node.kind)),
                {k + 1});
        }
    }
    return report;
}

ValidationReport validate(const Dag& dag, const NodeBounds& bounds) {
    ValidationReport report = validate(dag);
    const std::size_t n = dag.hidden.size();
    if (n < bounds.min_nodes || n > bounds.max_nodes) {
        report.violations.push_back({Rule::NodeCount,
                                     "hidden node count " + std::to_string(n) + " outside [" +
                                         std::to_string(bounds.min_nodes) + ", " +
                                         std::to_string(bounds.max_nodes) + "]",
                                     {}});
    }
    return report;
}

Dag repair(Dag dag, Rng& rng) {
    AdjacencyMatrix& adj = dag.adj;
    const std::size_t m = adj.size();
    if (dag.hidden.empty() || m != dag.hidden.size() + 2) {
        throw ShapeError("repair: matrix size " + std::to_string(m) + " does not match " +
                         std::to_string(dag.hidden.size()) + " hidden nodes");
    }
    if (!adj.is_upper_triangular()) {
        throw ShapeError("repair: matrix is not upper triangular");
    }
    adj.set(0, 1);
    adj.set(m - 2, m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        if (adj.row_empty(i)) {
            adj.set(i, static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(i + 1),
                                                            static_cast<std::int64_t>(m - 1))));
        }
    }
    for (std::size_t j = 1; j < m; ++j) {
        if (adj.column_empty(j)) {
            adj.set(uniform_index(rng, j), j);
        }
    }
    return dag;
}

Dag random_dag(Rng& rng, const NodeBounds& bounds, const SearchSpace& space, double edge_density) {
    if (bounds.min_nodes < 1 || bounds.min_nodes > bounds.max_nodes) {
        throw DomainError("node bounds must satisfy 1 <= min_nodes <= max_nodes");
    }
    const auto n = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(bounds.min_nodes),
                                                        static_cast<std::int64_t>(bounds.max_nodes)));
    Dag dag;
    dag.hidden.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        dag.hidden.push_back(sample_node(space, rng));
    }
    const std::size_t m = n + 2;
    dag.adj = AdjacencyMatrix(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            if (bernoulli(rng, edge_density)) {
                dag.adj.set(i, j);
            }
        }
    }
    return repair(std::move(dag), rng);
}

std::vector<Reachability> paths_exist(const Dag& dag) {
    const std::size_t m = dag.adj.size();
    std::vector<Reachability> out;
    if (m == 0) {
        return out;
    }
    // Vertices are topologically ordered by index, so one sweep in each direction suffices.
    std::vector<bool> from_input(m, false);
    std::vector<bool> to_output(m, false);
    from_input[0] = true;
    for (std::size_t j = 1; j < m; ++j) {
        for (std::size_t i = 0; i < j && !from_input[j]; ++i) {
            from_input[j] = from_input[i] && dag.adj(i, j);
        }
    }
    to_output[m - 1] = true;
    for (std::size_t i = m - 1; i-- > 0;) {
        for (std::size_t j = i + 1; j < m && !to_output[i]; ++j) {
            to_output[i] = to_output[j] && dag.adj(i, j);
        }
    }
    out.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        out.push_back({k, from_input[k], to_output[k]});
    }
    return out;
}

std::string serialize(const Dag& dag) { return detail::dag_to_json(dag).dump(2); }

Dag deserialize(const std::string& text) { return detail::dag_from_json(detail::parse_json_text(text)); }

}  // namespace dagevo
