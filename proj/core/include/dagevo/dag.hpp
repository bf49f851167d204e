#pragma once

/// @file dag.hpp
/// The DAG genome: an ordered list of hidden nodes plus a strictly upper
/// triangular adjacency matrix whose first row/column is the virtual Input
/// and whose last row/column is the virtual Output.
///
/// A legal matrix of size m satisfies
///   - bits(i, j) implies i < j,
///   - bits(0, 1) and bits(m-2, m-1) are set,
///   - every row i < m-1 and every column j > 0 holds at least one edge.
/// Together with triangularity these put every hidden node on an
/// Input -> Output path.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dagevo/random.hpp"
#include "dagevo/search_space.hpp"

namespace dagevo {

class AdjacencyMatrix {
  public:
    AdjacencyMatrix() = default;
    explicit AdjacencyMatrix(std::size_t size) : size_(size), bits_(size * size, 0) {}

    std::size_t size() const noexcept { return size_; }

    bool operator()(std::size_t i, std::size_t j) const { return bits_[i * size_ + j] != 0; }
    void set(std::size_t i, std::size_t j, bool value = true) { bits_[i * size_ + j] = value ? 1 : 0; }

    bool row_empty(std::size_t i) const;
    bool column_empty(std::size_t j) const;
    std::size_t out_degree(std::size_t i) const;
    std::size_t in_degree(std::size_t j) const;
    std::size_t edge_count() const;
    bool is_upper_triangular() const;

    /// Inserts an empty row and column so that the new vertex has index `pos`.
    void insert_vertex(std::size_t pos);
    void erase_vertex(std::size_t pos);

    bool operator==(const AdjacencyMatrix&) const = default;

  private:
    std::size_t size_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct Dag {
    std::vector<NodeSpec> hidden;
    AdjacencyMatrix adj;

    /// Matrix size, i.e. hidden nodes plus Input and Output.
    std::size_t size() const noexcept { return adj.size(); }

    bool operator==(const Dag&) const = default;
};

/// Builds the forced minimal graph Input -> v1 -> Output.
Dag single_node_dag(NodeSpec node);

struct NodeBounds {
    std::size_t min_nodes = 1;
    std::size_t max_nodes = 10;
};

enum class Rule {
    Shape,
    NotUpperTriangular,
    InputHasParents,
    OutputHasChildren,
    MissingInputEdge,
    MissingOutputEdge,
    NoChildren,
    NoParents,
    Unreachable,
    NodeCount,
    NodeContent,
};

std::string_view to_string(Rule rule);

struct Violation {
    Rule rule;
    std::string message;
    std::vector<std::size_t> indices;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
    bool has(Rule rule) const;
};

/// Reports every broken structural invariant. Node contents are checked for
/// the kind -> parameter-key schema only.
ValidationReport validate(const Dag& dag);

/// As above, and also checks the hidden node count against `bounds`.
ValidationReport validate(const Dag& dag, const NodeBounds& bounds);

/// Makes `dag` legal by adding the fewest random edges: one uniformly drawn
/// child for every childless vertex, one uniformly drawn parent for every
/// parentless vertex, and the two mandatory boundary edges. Legal graphs are
/// returned unchanged and consume no randomness.
/// Throws ShapeError if the matrix is not square of size |hidden|+2 or not
/// upper triangular.
Dag repair(Dag dag, Rng& rng);

/// Random genome: node count uniform in bounds, every optional upper
/// triangular cell set with probability `edge_density`, then repaired.
Dag random_dag(Rng& rng, const NodeBounds& bounds, const SearchSpace& space,
               double edge_density = 0.3);

struct Reachability {
    std::size_t index;
    bool reaches_input;
    bool reaches_output;
};

/// One entry per matrix vertex (Input and Output included).
std::vector<Reachability> paths_exist(const Dag& dag);

/// JSON text with fields `format_version`, `nodes` and `matrix`.
std::string serialize(const Dag& dag);

/// Throws ParseError naming the offending field (and line for JSON syntax errors).
Dag deserialize(const std::string& text);

}  // namespace dagevo
