#pragma once

/// @file search_space.hpp
/// Catalog of layer kinds, their hyperparameter domains, combiners and
/// activations, plus uniform sampling and neighborhood moves over them.
///
/// A node is the sequence combiner -> layer -> activation. Every layer kind
/// declares a fixed set of named hyperparameters; a NodeSpec carries exactly
/// those keys. Categorical values are stored as lowercase strings so that the
/// in-memory form and the JSON form coincide.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dagevo/errors.hpp"
#include "dagevo/random.hpp"

namespace dagevo {

enum class Combiner { Add, Mul, Concat };

enum class LayerKind { Identity, Dense, Attention, Conv1D, Recurrence, Pooling, Dropout };

enum class Activation { Id, Sigmoid, Swish, ReLU, LeakyReLU, ELU, GELU, Softmax };

inline constexpr std::array<Combiner, 3> kAllCombiners{Combiner::Add, Combiner::Mul,
                                                       Combiner::Concat};

inline constexpr std::array<LayerKind, 7> kAllLayerKinds{
    LayerKind::Identity,   LayerKind::Dense,   LayerKind::Attention, LayerKind::Conv1D,
    LayerKind::Recurrence, LayerKind::Pooling, LayerKind::Dropout};

inline constexpr std::array<Activation, 8> kAllActivations{
    Activation::Id,        Activation::Sigmoid, Activation::Swish, Activation::ReLU,
    Activation::LeakyReLU, Activation::ELU,     Activation::GELU,  Activation::Softmax};

std::string_view to_string(Combiner c);
std::string_view to_string(LayerKind k);
std::string_view to_string(Activation a);

std::optional<Combiner> parse_combiner(std::string_view s);
std::optional<LayerKind> parse_layer_kind(std::string_view s);
std::optional<Activation> parse_activation(std::string_view s);

// Hyperparameter names.
namespace param {
inline constexpr std::string_view kOutputUnits = "output_units";
inline constexpr std::string_view kInitType = "init_type";
inline constexpr std::string_view kHeads = "heads";
inline constexpr std::string_view kKernelSize = "kernel_size";
inline constexpr std::string_view kCell = "cell";
inline constexpr std::string_view kPoolSize = "pool_size";
inline constexpr std::string_view kPoolType = "pool_type";
inline constexpr std::string_view kRate = "rate";
}  // namespace param

using ParamValue = std::variant<std::int64_t, double, std::string>;
using ParamMap = std::map<std::string, ParamValue, std::less<>>;

struct CategoricalDomain {
    std::vector<std::string> choices;
};

struct IntegerDomain {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    std::int64_t radius = 1;
};

struct FloatDomain {
    double lo = 0.0;
    double hi = 0.0;
    double radius = 0.1;
};

struct HyperDomain {
    std::string name;
    std::variant<CategoricalDomain, IntegerDomain, FloatDomain> range;

    /// Throws DomainError when lo > hi, radius <= 0 or the choice list is empty.
    void check() const;
    bool contains(const ParamValue& value) const;
};

struct NodeSpec {
    Combiner combiner = Combiner::Add;
    LayerKind kind = LayerKind::Identity;
    ParamMap params;
    Activation activation = Activation::Id;

    std::int64_t int_param(std::string_view name) const;
    double float_param(std::string_view name) const;
    const std::string& categorical_param(std::string_view name) const;

    bool operator==(const NodeSpec&) const = default;
};

/// Domains for every layer kind, the seed domain, and the activation and
/// combiner lists. Immutable once built; share freely between threads.
struct SearchSpace {
    std::map<LayerKind, std::vector<HyperDomain>> layer_domains;
    IntegerDomain seed_domain;
    std::vector<LayerKind> kinds;
    std::vector<Activation> activations;
    std::vector<Combiner> combiners;

    /// Default catalog: output_units [1,64] r=8, heads [1,4] r=1,
    /// kernel_size [1,7] r=2, pool_size [2,5] r=1, dropout rate
    /// [0.01,0.9] r=0.1, seed [0, 2^31-1].
    static SearchSpace defaults();

    const std::vector<HyperDomain>& domains(LayerKind kind) const;
    const HyperDomain& domain(LayerKind kind, std::string_view name) const;

    /// Throws DomainError if an invariant of the catalog is broken.
    void check() const;
};

/// Returns the problems found in `node` against `space`; empty when the node is well formed.
std::vector<std::string> node_problems(const NodeSpec& node, const SearchSpace& space);

/// Uniform over kinds, then each declared parameter uniform over its domain,
/// combiner and activation uniform over their lists.
NodeSpec sample_node(const SearchSpace& space, Rng& rng);

/// Fresh parameters for `kind`, each drawn uniformly from its domain.
ParamMap sample_params(const SearchSpace& space, LayerKind kind, Rng& rng);

ParamValue sample_value(const HyperDomain& domain, Rng& rng);

/// Uniform over `choices` with `current` removed.
template <typename T>
T neighbor_categorical(const T& current, std::span<const T> choices, Rng& rng) {
    if (choices.size() < 2) {
        throw DomainError("categorical neighborhood needs at least two choices");
    }
    std::vector<T> others;
    others.reserve(choices.size());
    bool found = false;
    for (const T& c : choices) {
        if (c == current) {
            found = true;
        } else {
            others.push_back(c);
        }
    }
    if (!found) {
        throw DomainError("current value is not one of the choices");
    }
    return others[uniform_index(rng, others.size())];
}

/// Uniform over [max(lo, c-r), min(hi, c+r)] without c.
std::int64_t neighbor_integer(std::int64_t current, const IntegerDomain& domain, Rng& rng);

/// Uniform over [max(lo, c-r), min(hi, c+r)].
double neighbor_float(double current, const FloatDomain& domain, Rng& rng);

/// Dispatches on the domain type.
ParamValue neighbor_value(const ParamValue& current, const HyperDomain& domain, Rng& rng);

}  // namespace dagevo
