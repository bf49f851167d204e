#include "dagevo/search_space.hpp"

#include <algorithm>
#include <cmath>

namespace dagevo {

std::string_view to_string(Combiner c) {
    switch (c) {
        case Combiner::Add: return "add";
        case Combiner::Mul: return "mul";
        case Combiner::Concat: return "concat";
    }
    return "?";
}

std::string_view to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Identity: return "identity";
        case LayerKind::Dense: return "dense";
        case LayerKind::Attention: return "attention";
        case LayerKind::Conv1D: return "conv1d";
        case LayerKind::Recurrence: return "recurrence";
        case LayerKind::Pooling: return "pooling";
        case LayerKind::Dropout: return "dropout";
    }
    return "?";
}

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Id: return "id";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Swish: return "swish";
        case Activation::ReLU: return "relu";
        case Activation::LeakyReLU: return "leaky_relu";
        case Activation::ELU: return "elu";
        case Activation::GELU: return "gelu";
        case Activation::Softmax: return "softmax";
    }
    return "?";
}

namespace {

template <typename T, std::size_t N>
std::optional<T> parse_enum(std::string_view s, const std::array<T, N>& all) {
    for (T v : all) {
        if (to_string(v) == s) {
            return v;
        }
    }
    return std::nullopt;
}

}  // namespace

std::optional<Combiner> parse_combiner(std::string_view s) { return parse_enum(s, kAllCombiners); }
std::optional<LayerKind> parse_layer_kind(std::string_view s) { return parse_enum(s, kAllLayerKinds); }
std::optional<Activation> parse_activation(std::string_view s) { return parse_enum(s, kAllActivations); }

void HyperDomain::check() const {
    std::visit(
        [this](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, CategoricalDomain>) {
                if (d.choices.empty()) {
                    throw DomainError("domain '" + name + "' has no choices");
                }
            } else {
                if (d.lo > d.hi) {
                    throw DomainError("domain '" + name + "' has lo > hi");
                }
                if (!(d.radius > 0)) {
                    throw DomainError("domain '" + name + "' needs a positive neighbor radius");
                }
            }
        },
        range);
}

bool HyperDomain::contains(const ParamValue& value) const {
    return std::visit(
        [&value](const auto& d) -> bool {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, CategoricalDomain>) {
                const auto* s = std::get_if<std::string>(&value);
                return s != nullptr && std::find(d.choices.begin(), d.choices.end(), *s) != d.choices.end();
            } else if constexpr (std::is_same_v<D, IntegerDomain>) {
                const auto* v = std::get_if<std::int64_t>(&value);
                return v != nullptr && *v >= d.lo && *v <= d.hi;
            } else {
                const auto* v = std::get_if<double>(&value);
                return v != nullptr && std::isfinite(*v) && *v >= d.lo && *v <= d.hi;
            }
        },
        range);
}

namespace {

const ParamValue& lookup(const ParamMap& params, std::string_view name) {
    auto it = params.find(name);
    if (it == params.end()) {
        throw DomainError("node has no parameter '" + std::string(name) + "'");
    }
    return it->second;
}

}  // namespace

std::int64_t NodeSpec::int_param(std::string_view name) const {
    const auto* v = std::get_if<std::int64_t>(&lookup(params, name));
    if (v == nullptr) {
        throw DomainError("parameter '" + std::string(name) + "' is not an integer");
    }
    return *v;
}

double NodeSpec::float_param(std::string_view name) const {
    const auto* v = std::get_if<double>(&lookup(params, name));
    if (v == nullptr) {
        throw DomainError("parameter '" + std::string(name) + "' is not a float");
    }
    return *v;
}

const std::string& NodeSpec::categorical_param(std::string_view name) const {
    const auto* v = std::get_if<std::string>(&lookup(params, name));
    if (v == nullptr) {
        throw DomainError("parameter '" + std::string(name) + "' is not categorical");
    }
    return *v;
}

SearchSpace SearchSpace::defaults() {
    SearchSpace s;
    auto integer = [](std::string_view n, std::int64_t lo, std::int64_t hi, std::int64_t r) {
        return HyperDomain{std::string(n), IntegerDomain{lo, hi, r}};
    };
    auto categorical = [](std::string_view n, std::vector<std::string> choices) {
        return HyperDomain{std::string(n), CategoricalDomain{std::move(choices)}};
    };
    s.layer_domains[LayerKind::Identity] = {};
    s.layer_domains[LayerKind::Dense] = {integer(param::kOutputUnits, 1, 64, 8)};
    s.layer_domains[LayerKind::Attention] = {categorical(param::kInitType, {"convolution", "random"}),
                                             integer(param::kHeads, 1, 4, 1)};
    s.layer_domains[LayerKind::Conv1D] = {integer(param::kKernelSize, 1, 7, 2)};
    s.layer_domains[LayerKind::Recurrence] = {integer(param::kOutputUnits, 1, 64, 8),
                                              categorical(param::kCell, {"lstm", "gru", "rnn"})};
    s.layer_domains[LayerKind::Pooling] = {integer(param::kPoolSize, 2, 5, 1),
                                           categorical(param::kPoolType, {"max", "average"})};
    s.layer_domains[LayerKind::Dropout] = {
        HyperDomain{std::string(param::kRate), FloatDomain{0.01, 0.9, 0.1}}};
    s.seed_domain = IntegerDomain{0, 2147483647, 1};
    s.kinds.assign(kAllLayerKinds.begin(), kAllLayerKinds.end());
    s.activations.assign(kAllActivations.begin(), kAllActivations.end());
    s.combiners.assign(kAllCombiners.begin(), kAllCombiners.end());
    return s;
}

const std::vector<HyperDomain>& SearchSpace::domains(LayerKind kind) const {
    auto it = layer_domains.find(kind);
    if (it == layer_domains.end()) {
        throw DomainError("search space has no entry for layer kind " + std::string(to_string(kind)));
    }
    return it->second;
}

const HyperDomain& SearchSpace::domain(LayerKind kind, std::string_view name) const {
    for (const auto& d : domains(kind)) {
        if (d.name == name) {
            return d;
        }
    }
    throw DomainError("layer kind " + std::string(to_string(kind)) + " has no parameter '" +
                      std::string(name) + "'");
}

void SearchSpace::check() const {
    for (LayerKind k : kAllLayerKinds) {
        for (const auto& d : domains(k)) {
            d.check();
            if (const auto* f = std::get_if<FloatDomain>(&d.range);
                f != nullptr && k == LayerKind::Dropout && (f->lo <= 0.0 || f->hi >= 1.0)) {
                throw DomainError("dropout rate domain must lie inside (0, 1)");
            }
        }
    }
    if (seed_domain.lo > seed_domain.hi) {
        throw DomainError("seed domain is empty");
    }
    if (kinds.empty() || activations.empty() || combiners.empty()) {
        throw DomainError("kind, activation and combiner lists must be nonempty");
    }
}

std::vector<std::string> node_problems(const NodeSpec& node, const SearchSpace& space) {
    std::vector<std::string> problems;
    const auto& domains = space.domains(node.kind);
    for (const auto& d : domains) {
        auto it = node.params.find(d.name);
        if (it == node.params.end()) {
            problems.push_back("missing parameter '" + d.name + "'");
        } else if (!d.contains(it->second)) {
            problems.push_back("parameter '" + d.name + "' outside its domain");
        }
    }
    for (const auto& [name, value] : node.params) {
        bool declared = std::any_of(domains.begin(), domains.end(),
                                    [&name](const HyperDomain& d) { return d.name == name; });
        if (!declared) {
            problems.push_back("undeclared parameter '" + name + "' for kind " +
                               std::string(to_string(node.kind)));
        }
    }
    return problems;
}

ParamValue sample_value(const HyperDomain& domain, Rng& rng) {
    return std::visit(
        [&rng](const auto& d) -> ParamValue {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, CategoricalDomain>) {
                return d.choices[uniform_index(rng, d.choices.size())];
            } else if constexpr (std::is_same_v<D, IntegerDomain>) {
                return uniform_int(rng, d.lo, d.hi);
            } else {
                return uniform_real(rng, d.lo, d.hi);
            }
        },
        domain.range);
}

ParamMap sample_params(const SearchSpace& space, LayerKind kind, Rng& rng) {
    ParamMap params;
    for (const auto& d : space.domains(kind)) {
        params.emplace(d.name, sample_value(d, rng));
    }
    return params;
}

NodeSpec sample_node(const SearchSpace& space, Rng& rng) {
    NodeSpec node;
    node.kind = space.kinds[uniform_index(rng, space.kinds.size())];
    node.params = sample_params(space, node.kind, rng);
    node.combiner = space.combiners[uniform_index(rng, space.combiners.size())];
    node.activation = space.activations[uniform_index(rng, space.activations.size())];
    return node;
}

std::int64_t neighbor_integer(std::int64_t current, const IntegerDomain& domain, Rng& rng) {
    if (current < domain.lo || current > domain.hi) {
        throw DomainError("integer value outside its domain");
    }
    const std::int64_t lo = std::max(domain.lo, current - domain.radius);
    const std::int64_t hi = std::min(domain.hi, current + domain.radius);
    if (hi - lo < 1) {
        throw DomainError("integer neighborhood is empty");
    }
    // Draw among the hi-lo values other than `current`.
    std::int64_t v = uniform_int(rng, lo, hi - 1);
    if (v >= current) {
        ++v;
    }
    return v;
}

double neighbor_float(double current, const FloatDomain& domain, Rng& rng) {
    const double lo = std::max(domain.lo, current - domain.radius);
    const double hi = std::min(domain.hi, current + domain.radius);
    if (lo >= hi) {
        return std::clamp(current, domain.lo, domain.hi);
    }
    return std::clamp(uniform_real(rng, lo, hi), domain.lo, domain.hi);
}

ParamValue neighbor_value(const ParamValue& current, const HyperDomain& domain, Rng& rng) {
    return std::visit(
        [&](const auto& d) -> ParamValue {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, CategoricalDomain>) {
                return neighbor_categorical<std::string>(std::get<std::string>(current), d.choices, rng);
            } else if constexpr (std::is_same_v<D, IntegerDomain>) {
                return neighbor_integer(std::get<std::int64_t>(current), d, rng);
            } else {
                return neighbor_float(std::get<double>(current), d, rng);
            }
        },
        domain.range);
}

}  // namespace dagevo
