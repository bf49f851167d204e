#include "dagevo/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dagevo/errors.hpp"

namespace dagevo::nn {

namespace {

// Bias peak for convolution-style attention initialization.
constexpr double kConvolutionPeak = 8.0;

std::vector<std::size_t> parents_of(const Dag& dag, std::size_t vertex) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < vertex; ++i) {
        if (dag.adj(i, vertex)) {
            out.push_back(i);
        }
    }
    return out;
}

std::size_t round_up(std::size_t value, std::size_t multiple) {
    return (value + multiple - 1) / multiple * multiple;
}

std::size_t recurrent_gates(const std::string& cell) {
    if (cell == "lstm") {
        return 4;
    }
    if (cell == "gru") {
        return 3;
    }
    return 1;
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) {
        v = uniform_real(rng, -bound, bound);
    }
    return t;
}

double fan_in_bound(std::size_t fan_in) { return std::sqrt(1.0 / static_cast<double>(std::max<std::size_t>(1, fan_in))); }

}  // namespace

std::vector<NodeShape> infer_shapes(const Dag& dag, InputShape input) {
    if (input.time == 0 || input.channels == 0) {
        throw ShapeError("input shape must have positive time length and channel count");
    }
    const std::size_t m = dag.size();
    std::vector<std::size_t> out_channels(m, 0);
    out_channels[0] = input.channels;
    std::vector<NodeShape> shapes(dag.hidden.size());
    for (std::size_t v = 1; v + 1 < m; ++v) {
        const NodeSpec& node = dag.hidden[v - 1];
        const auto parents = parents_of(dag, v);
        if (parents.empty()) {
            throw ShapeError("node v" + std::to_string(v) + " has no parents");
        }
        std::size_t combined = 0;
        for (std::size_t p : parents) {
            combined = node.combiner == Combiner::Concat ? combined + out_channels[p]
                                                         : std::max(combined, out_channels[p]);
        }
        NodeShape& s = shapes[v - 1];
        s.combined_channels = combined;
        s.layer_channels = combined;
        switch (node.kind) {
            case LayerKind::Attention:
                s.layer_channels = round_up(combined, static_cast<std::size_t>(node.int_param(param::kHeads)));
                s.out_channels = s.layer_channels;
                break;
            case LayerKind::Dense:
            case LayerKind::Recurrence:
                s.out_channels = static_cast<std::size_t>(node.int_param(param::kOutputUnits));
                break;
            default:
                // Conv1D and Pooling slide over time with "same" padding, so a
                // kernel longer than the window is absorbed by the padding.
                s.out_channels = s.layer_channels;
                break;
        }
        if (s.out_channels == 0 || s.layer_channels == 0) {
            throw ShapeError("node v" + std::to_string(v) + " has a non-positive channel count");
        }
        out_channels[v] = s.out_channels;
    }
    return shapes;
}

std::size_t head_channels(const Dag& dag, const std::vector<NodeShape>& shapes, InputShape input) {
    std::size_t total = 0;
    for (std::size_t p : parents_of(dag, dag.size() - 1)) {
        total += p == 0 ? input.channels : shapes[p - 1].out_channels;
    }
    return total;
}

Variable combine(std::span<const Variable> inputs, Combiner combiner) {
    if (inputs.empty()) {
        throw ShapeError("combine: no inputs");
    }
    if (inputs.size() == 1) {
        return inputs[0];
    }
    Shape lead = inputs[0].shape();
    lead.pop_back();
    for (const auto& v : inputs) {
        Shape l = v.shape();
        l.pop_back();
        if (l != lead) {
            throw ShapeError("combine: inputs disagree on (batch, time)");
        }
    }
    if (combiner == Combiner::Concat) {
        return concat_channels(inputs);
    }
    std::size_t width = 0;
    for (const auto& v : inputs) {
        width = std::max(width, v.shape().back());
    }
    Variable acc = pad_channels(inputs[0], width);
    for (std::size_t k = 1; k < inputs.size(); ++k) {
        Variable next = pad_channels(inputs[k], width);
        acc = combiner == Combiner::Add ? add(acc, next) : mul(acc, next);
    }
    return acc;
}

Variable activate(const Variable& x, Activation activation) {
    switch (activation) {
        case Activation::Id: return x;
        case Activation::Sigmoid: return sigmoid(x);
        case Activation::Swish: return swish(x, kSwishBeta);
        case Activation::ReLU: return relu(x);
        case Activation::LeakyReLU: return leaky_relu(x, kLeakySlope);
        case Activation::ELU: return elu(x, kEluAlpha);
        case Activation::GELU: return gelu(x);
        case Activation::Softmax: return softmax(x);
    }
    return x;
}

Network Network::build(const Dag& dag, InputShape input, OutputShape output, std::uint64_t seed) {
    if (output.horizon == 0 || output.series == 0) {
        throw ShapeError("output shape must be positive");
    }
    Network net;
    net.dag_ = dag;
    net.input_ = input;
    net.output_ = output;
    net.shapes_ = infer_shapes(dag, input);
    const std::size_t m = dag.size();
    net.compiled_.resize(m);

    Rng rng = make_rng(seed, 0);
    auto add_param = [&net](std::size_t vertex, std::string name, Tensor value) {
        net.params_.push_back({vertex, std::move(name), Variable(std::move(value), true)});
    };

    for (std::size_t v = 1; v + 1 < m; ++v) {
        const NodeSpec& node = dag.hidden[v - 1];
        const NodeShape& s = net.shapes_[v - 1];
        const std::size_t c = s.layer_channels;
        net.compiled_[v].first_param = net.params_.size();
        switch (node.kind) {
            case LayerKind::Dense: {
                const double bound = fan_in_bound(c);
                add_param(v, "weight", uniform_tensor({c, s.out_channels}, bound, rng));
                add_param(v, "bias", uniform_tensor({s.out_channels}, bound, rng));
                break;
            }
            case LayerKind::Conv1D: {
                const auto k = static_cast<std::size_t>(node.int_param(param::kKernelSize));
                const double bound = fan_in_bound(k * c);
                add_param(v, "weight", uniform_tensor({k, c, c}, bound, rng));
                add_param(v, "bias", uniform_tensor({c}, bound, rng));
                break;
            }
            case LayerKind::Recurrence: {
                const std::size_t h = s.out_channels;
                const std::size_t gates = recurrent_gates(node.categorical_param(param::kCell));
                add_param(v, "input_weight", uniform_tensor({c, gates * h}, fan_in_bound(c), rng));
                add_param(v, "hidden_weight", uniform_tensor({h, gates * h}, fan_in_bound(h), rng));
                Tensor bias = uniform_tensor({gates * h}, fan_in_bound(h), rng);
                if (gates == 4) {
                    // Gate order is input, forget, cell, output.
                    std::fill_n(bias.data() + h, h, 1.0);
                }
                add_param(v, "bias", std::move(bias));
                break;
            }
            case LayerKind::Attention: {
                const auto heads = static_cast<std::size_t>(node.int_param(param::kHeads));
                const double bound = fan_in_bound(c);
                const bool convolution = node.categorical_param(param::kInitType) == "convolution";
                Tensor wq = uniform_tensor({c, c}, bound, rng);
                if (convolution) {
                    wq.fill(0.0);
                }
                add_param(v, "query_weight", std::move(wq));
                add_param(v, "key_weight", uniform_tensor({c, c}, bound, rng));
                add_param(v, "value_weight", uniform_tensor({c, c}, bound, rng));
                add_param(v, "output_weight", uniform_tensor({c, c}, bound, rng));
                add_param(v, "output_bias", uniform_tensor({c}, bound, rng));
                const std::size_t offsets = 2 * input.time - 1;
                Tensor rel = uniform_tensor({heads, offsets}, bound, rng);
                if (convolution) {
                    // Head h attends to relative offset h - heads/2, like one tap of a kernel.
                    rel.fill(0.0);
                    for (std::size_t hd = 0; hd < heads; ++hd) {
                        const auto shift = static_cast<std::ptrdiff_t>(hd) - static_cast<std::ptrdiff_t>(heads / 2);
                        const std::ptrdiff_t col = shift + static_cast<std::ptrdiff_t>(input.time) - 1;
                        if (col >= 0 && col < static_cast<std::ptrdiff_t>(offsets)) {
                            rel[hd * offsets + static_cast<std::size_t>(col)] = kConvolutionPeak;
                        }
                    }
                }
                add_param(v, "relative_bias", std::move(rel));
                break;
            }
            default:
                break;
        }
        net.compiled_[v].param_count = net.params_.size() - net.compiled_[v].first_param;
    }

    const std::size_t flat = input.time * head_channels(dag, net.shapes_, input);
    const std::size_t targets = output.horizon * output.series;
    net.compiled_[m - 1].first_param = net.params_.size();
    const double bound = fan_in_bound(flat);
    add_param(m - 1, "weight", uniform_tensor({flat, targets}, bound, rng));
    add_param(m - 1, "bias", uniform_tensor({targets}, bound, rng));
    net.compiled_[m - 1].param_count = 2;
    return net;
}

Network::Network(const Network& other)
    : dag_(other.dag_),
      input_(other.input_),
      output_(other.output_),
      shapes_(other.shapes_),
      compiled_(other.compiled_) {
    params_.reserve(other.params_.size());
    for (const auto& p : other.params_) {
        params_.push_back({p.vertex, p.name, Variable(p.var.value(), true)});
    }
}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        Network copy(other);
        *this = std::move(copy);
    }
    return *this;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) {
        n += p.var.value().size();
    }
    return n;
}

const Variable& Network::param(std::size_t vertex, std::size_t k) const {
    return params_[compiled_[vertex].first_param + k].var;
}

Variable Network::run_node(std::size_t vertex, const Variable& x, Mode mode, Rng* dropout_rng) const {
    const NodeSpec& node = dag_.hidden[vertex - 1];
    const NodeShape& s = shapes_[vertex - 1];
    switch (node.kind) {
        case LayerKind::Identity:
            return x;
        case LayerKind::Dense:
            return linear(x, param(vertex, 0), param(vertex, 1));
        case LayerKind::Conv1D:
            return conv1d_same(x, param(vertex, 0), param(vertex, 1));
        case LayerKind::Pooling: {
            const auto size = static_cast<std::size_t>(node.int_param(param::kPoolSize));
            const PoolMode pm = node.categorical_param(param::kPoolType) == "max" ? PoolMode::Max : PoolMode::Average;
            return pool1d_same(x, size, pm);
        }
        case LayerKind::Dropout: {
            if (mode == Mode::Eval) {
                return x;
            }
            if (dropout_rng == nullptr) {
                throw StateError("train-mode dropout needs a random stream");
            }
            const double rate = node.float_param(param::kRate);
            const double keep = 1.0 - rate;
            Tensor mask(x.shape());
            for (auto& v : mask.values()) {
                v = bernoulli(*dropout_rng, keep) ? 1.0 / keep : 0.0;
            }
            return mul_constant(x, mask);
        }
        case LayerKind::Recurrence: {
            const std::size_t batch = x.shape()[0];
            const std::size_t len = x.shape()[1];
            const std::size_t h = s.out_channels;
            const std::string& cell = node.categorical_param(param::kCell);
            const Variable projected = linear(x, param(vertex, 0), param(vertex, 2));
            const Variable& hidden_weight = param(vertex, 1);
            Variable state(Tensor({batch, h}, 0.0));
            Variable memory(Tensor({batch, h}, 0.0));
            std::vector<Variable> steps;
            steps.reserve(len);
            for (std::size_t t = 0; t < len; ++t) {
                const Variable xt = time_step(projected, t);
                const Variable ht = linear(state, hidden_weight, Variable());
                if (cell == "lstm") {
                    const Variable z = add(xt, ht);
                    const Variable in_gate = sigmoid(slice_channels(z, 0, h));
                    const Variable forget = sigmoid(slice_channels(z, h, h));
                    const Variable candidate = nn::tanh(slice_channels(z, 2 * h, h));
                    const Variable out_gate = sigmoid(slice_channels(z, 3 * h, h));
                    memory = add(mul(forget, memory), mul(in_gate, candidate));
                    state = mul(out_gate, nn::tanh(memory));
                } else if (cell == "gru") {
                    const Variable zr = sigmoid(add(slice_channels(xt, 0, 2 * h), slice_channels(ht, 0, 2 * h)));
                    const Variable update = slice_channels(zr, 0, h);
                    const Variable reset = slice_channels(zr, h, h);
                    const Variable candidate =
                        nn::tanh(add(slice_channels(xt, 2 * h, h), mul(reset, slice_channels(ht, 2 * h, h))));
                    // (1 - z) * n + z * h
                    state = add(candidate, mul(update, sub(state, candidate)));
                } else {
                    state = nn::tanh(add(xt, ht));
                }
                steps.push_back(state);
            }
            return stack_time(steps);
        }
        case LayerKind::Attention: {
            const auto heads = static_cast<std::size_t>(node.int_param(param::kHeads));
            const Variable q = linear(x, param(vertex, 0), Variable());
            const Variable k = linear(x, param(vertex, 1), Variable());
            const Variable v = linear(x, param(vertex, 2), Variable());
            const Variable mixed = attention(q, k, v, param(vertex, 5), heads);
            return linear(mixed, param(vertex, 3), param(vertex, 4));
        }
    }
    return x;
}

Variable Network::forward(const Variable& batch, Mode mode, Rng* dropout_rng) const {
    const Shape& s = batch.shape();
    if (s.size() != 3 || s[1] != input_.time || s[2] != input_.channels) {
        throw ShapeError("forward: batch " + shape_string(s) + " does not match input (time " +
                         std::to_string(input_.time) + ", channels " + std::to_string(input_.channels) + ")");
    }
    const std::size_t m = dag_.size();
    std::vector<Variable> outputs(m);
    outputs[0] = batch;
    for (std::size_t v = 1; v + 1 < m; ++v) {
        const NodeSpec& node = dag_.hidden[v - 1];
        std::vector<Variable> inputs;
        for (std::size_t p : parents_of(dag_, v)) {
            inputs.push_back(outputs[p]);
        }
        Variable x = combine(inputs, node.combiner);
        x = pad_channels(x, shapes_[v - 1].layer_channels);
        outputs[v] = activate(run_node(v, x, mode, dropout_rng), node.activation);
    }
    std::vector<Variable> tail;
    for (std::size_t p : parents_of(dag_, m - 1)) {
        tail.push_back(outputs[p]);
    }
    const Variable last = concat_channels(tail);
    const std::size_t b = s[0];
    const Variable flat = reshape(last, {b, last.value().size() / b});
    const Variable head = linear(flat, param(m - 1, 0), param(m - 1, 1));
    return reshape(head, {b, output_.horizon, output_.series});
}

Tensor Network::predict(const Tensor& batch) const {
    NoGradGuard guard;
    Variable out = forward(Variable(batch), Mode::Eval);
    if (!out.value().all_finite()) {
        throw NumericsError("network produced non-finite predictions");
    }
    return out.value();
}

Gradients gradients(Network& network, const Tensor& batch, const Tensor& targets, Mode mode,
                    std::uint64_t dropout_seed) {
    Rng rng = make_rng(dropout_seed, 2);
    for (auto& p : network.parameters()) {
        p.var.zero_grad();
    }
    Variable loss = mean_abs_error(network.forward(Variable(batch), mode, &rng), targets);
    if (!std::isfinite(loss.value()[0])) {
        throw NumericsError("loss is not finite");
    }
    backward(loss);
    Gradients out;
    out.loss = loss.value()[0];
    for (const auto& p : network.parameters()) {
        const Tensor& g = p.var.grad();
        if (!g.all_finite()) {
            throw NumericsError("non-finite gradient for parameter '" + p.name + "' of vertex " +
                                std::to_string(p.vertex));
        }
        out.per_parameter.push_back(g);
    }
    return out;
}

}  // namespace dagevo::nn
