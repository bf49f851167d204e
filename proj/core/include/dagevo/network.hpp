#pragma once

/// @file network.hpp
/// Compiles a Dag into an executable network: shape inference, weight
/// allocation, forward execution and the fixed output head that flattens the
/// DAG output and maps it to (horizon, series).

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dagevo/autograd.hpp"
#include "dagevo/dag.hpp"
#include "dagevo/random.hpp"
#include "dagevo/tensor.hpp"

namespace dagevo::nn {

struct InputShape {
    std::size_t time = 1;
    std::size_t channels = 1;
};

struct OutputShape {
    std::size_t horizon = 1;
    std::size_t series = 1;
};

enum class Mode { Train, Eval };

/// Channel bookkeeping for one hidden node.
struct NodeShape {
    std::size_t combined_channels = 0;  ///< after the combiner
    std::size_t layer_channels = 0;     ///< after the padding guard
    std::size_t out_channels = 0;
};

/// Slope of the leaky ReLU negative part.
inline constexpr double kLeakySlope = 1e-2;
inline constexpr double kEluAlpha = 1.0;
inline constexpr double kSwishBeta = 1.0;

/// One topological pass over the hidden nodes. The time length is constant
/// through the graph. Attention pads its combined input up to a multiple of
/// its head count. Throws ShapeError for non-positive input dimensions.
std::vector<NodeShape> infer_shapes(const Dag& dag, InputShape input);

/// Channels entering the output head: the parents of Output, concatenated.
std::size_t head_channels(const Dag& dag, const std::vector<NodeShape>& shapes, InputShape input);

/// Merges parent outputs. Add/Mul zero-pad every input to the widest one;
/// Concat stacks channels. A single input passes through unchanged.
Variable combine(std::span<const Variable> inputs, Combiner combiner);

Variable activate(const Variable& x, Activation activation);

struct Parameter {
    std::size_t vertex;  ///< matrix index; size()-1 is the output head
    std::string name;
    Variable var;
};

class Network {
  public:
    /// All weights are drawn from `seed` alone.
    static Network build(const Dag& dag, InputShape input, OutputShape output, std::uint64_t seed);

    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;
    ~Network() = default;

    /// batch: [B, time, channels] -> [B, horizon, series]. `dropout_rng` is
    /// only consulted in train mode.
    Variable forward(const Variable& batch, Mode mode, Rng* dropout_rng = nullptr) const;

    /// Eval-mode prediction without gradient history. Throws NumericsError on
    /// non-finite output.
    Tensor predict(const Tensor& batch) const;

    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }
    std::size_t parameter_count() const;

    const Dag& dag() const noexcept { return dag_; }
    const std::vector<NodeShape>& shapes() const noexcept { return shapes_; }
    InputShape input_shape() const noexcept { return input_; }
    OutputShape output_shape() const noexcept { return output_; }

  private:
    Network() = default;

    struct Compiled {
        std::size_t first_param = 0;
        std::size_t param_count = 0;
    };

    Variable run_node(std::size_t vertex, const Variable& x, Mode mode, Rng* dropout_rng) const;
    const Variable& param(std::size_t vertex, std::size_t k) const;

    Dag dag_;
    InputShape input_;
    OutputShape output_;
    std::vector<NodeShape> shapes_;
    std::vector<Compiled> compiled_;  ///< indexed by matrix vertex
    std::vector<Parameter> params_;
};

struct Gradients {
    double loss = 0.0;
    std::vector<Tensor> per_parameter;  ///< aligned with Network::parameters()
};

/// Exact reverse-mode gradients of the mean absolute error. Dropout masks in
/// train mode come from `dropout_seed`. Throws NumericsError on non-finite
/// loss or gradients.
Gradients gradients(Network& network, const Tensor& batch, const Tensor& targets, Mode mode = Mode::Eval,
                    std::uint64_t dropout_seed = 0);

}  // namespace dagevo::nn
