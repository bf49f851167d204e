#pragma once

/// @file autograd.hpp
/// Tape-free reverse-mode differentiation. Every op returns a Variable that
/// remembers its inputs and a closure propagating its gradient back to them;
/// `backward` walks that graph in reverse topological order. Graphs are
/// built per forward pass and released with their last Variable.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dagevo/tensor.hpp"

namespace dagevo::nn {

class Variable {
  public:
    struct Node;

    Variable() = default;
    explicit Variable(Tensor value, bool requires_grad = false);

    const Tensor& value() const;
    /// Mutable access for in-place parameter updates. Do not use on graph intermediates.
    Tensor& mutable_value();
    const Shape& shape() const { return value().shape(); }

    bool requires_grad() const;
    bool has_grad() const;
    /// Accumulated gradient; zeros if nothing was propagated yet.
    const Tensor& grad() const;
    void zero_grad();

    bool defined() const noexcept { return node_ != nullptr; }

    std::shared_ptr<Node> node_;
};

/// Seeds d(root)/d(root) = 1 and propagates gradients to every leaf that requires them.
/// `root` must hold a single element.
void backward(const Variable& root);

/// While alive, ops on this thread record no history.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

Variable add(const Variable& a, const Variable& b);
Variable sub(const Variable& a, const Variable& b);
Variable mul(const Variable& a, const Variable& b);
Variable scale(const Variable& a, double k);
/// Elementwise product with a constant tensor (no gradient to `mask`).
Variable mul_constant(const Variable& a, const Tensor& mask);

/// Affine map over the last axis: x[..., in] * weight[in, out] + bias[out].
/// `bias` may be undefined.
Variable linear(const Variable& x, const Variable& weight, const Variable& bias);

/// Zero-pads the last axis up to `channels`.
Variable pad_channels(const Variable& x, std::size_t channels);
Variable concat_channels(std::span<const Variable> inputs);
Variable slice_channels(const Variable& x, std::size_t start, std::size_t count);

/// [B, L, C] -> [B, C] at time step t.
Variable time_step(const Variable& x, std::size_t t);
/// L tensors of [B, C] -> [B, L, C].
Variable stack_time(std::span<const Variable> steps);

Variable reshape(const Variable& x, Shape shape);

Variable sigmoid(const Variable& x);
Variable tanh(const Variable& x);
Variable relu(const Variable& x);
Variable leaky_relu(const Variable& x, double slope);
Variable elu(const Variable& x, double alpha);
Variable gelu(const Variable& x);
Variable swish(const Variable& x, double beta);
/// Softmax over the last axis.
Variable softmax(const Variable& x);

/// Stride-1 temporal convolution with "same" zero padding.
/// x: [B, L, Cin], weight: [K, Cin, Cout], bias: [Cout].
Variable conv1d_same(const Variable& x, const Variable& weight, const Variable& bias);

enum class PoolMode { Max, Average };

/// Stride-1 temporal pooling keeping the time length. Average pooling counts
/// the zero padding in its window; max pooling looks at in-range steps only.
Variable pool1d_same(const Variable& x, std::size_t window, PoolMode mode);

/// Multi-head scaled dot-product self-attention over time with an additive
/// per-head relative-offset bias. q, k, v: [B, L, C]; rel_bias: [H, 2L-1],
/// indexed by (key - query) + L - 1. C must be a multiple of `heads`.
Variable attention(const Variable& q, const Variable& k, const Variable& v, const Variable& rel_bias,
                   std::size_t heads);

/// Mean absolute error against a constant target; subgradient 0 at a tie.
Variable mean_abs_error(const Variable& prediction, const Tensor& target);

}  // namespace dagevo::nn
