#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dagevo/network.hpp"
#include "dagevo/tensor.hpp"

namespace dagevo::nn {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 0.01;
    double clip_norm = 5.0;
    std::uint64_t seed = 0;

    /// Throws DomainError unless batch size, learning rate and clip norm are positive.
    void check() const;
};

struct TrainResult {
    /// Eval-mode MAE over all training windows after the last epoch.
    double final_loss = 0.0;
    /// Mean train-mode batch loss of each epoch.
    std::vector<double> epoch_losses;
    /// Set when the loss or a weight became non-finite; training stops there.
    bool failed = false;
};

/// Plain mini-batch SGD on the MAE with global gradient-norm clipping.
/// inputs: [W, time, channels], targets: [W, horizon, series]. The shuffle
/// order and dropout masks come from streams derived from `cfg.seed`.
TrainResult sgd_train(Network& network, const Tensor& inputs, const Tensor& targets, const TrainConfig& cfg);

/// Eval-mode MAE over a window set, computed in chunks of `chunk` windows.
double mean_abs_error(const Network& network, const Tensor& inputs, const Tensor& targets,
                      std::size_t chunk = 256);

/// Rows [first, first + count) of a tensor along axis 0.
Tensor take_rows(const Tensor& t, std::size_t first, std::size_t count);
Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows);

}  // namespace dagevo::nn
