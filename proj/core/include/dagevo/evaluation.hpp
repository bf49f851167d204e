#pragma once

/// @file evaluation.hpp
/// Windowing, chronological splits, the MASE metric and the train-then-score
/// pipeline that turns an individual into a fitness value.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dagevo/data_io.hpp"
#include "dagevo/evolution.hpp"
#include "dagevo/network.hpp"
#include "dagevo/tensor.hpp"
#include "dagevo/training.hpp"

namespace dagevo {

/// Mean absolute scaled error of [n, N] matrices:
///   (n-1)/n * sum_t |y_t - yhat_t| / sum_{t>=2} |y_t - y_{t-1}|
/// per column, then averaged over columns.
/// Throws ShapeError on mismatched shapes, DomainError for n < 2 and
/// DegenerateSeriesError when a column of `y_true` is constant.
double mase(const Tensor& y_true, const Tensor& y_pred);

enum class SplitRole { Train, Valid, Test };

std::string_view to_string(SplitRole role);

/// Per-channel affine map fitted on the training range.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;  ///< standard deviation, 1 where it vanishes

    double forward(double v, std::size_t channel) const { return (v - mean[channel]) / scale[channel]; }
    double inverse(double v, std::size_t channel) const { return v * scale[channel] + mean[channel]; }
};

struct WindowSet {
    SplitRole role = SplitRole::Train;
    Tensor inputs;        ///< [W, lag, C] standardized
    Tensor targets;       ///< [W, horizon, N] standardized
    Tensor raw_targets;   ///< [W, horizon, N] original scale
    Tensor last_observed; ///< [W, N] original scale, last input step of each window
    std::vector<std::size_t> starts;  ///< first time index of each input window
    std::size_t range_begin = 0;      ///< time range [begin, end) of the split
    std::size_t range_end = 0;

    std::size_t size() const noexcept { return starts.size(); }
};

struct SplitOptions {
    double valid_fraction = 0.15;
    double test_fraction = 0.15;
    /// Accept a validation or test split too short to hold a single window.
    bool allow_empty_valid = false;
    bool allow_empty_test = false;
};

struct DataSplits {
    WindowSet train;
    WindowSet valid;
    WindowSet test;
    Standardizer scaler;
    std::size_t lag = 0;
    std::size_t horizon = 0;
    nn::InputShape input_shape;
    nn::OutputShape output_shape;

    const WindowSet& get(SplitRole role) const;
};

/// Chronological split with llround'ed valid/test lengths, then stride-1
/// windows kept entirely inside their split. Input channels are the target
/// series followed by the feature columns.
/// Throws InsufficientDataError when a split cannot hold one window (unless
/// allowed to be empty) and DomainError for bad fractions or zero lag/horizon.
DataSplits split_and_window(const Dataset& dataset, std::size_t lag, std::size_t horizon,
                            const SplitOptions& options = {});

/// Flattens [W, horizon, N] into [W * horizon, N], windows in order.
Tensor concat_windows(const Tensor& windows);

/// Repeats each window's last observed value over the horizon, [W, horizon, N].
Tensor naive_forecast(const WindowSet& set);

/// MASE of the naive forecast on a split.
double naive_mase(const DataSplits& splits, SplitRole role);

/// Network forecast on a split, mapped back to the original scale, [W, horizon, N].
Tensor forecast(const nn::Network& network, const DataSplits& splits, SplitRole role);

/// MASE of a trained network on a split. Throws NumericsError if the forecast is not finite.
double score(const nn::Network& network, const DataSplits& splits, SplitRole role);

struct TrainedModel {
    nn::Network network;
    nn::TrainResult train;
};

/// Builds the network from (dag, seed) and trains it on the training windows
/// with the same seed driving shuffling and dropout.
TrainedModel train_model(const Dag& dag, std::uint64_t seed, const DataSplits& splits, nn::TrainConfig cfg);

/// Validation MASE after training; kFailedFitness when training diverges.
double evaluate_individual(const Individual& ind, const DataSplits& splits, const nn::TrainConfig& cfg);

/// Same protocol, scored on the test split.
double final_test(const Individual& best, const DataSplits& splits, const nn::TrainConfig& cfg);

}  // namespace dagevo
