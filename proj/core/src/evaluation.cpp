#include "dagevo/evaluation.hpp"

#include <cmath>

#include "dagevo/errors.hpp"

namespace dagevo {

double mase(const Tensor& y_true, const Tensor& y_pred) {
    if (y_true.shape() != y_pred.shape() || y_true.rank() != 2) {
        throw ShapeError("mase: expected two [n, N] matrices of equal shape, got " + shape_string(y_true.shape()) +
                         " and " + shape_string(y_pred.shape()));
    }
    const std::size_t n = y_true.dim(0);
    const std::size_t cols = y_true.dim(1);
    if (n < 2) {
        throw DomainError("mase needs at least two time steps");
    }
    if (cols == 0) {
        throw ShapeError("mase: no series");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            num += std::abs(y_true[t * cols + c] - y_pred[t * cols + c]);
            if (t > 0) {
                den += std::abs(y_true[t * cols + c] - y_true[(t - 1) * cols + c]);
            }
        }
        if (den == 0.0) {
            throw DegenerateSeriesError("mase: series " + std::to_string(c) + " is constant");
        }
        total += (static_cast<double>(n - 1) / static_cast<double>(n)) * (num / den);
    }
    return total / static_cast<double>(cols);
}

std::string_view to_string(SplitRole role) {
    switch (role) {
        case SplitRole::Train: return "train";
        case SplitRole::Valid: return "valid";
        case SplitRole::Test: return "test";
    }
    return "?";
}

const WindowSet& DataSplits::get(SplitRole role) const {
    switch (role) {
        case SplitRole::Train: return train;
        case SplitRole::Valid: return valid;
        case SplitRole::Test: return test;
    }
    return train;
}

namespace {

WindowSet make_windows(SplitRole role, const Tensor& channels, std::size_t series, std::size_t begin,
                       std::size_t end, std::size_t lag, std::size_t horizon, const Standardizer& scaler) {
    WindowSet set;
    set.role = role;
    set.range_begin = begin;
    set.range_end = end;
    const std::size_t c_in = channels.dim(1);
    const std::size_t len = end - begin;
    const std::size_t count = len >= lag + horizon ? len - lag - horizon + 1 : 0;
    set.inputs = Tensor({count, lag, c_in});
    set.targets = Tensor({count, horizon, series});
    set.raw_targets = Tensor({count, horizon, series});
    set.last_observed = Tensor({count, series});
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t s = begin + w;
        set.starts.push_back(s);
        for (std::size_t t = 0; t < lag; ++t) {
            for (std::size_t c = 0; c < c_in; ++c) {
                set.inputs[(w * lag + t) * c_in + c] = scaler.forward(channels[(s + t) * c_in + c], c);
            }
        }
        for (std::size_t c = 0; c < series; ++c) {
            set.last_observed[w * series + c] = channels[(s + lag - 1) * c_in + c];
        }
        for (std::size_t h = 0; h < horizon; ++h) {
            for (std::size_t c = 0; c < series; ++c) {
                const double v = channels[(s + lag + h) * c_in + c];
                set.raw_targets[(w * horizon + h) * series + c] = v;
                set.targets[(w * horizon + h) * series + c] = scaler.forward(v, c);
            }
        }
    }
    return set;
}

}  // namespace

DataSplits split_and_window(const Dataset& dataset, std::size_t lag, std::size_t horizon,
                            const SplitOptions& options) {
    if (lag == 0 || horizon == 0) {
        throw DomainError("lag and horizon must be positive");
    }
    if (!(options.valid_fraction >= 0.0) || !(options.test_fraction >= 0.0) ||
        !(options.valid_fraction + options.test_fraction < 1.0)) {
        throw DomainError("split fractions must be nonnegative and sum to less than 1");
    }
    const std::size_t T = dataset.length();
    const std::size_t N = dataset.series();
    const std::size_t F = dataset.features();
    const std::size_t C = N + F;
    const std::size_t window = lag + horizon;
    if (T < window) {
        throw InsufficientDataError("series shorter than lag + horizon", window, T);
    }

    const auto n_valid = static_cast<std::size_t>(std::llround(options.valid_fraction * static_cast<double>(T)));
    const auto n_test = static_cast<std::size_t>(std::llround(options.test_fraction * static_cast<double>(T)));
    if (n_valid + n_test >= T) {
        throw InsufficientDataError("no time steps left for training", n_valid + n_test + window, T);
    }
    const std::size_t n_train = T - n_valid - n_test;
    if (n_train < window) {
        throw InsufficientDataError("training split shorter than lag + horizon", window, n_train);
    }
    if (n_valid < window && !options.allow_empty_valid) {
        throw InsufficientDataError("validation split shorter than lag + horizon", window, n_valid);
    }
    if (n_test < window && !options.allow_empty_test) {
        throw InsufficientDataError("test split shorter than lag + horizon", window, n_test);
    }

    Tensor channels({T, C});
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t c = 0; c < N; ++c) {
            channels[t * C + c] = dataset.y[t * N + c];
        }
        for (std::size_t c = 0; c < F; ++c) {
            channels[t * C + N + c] = (*dataset.x)[t * F + c];
        }
    }

    DataSplits out;
    out.lag = lag;
    out.horizon = horizon;
    out.input_shape = {lag, C};
    out.output_shape = {horizon, N};
    out.scaler.mean.assign(C, 0.0);
    out.scaler.scale.assign(C, 1.0);
    for (std::size_t c = 0; c < C; ++c) {
        double sum = 0.0;
        for (std::size_t t = 0; t < n_train; ++t) {
            sum += channels[t * C + c];
        }
        const double mean = sum / static_cast<double>(n_train);
        double ss = 0.0;
        for (std::size_t t = 0; t < n_train; ++t) {
            const double d = channels[t * C + c] - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n_train));
        out.scaler.mean[c] = mean;
        out.scaler.scale[c] = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
    }

    out.train = make_windows(SplitRole::Train, channels, N, 0, n_train, lag, horizon, out.scaler);
    out.valid = make_windows(SplitRole::Valid, channels, N, n_train, n_train + n_valid, lag, horizon, out.scaler);
    out.test = make_windows(SplitRole::Test, channels, N, n_train + n_valid, T, lag, horizon, out.scaler);
    return out;
}

Tensor concat_windows(const Tensor& windows) {
    if (windows.rank() != 3) {
        throw ShapeError("concat_windows expects [W, horizon, N], got " + shape_string(windows.shape()));
    }
    return windows.reshaped({windows.dim(0) * windows.dim(1), windows.dim(2)});
}

Tensor naive_forecast(const WindowSet& set) {
    const std::size_t W = set.raw_targets.dim(0);
    const std::size_t H = set.raw_targets.dim(1);
    const std::size_t N = set.raw_targets.dim(2);
    Tensor out({W, H, N});
    for (std::size_t w = 0; w < W; ++w) {
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t c = 0; c < N; ++c) {
                out[(w * H + h) * N + c] = set.last_observed[w * N + c];
            }
        }
    }
    return out;
}

double naive_mase(const DataSplits& splits, SplitRole role) {
    const WindowSet& set = splits.get(role);
    if (set.size() == 0) {
        throw InsufficientDataError(std::string(to_string(role)) + " split has no windows", 1, 0);
    }
    return mase(concat_windows(set.raw_targets), concat_windows(naive_forecast(set)));
}

Tensor forecast(const nn::Network& network, const DataSplits& splits, SplitRole role) {
    const WindowSet& set = splits.get(role);
    constexpr std::size_t kChunk = 256;
    const std::size_t W = set.size();
    const std::size_t H = splits.horizon;
    const std::size_t N = splits.output_shape.series;
    Tensor out({W, H, N});
    for (std::size_t first = 0; first < W; first += kChunk) {
        const std::size_t count = std::min(kChunk, W - first);
        const Tensor pred = network.predict(nn::take_rows(set.inputs, first, count));
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const std::size_t c = i % N;
            out[first * H * N + i] = splits.scaler.inverse(pred[i], c);
        }
    }
    return out;
}

double score(const nn::Network& network, const DataSplits& splits, SplitRole role) {
    const WindowSet& set = splits.get(role);
    if (set.size() == 0) {
        throw InsufficientDataError(std::string(to_string(role)) + " split has no windows", 1, 0);
    }
    const Tensor pred = forecast(network, splits, role);
    if (!pred.all_finite()) {
        throw NumericsError("forecast is not finite");
    }
    return mase(concat_windows(set.raw_targets), concat_windows(pred));
}

TrainedModel train_model(const Dag& dag, std::uint64_t seed, const DataSplits& splits, nn::TrainConfig cfg) {
    if (splits.train.size() == 0) {
        throw InsufficientDataError("training split has no windows", 1, 0);
    }
    cfg.seed = seed;
    TrainedModel model{nn::Network::build(dag, splits.input_shape, splits.output_shape, seed), {}};
    model.train = nn::sgd_train(model.network, splits.train.inputs, splits.train.targets, cfg);
    return model;
}

namespace {

double train_and_score(const Individual& ind, const DataSplits& splits, const nn::TrainConfig& cfg,
                       SplitRole role) {
    try {
        TrainedModel model = train_model(ind.dag, ind.seed, splits, cfg);
        if (model.train.failed) {
            return kFailedFitness;
        }
        const double value = score(model.network, splits, role);
        return std::isfinite(value) ? std::min(value, kFailedFitness) : kFailedFitness;
    } catch (const NumericsError&) {
        return kFailedFitness;
    }
}

}  // namespace

double evaluate_individual(const Individual& ind, const DataSplits& splits, const nn::TrainConfig& cfg) {
    return train_and_score(ind, splits, cfg, SplitRole::Valid);
}

double final_test(const Individual& best, const DataSplits& splits, const nn::TrainConfig& cfg) {
    return train_and_score(best, splits, cfg, SplitRole::Test);
}

}  // namespace dagevo
