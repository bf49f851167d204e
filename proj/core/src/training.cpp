#include "dagevo/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dagevo/errors.hpp"

namespace dagevo::nn {

void TrainConfig::check() const {
    if (batch_size == 0) {
        throw DomainError("batch_size must be positive");
    }
    if (!(learning_rate > 0)) {
        throw DomainError("learning_rate must be positive");
    }
    if (!(clip_norm > 0)) {
        throw DomainError("clip_norm must be positive");
    }
}

Tensor take_rows(const Tensor& t, std::size_t first, std::size_t count) {
    Shape shape = t.shape();
    const std::size_t stride = t.size() / shape[0];
    shape[0] = count;
    std::vector<double> values(t.data() + first * stride, t.data() + (first + count) * stride);
    return Tensor(std::move(shape), std::move(values));
}

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
    Shape shape = t.shape();
    const std::size_t stride = t.size() / shape[0];
    shape[0] = rows.size();
    Tensor out(std::move(shape));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(t.data() + rows[r] * stride, stride, out.data() + r * stride);
    }
    return out;
}

double mean_abs_error(const Network& network, const Tensor& inputs, const Tensor& targets, std::size_t chunk) {
    const std::size_t n = inputs.dim(0);
    if (n == 0) {
        throw StateError("mean_abs_error: empty window set");
    }
    double sum = 0.0;
    for (std::size_t first = 0; first < n; first += chunk) {
        const std::size_t count = std::min(chunk, n - first);
        const Tensor pred = network.predict(take_rows(inputs, first, count));
        const Tensor target = take_rows(targets, first, count);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            sum += std::abs(pred[i] - target[i]);
        }
    }
    return sum / static_cast<double>(targets.size());
}

TrainResult sgd_train(Network& network, const Tensor& inputs, const Tensor& targets, const TrainConfig& cfg) {
    cfg.check();
    const std::size_t n = inputs.dim(0);
    if (n == 0 || targets.dim(0) != n) {
        throw StateError("sgd_train needs a nonempty, aligned window set");
    }
    Rng shuffle_rng = make_rng(cfg.seed, 1);
    Rng dropout_rng = make_rng(cfg.seed, 2);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto& params = network.parameters();

    TrainResult result;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t first = 0; first < n; first += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n - first);
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(first),
                                          order.begin() + static_cast<std::ptrdiff_t>(first + count));
            for (auto& p : params) {
                p.var.zero_grad();
            }
            Variable loss = nn::mean_abs_error(
                network.forward(Variable(gather_rows(inputs, rows)), Mode::Train, &dropout_rng),
                gather_rows(targets, rows));
            const double value = loss.value()[0];
            if (!std::isfinite(value)) {
                result.failed = true;
                return result;
            }
            backward(loss);

            double norm2 = 0.0;
            for (const auto& p : params) {
                for (double g : p.var.grad().values()) {
                    norm2 += g * g;
                }
            }
            const double norm = std::sqrt(norm2);
            if (!std::isfinite(norm)) {
                result.failed = true;
                return result;
            }
            const double factor = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
            const double step = cfg.learning_rate * factor;
            for (auto& p : params) {
                Tensor& w = p.var.mutable_value();
                const Tensor& g = p.var.grad();
                for (std::size_t i = 0; i < w.size(); ++i) {
                    w[i] -= step * g[i];
                }
            }
            epoch_loss += value * static_cast<double>(count);
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
    }
    try {
        result.final_loss = mean_abs_error(network, inputs, targets);
    } catch (const NumericsError&) {
        result.failed = true;
    }
    if (!std::isfinite(result.final_loss)) {
        result.failed = true;
    }
    return result;
}

}  // namespace dagevo::nn
