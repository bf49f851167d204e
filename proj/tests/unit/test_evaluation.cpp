#include <gtest/gtest.h>

#include <cmath>

#include "dagevo/errors.hpp"
#include "dagevo/evaluation.hpp"
#include "test_helpers.hpp"

namespace dagevo {
namespace {

Tensor column(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({n, 1}, std::move(v));
}

Dataset series_dataset(std::vector<double> v) {
    Dataset ds;
    ds.name = "t";
    ds.y = column(std::move(v));
    ds.target_names = {"y"};
    return ds;
}

TEST(Mase, IdenticalIsZero) {
    const Tensor y = column({1.0, 3.0, 2.0, 5.0});
    EXPECT_EQ(mase(y, y), 0.0);
}

TEST(Mase, HandComputedCase) {
    EXPECT_NEAR(mase(column({1, 2, 4}), column({1, 1, 1})), 8.0 / 9.0, 1e-12);
}

TEST(Mase, NaiveOneStepGivesNMinusOneOverN) {
    Rng rng = make_rng(1);
    for (std::size_t n : {2u, 3u, 10u, 97u}) {
        std::vector<double> y(n);
        for (auto& v : y) {
            v = uniform_real(rng, -5, 5);
        }
        std::vector<double> naive(n);
        naive[0] = y[0];
        for (std::size_t t = 1; t < n; ++t) {
            naive[t] = y[t - 1];
        }
        const double nn = static_cast<double>(n);
        EXPECT_NEAR(mase(column(y), column(naive)), (nn - 1.0) / nn, 1e-15);
    }
}

TEST(Mase, ScaleAndTranslationInvariant) {
    // Dyadic values keep every product and sum exact.
    const std::vector<double> y = {1.0, 2.5, 0.75, 4.0, 3.25};
    const std::vector<double> p = {0.5, 2.0, 1.5, 3.0, 3.0};
    const double base = mase(column(y), column(p));
    for (double a : {2.0, 0.25, -4.0}) {
        for (double b : {0.0, 8.0, -16.0}) {
            std::vector<double> ys = y;
            std::vector<double> ps = p;
            for (std::size_t i = 0; i < y.size(); ++i) {
                ys[i] = a * y[i] + b;
                ps[i] = a * p[i] + b;
            }
            EXPECT_EQ(mase(column(ys), column(ps)), base) << a << " " << b;
        }
    }
}

TEST(Mase, AveragesOverColumns) {
    const Tensor y({3, 2}, std::vector<double>{1, 0, 2, 1, 4, 3});
    const Tensor p({3, 2}, std::vector<double>{1, 0, 1, 1, 1, 3});
    EXPECT_NEAR(mase(y, p), (8.0 / 9.0 + 0.0) / 2.0, 1e-15);
}

TEST(Mase, Errors) {
    EXPECT_THROW(mase(column({1, 1, 1}), column({1, 2, 3})), DegenerateSeriesError);
    EXPECT_THROW(mase(column({1}), column({1})), DomainError);
    EXPECT_THROW(mase(column({1, 2}), column({1, 2, 3})), ShapeError);
}

TEST(Split, TwentyStepExample) {
    std::vector<double> v(20);
    for (std::size_t t = 0; t < 20; ++t) {
        v[t] = static_cast<double>(t * t % 7);
    }
    SplitOptions o{0.2, 0.2, true, true};
    const auto s = split_and_window(series_dataset(v), 5, 2, o);
    EXPECT_EQ(s.train.range_end - s.train.range_begin, 12u);
    EXPECT_EQ(s.valid.range_end - s.valid.range_begin, 4u);
    EXPECT_EQ(s.test.range_end - s.test.range_begin, 4u);
    EXPECT_EQ(s.train.size(), 12u - 5u - 2u + 1u);
    EXPECT_EQ(s.valid.size(), 0u);
    // Without permission the too-short validation split is an error.
    EXPECT_THROW(split_and_window(series_dataset(v), 5, 2, SplitOptions{0.2, 0.2, false, true}),
                 InsufficientDataError);
}

TEST(Split, WindowsAreCausalAndChronological) {
    const Dataset ds = synth(SynthKind::Ar1, SynthParams{}, 300, 4);
    const auto s = split_and_window(ds, 10, 4, SplitOptions{});
    std::size_t prev_end = 0;
    for (auto role : {SplitRole::Train, SplitRole::Valid, SplitRole::Test}) {
        const WindowSet& w = s.get(role);
        EXPECT_EQ(w.range_begin, prev_end);
        prev_end = w.range_end;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const std::size_t start = w.starts[k];
            EXPECT_GE(start, w.range_begin);
            EXPECT_LE(start + 10 + 4, w.range_end);
            if (k > 0) {
                EXPECT_EQ(start, w.starts[k - 1] + 1);
            }
            // Inputs precede every target and match the standardized series.
            EXPECT_DOUBLE_EQ(w.inputs[(k * 10 + 9)], s.scaler.forward(ds.y[start + 9], 0));
            EXPECT_EQ(w.last_observed[k], ds.y[start + 9]);
            EXPECT_EQ(w.raw_targets[k * 4], ds.y[start + 10]);
        }
    }
    EXPECT_EQ(prev_end, 300u);
}

TEST(Split, StandardizerUsesTrainingRangeOnly) {
    std::vector<double> v(100, 0.0);
    for (std::size_t t = 0; t < 100; ++t) {
        v[t] = t < 70 ? static_cast<double>(t % 2) : 1000.0 + static_cast<double>(t);
    }
    const auto s = split_and_window(series_dataset(v), 4, 2, SplitOptions{});
    EXPECT_DOUBLE_EQ(s.scaler.mean[0], 0.5);
    EXPECT_DOUBLE_EQ(s.scaler.scale[0], 0.5);
}

TEST(Split, ZeroTestFractionAllowedWithFlag) {
    const Dataset ds = synth(SynthKind::Sine, SynthParams{}, 120, 1);
    SplitOptions o{0.2, 0.0, false, true};
    const auto s = split_and_window(ds, 8, 4, o);
    EXPECT_EQ(s.test.size(), 0u);
    EXPECT_EQ(s.test.range_begin, s.test.range_end);
    EXPECT_THROW(naive_mase(s, SplitRole::Test), InsufficientDataError);
}

TEST(Split, FeaturesBecomeExtraInputChannels) {
    Dataset ds = synth(SynthKind::Sine, SynthParams{}, 100, 1);
    Tensor x({100, 2});
    for (std::size_t t = 0; t < 100; ++t) {
        x[t * 2] = static_cast<double>(t);
        x[t * 2 + 1] = -static_cast<double>(t);
    }
    ds.x = x;
    ds.feature_names = {"a", "b"};
    const auto s = split_and_window(ds, 6, 3, SplitOptions{});
    EXPECT_EQ(s.input_shape.channels, 3u);
    EXPECT_EQ(s.output_shape.series, 1u);
    EXPECT_EQ(s.train.inputs.dim(2), 3u);
}

TEST(Naive, MatchesIndependentRepeatOracle) {
    const Dataset ds = synth(SynthKind::Sine, SynthParams{}, 200, 2);
    const auto s = split_and_window(ds, 12, 6, SplitOptions{});
    std::vector<double> truth;
    std::vector<double> pred;
    for (std::size_t start : s.valid.starts) {
        for (std::size_t h = 0; h < 6; ++h) {
            truth.push_back(ds.y[start + 12 + h]);
            pred.push_back(ds.y[start + 11]);
        }
    }
    EXPECT_EQ(naive_mase(s, SplitRole::Valid), mase(column(truth), column(pred)));
}

DataSplits small_sine() {
    const Dataset ds = synth(SynthKind::Sine, SynthParams{1.0, 12.0, 0.05, 0.5, 0.01}, 160, 3);
    return split_and_window(ds, 12, 4, SplitOptions{});
}

TEST(Evaluate, DeterministicFitness) {
    const DataSplits s = small_sine();
    Rng rng = make_rng(4);
    EvolutionConfig ec;
    ec.bounds = {1, 4};
    nn::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    for (int i = 0; i < 3; ++i) {
        const Individual ind = random_individual(rng, ec, static_cast<std::uint64_t>(i));
        const double a = evaluate_individual(ind, s, cfg);
        const double b = evaluate_individual(ind, s, cfg);
        EXPECT_EQ(a, b);
        EXPECT_GT(a, 0.0);
    }
}

TEST(Evaluate, ValidEqualTrainGivesTrainScore) {
    DataSplits s = small_sine();
    s.valid = s.train;
    s.valid.role = SplitRole::Valid;
    Individual ind{testing::make_dag({testing::dense_node(4)}, {{0, 1}, {1, 2}}), 5, std::nullopt, 0};
    nn::TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 16;
    const double fitness = evaluate_individual(ind, s, cfg);
    const TrainedModel model = train_model(ind.dag, ind.seed, s, cfg);
    EXPECT_EQ(fitness, score(model.network, s, SplitRole::Train));
    EXPECT_LT(fitness, naive_mase(s, SplitRole::Train));
}

TEST(Evaluate, DivergenceGivesSentinel) {
    const DataSplits s = small_sine();
    Individual ind{testing::make_dag({testing::dense_node(4)}, {{0, 1}, {1, 2}}), 5, std::nullopt, 0};
    nn::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 1e308;
    cfg.clip_norm = 1e308;
    EXPECT_EQ(evaluate_individual(ind, s, cfg), kFailedFitness);
    EXPECT_EQ(final_test(ind, s, cfg), kFailedFitness);
}

TEST(Evaluate, ForecastIsDestandardized) {
    const DataSplits s = small_sine();
    const auto net = nn::Network::build(testing::make_dag(1, {{0, 1}, {1, 2}}), s.input_shape, s.output_shape, 1);
    const Tensor raw = net.predict(s.valid.inputs);
    const Tensor f = forecast(net, s, SplitRole::Valid);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        EXPECT_DOUBLE_EQ(f[i], s.scaler.inverse(raw[i], 0));
    }
}

}  // namespace
}  // namespace dagevo
