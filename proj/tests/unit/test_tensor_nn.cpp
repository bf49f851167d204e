#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dagevo/autograd.hpp"
#include "dagevo/errors.hpp"
#include "dagevo/network.hpp"
#include "test_helpers.hpp"

namespace dagevo {
namespace {

using nn::Variable;
using testing::dense_node;
using testing::identity_node;
using testing::make_dag;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) {
        v = uniform_real(rng, lo, hi);
    }
    return t;
}

double scalar_act(Activation a, double v) {
    Tensor t({1, 1, 1}, v);
    return nn::activate(Variable(t), a).value()[0];
}

TEST(Tensor, ReshapeChecksCount) {
    Tensor t({2, 3}, 1.0);
    EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
    EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1.0}), ShapeError);
}

TEST(Activations, PointValues) {
    EXPECT_DOUBLE_EQ(scalar_act(Activation::Sigmoid, 0.0), 0.5);
    EXPECT_DOUBLE_EQ(scalar_act(Activation::LeakyReLU, -1.0), -0.01);
    EXPECT_DOUBLE_EQ(scalar_act(Activation::ReLU, -2.0), 0.0);
    EXPECT_DOUBLE_EQ(scalar_act(Activation::ReLU, 2.0), 2.0);
    EXPECT_DOUBLE_EQ(scalar_act(Activation::ELU, -1.0), std::exp(-1.0) - 1.0);
    EXPECT_DOUBLE_EQ(scalar_act(Activation::Swish, 1.0), 1.0 / (1.0 + std::exp(-1.0)));
    EXPECT_DOUBLE_EQ(scalar_act(Activation::Id, -3.25), -3.25);
}

TEST(Activations, GeluMatchesTanhFormula) {
    for (double v = -4.0; v <= 4.0; v += 0.125) {
        const double c = std::sqrt(2.0 / std::numbers::pi);
        const double expected = 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v)));
        EXPECT_NEAR(scalar_act(Activation::GELU, v), expected, 1e-15);
    }
}

TEST(Activations, MonotoneWhereExpected) {
    for (auto a : {Activation::Sigmoid, Activation::ReLU, Activation::LeakyReLU, Activation::ELU, Activation::Id}) {
        double prev = scalar_act(a, -5.0);
        for (double v = -4.9; v <= 5.0; v += 0.1) {
            const double cur = scalar_act(a, v);
            EXPECT_GE(cur, prev) << to_string(a);
            prev = cur;
        }
    }
}

TEST(Activations, SoftmaxRowsSumToOne) {
    Rng rng = make_rng(1);
    const Tensor x = random_tensor({2, 3, 6}, rng, -30.0, 30.0);
    const Tensor y = nn::activate(Variable(x), Activation::Softmax).value();
    for (std::size_t r = 0; r < 6; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 6; ++c) {
            EXPECT_GE(y[r * 6 + c], 0.0);
            sum += y[r * 6 + c];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Combine, AddZeroPadsNarrowInput) {
    Rng rng = make_rng(2);
    const Tensor a = random_tensor({2, 4, 3}, rng);
    const Tensor b = random_tensor({2, 4, 5}, rng);
    const Variable inputs[] = {Variable(a), Variable(b)};
    const Tensor y = nn::combine(inputs, Combiner::Add).value();
    ASSERT_EQ(y.shape(), (Shape{2, 4, 5}));
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t t = 0; t < 4; ++t) {
            for (std::size_t c = 0; c < 5; ++c) {
                const double pad = c < 3 ? a.at(i, t, c) : 0.0;
                EXPECT_DOUBLE_EQ(y.at(i, t, c), pad + b.at(i, t, c));
            }
        }
    }
}

TEST(Combine, ConcatStacksChannels) {
    Rng rng = make_rng(3);
    const Tensor a = random_tensor({1, 4, 3}, rng);
    const Tensor b = random_tensor({1, 4, 5}, rng);
    const Variable inputs[] = {Variable(a), Variable(b)};
    const Tensor y = nn::combine(inputs, Combiner::Concat).value();
    ASSERT_EQ(y.shape(), (Shape{1, 4, 8}));
    EXPECT_EQ(y.at(0, 2, 1), a.at(0, 2, 1));
    EXPECT_EQ(y.at(0, 2, 4), b.at(0, 2, 1));
}

TEST(Combine, MulZeroesPaddedChannels) {
    Rng rng = make_rng(4);
    const Tensor a = random_tensor({1, 4, 3}, rng);
    const Tensor b = random_tensor({1, 4, 5}, rng);
    const Variable inputs[] = {Variable(a), Variable(b)};
    const Tensor y = nn::combine(inputs, Combiner::Mul).value();
    for (std::size_t t = 0; t < 4; ++t) {
        EXPECT_EQ(y.at(0, t, 3), 0.0);
        EXPECT_EQ(y.at(0, t, 4), 0.0);
        EXPECT_DOUBLE_EQ(y.at(0, t, 0), a.at(0, t, 0) * b.at(0, t, 0));
    }
}

TEST(Combine, SingleInputPassesThroughAndMismatchedTimeFails) {
    Rng rng = make_rng(5);
    const Variable a(random_tensor({1, 4, 3}, rng));
    const Variable one[] = {a};
    EXPECT_EQ(nn::combine(one, Combiner::Mul).value(), a.value());
    const Variable bad[] = {a, Variable(random_tensor({1, 5, 3}, rng))};
    EXPECT_THROW(nn::combine(bad, Combiner::Add), ShapeError);
}

TEST(Layers, ConvWithIdentityKernelIsIdentity) {
    Rng rng = make_rng(6);
    const Tensor x = random_tensor({2, 7, 3}, rng);
    Tensor w({1, 3, 3}, 0.0);
    for (std::size_t c = 0; c < 3; ++c) {
        w[c * 3 + c] = 1.0;
    }
    const Tensor y = nn::conv1d_same(Variable(x), Variable(w), Variable(Tensor({3}, 0.0))).value();
    EXPECT_EQ(y, x);
}

TEST(Layers, ConvMatchesDirectSum) {
    Rng rng = make_rng(7);
    const std::size_t len = 6;
    const std::size_t k = 4;
    const Tensor x = random_tensor({1, len, 2}, rng);
    const Tensor w = random_tensor({k, 2, 3}, rng);
    const Tensor b = random_tensor({3}, rng);
    const Tensor y = nn::conv1d_same(Variable(x), Variable(w), Variable(b)).value();
    const auto left = static_cast<std::ptrdiff_t>((k - 1) / 2);
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t o = 0; o < 3; ++o) {
            double expected = b[o];
            for (std::size_t j = 0; j < k; ++j) {
                const auto s = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - left;
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(len)) {
                    continue;
                }
                for (std::size_t i = 0; i < 2; ++i) {
                    expected += x.at(0, static_cast<std::size_t>(s), i) * w[(j * 2 + i) * 3 + o];
                }
            }
            EXPECT_NEAR(y.at(0, t, o), expected, 1e-12);
        }
    }
}

TEST(Layers, AveragePoolMatchesSlidingWindow) {
    Rng rng = make_rng(8);
    const std::size_t len = 9;
    for (std::size_t window : {2u, 3u, 4u, 5u}) {
        const Tensor x = random_tensor({1, len, 2}, rng);
        const Tensor y = nn::pool1d_same(Variable(x), window, nn::PoolMode::Average).value();
        const auto left = static_cast<std::ptrdiff_t>((window - 1) / 2);
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t c = 0; c < 2; ++c) {
                double sum = 0.0;
                for (std::size_t j = 0; j < window; ++j) {
                    const auto s = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - left;
                    if (s >= 0 && s < static_cast<std::ptrdiff_t>(len)) {
                        sum += x.at(0, static_cast<std::size_t>(s), c);
                    }
                }
                EXPECT_NEAR(y.at(0, t, c), sum / static_cast<double>(window), 1e-15);
            }
        }
    }
}

TEST(Layers, AveragePoolOfConstant) {
    const Tensor x({1, 8, 1}, 2.5);
    const Tensor y = nn::pool1d_same(Variable(x), 3, nn::PoolMode::Average).value();
    for (std::size_t t = 1; t + 1 < 8; ++t) {
        EXPECT_DOUBLE_EQ(y.at(0, t, 0), 2.5);
    }
    EXPECT_DOUBLE_EQ(y.at(0, 0, 0), 2.5 * 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(y.at(0, 7, 0), 2.5 * 2.0 / 3.0);
}

TEST(Layers, MaxPoolIgnoresPadding) {
    const Tensor x({1, 4, 1}, std::vector<double>{-3.0, -2.0, -5.0, -4.0});
    const Tensor y = nn::pool1d_same(Variable(x), 3, nn::PoolMode::Max).value();
    EXPECT_EQ(y.values()[0], -2.0);
    EXPECT_EQ(y.values()[3], -4.0);
}

TEST(InferShapes, DenseChain) {
    const Dag d = make_dag({dense_node(7)}, {{0, 1}, {1, 2}});
    const auto s = nn::infer_shapes(d, nn::InputShape{5, 4});
    EXPECT_EQ(s[0].combined_channels, 4u);
    EXPECT_EQ(s[0].out_channels, 7u);
}

TEST(InferShapes, ConcatDiamond) {
    const Dag d = make_dag({dense_node(7), dense_node(4), identity_node(Combiner::Concat)},
                           {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}});
    const auto s = nn::infer_shapes(d, nn::InputShape{5, 2});
    EXPECT_EQ(s[2].combined_channels, 11u);
    EXPECT_EQ(s[2].out_channels, 11u);
}

TEST(InferShapes, AttentionPadsToHeadMultiple) {
    NodeSpec att;
    att.kind = LayerKind::Attention;
    att.params["heads"] = std::int64_t{4};
    att.params["init_type"] = std::string("random");
    const Dag d = make_dag({att}, {{0, 1}, {1, 2}});
    const auto s = nn::infer_shapes(d, nn::InputShape{6, 5});
    EXPECT_EQ(s[0].layer_channels, 8u);
    EXPECT_THROW(nn::infer_shapes(d, nn::InputShape{0, 5}), ShapeError);
}

// Per node: route only that node into Output and check the network accepts
// the inferred width end to end.
TEST(InferShapes, AgreesWithExecutedShapes) {
    Rng rng = make_rng(9);
    const SearchSpace space = SearchSpace::defaults();
    const nn::InputShape in{3, 2};
    for (int i = 0; i < 1000; ++i) {
        const Dag d = random_dag(rng, NodeBounds{1, 10}, space);
        const auto shapes = nn::infer_shapes(d, in);
        const Tensor batch = random_tensor({1, in.time, in.channels}, rng);
        for (std::size_t v = 1; v + 1 < d.size(); ++v) {
            Dag probe = d;
            for (std::size_t p = 0; p + 1 < d.size(); ++p) {
                probe.adj.set(p, d.size() - 1, p == v);
            }
            const auto net = nn::Network::build(probe, in, nn::OutputShape{1, 1}, 1);
            ASSERT_EQ(nn::head_channels(probe, shapes, in), shapes[v - 1].out_channels);
            ASSERT_NO_THROW(net.forward(Variable(batch), nn::Mode::Eval)) << serialize(d);
        }
    }
}

TEST(Network, BuildIsDeterministicPerSeed) {
    Rng rng = make_rng(10);
    const SearchSpace space = SearchSpace::defaults();
    for (int i = 0; i < 20; ++i) {
        const Dag d = random_dag(rng, NodeBounds{1, 6}, space);
        const auto a = nn::Network::build(d, {6, 2}, {3, 1}, 123);
        const auto b = nn::Network::build(d, {6, 2}, {3, 1}, 123);
        const auto c = nn::Network::build(d, {6, 2}, {3, 1}, 124);
        ASSERT_EQ(a.parameters().size(), b.parameters().size());
        bool differs = false;
        for (std::size_t k = 0; k < a.parameters().size(); ++k) {
            EXPECT_EQ(a.parameters()[k].var.value(), b.parameters()[k].var.value());
            differs = differs || a.parameters()[k].var.value() != c.parameters()[k].var.value();
        }
        EXPECT_TRUE(differs);
    }
}

TEST(Network, DenseParameterCount) {
    const Dag d = make_dag({dense_node(7)}, {{0, 1}, {1, 2}});
    const auto net = nn::Network::build(d, {5, 4}, {2, 1}, 0);
    ASSERT_EQ(net.parameters().size(), 4u);
    EXPECT_EQ(net.parameters()[0].var.value().size() + net.parameters()[1].var.value().size(), 4u * 7u + 7u);
    // Head: time * channels inputs, horizon * series outputs.
    EXPECT_EQ(net.parameter_count(), 4u * 7u + 7u + 5u * 7u * 2u + 2u);
}

TEST(Network, ZeroHeadPredictsBias) {
    const Dag d = make_dag(1, {{0, 1}, {1, 2}});
    auto net = nn::Network::build(d, {4, 2}, {3, 2}, 5);
    auto& params = net.parameters();
    params[0].var.mutable_value().fill(0.0);
    const Tensor bias = params[1].var.value();
    Rng rng = make_rng(11);
    const Tensor y = net.predict(random_tensor({3, 4, 2}, rng));
    for (std::size_t b = 0; b < 3; ++b) {
        for (std::size_t k = 0; k < 6; ++k) {
            EXPECT_EQ(y[b * 6 + k], bias[k]);
        }
    }
}

TEST(Network, EvalForwardIsRepeatable) {
    Rng rng = make_rng(12);
    const SearchSpace space = SearchSpace::defaults();
    const Dag d = random_dag(rng, NodeBounds{3, 8}, space);
    const auto net = nn::Network::build(d, {5, 3}, {2, 1}, 7);
    const Tensor x = random_tensor({4, 5, 3}, rng);
    EXPECT_EQ(net.predict(x), net.predict(x));
    const auto copy = net;
    EXPECT_EQ(copy.predict(x), net.predict(x));
}

TEST(Network, ForwardRejectsWrongInput) {
    const auto net = nn::Network::build(make_dag(1, {{0, 1}, {1, 2}}), {4, 2}, {1, 1}, 0);
    EXPECT_THROW(net.predict(Tensor({1, 5, 2})), ShapeError);
}

double relu(double v) { return v > 0 ? v : 0.0; }
double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Input(2) -> v1 Dense(3, relu); v2 = sigmoid(concat(Input, v1)); v3 = Dense(2) of add(pad(v1), v2) -> Output.
TEST(Network, ThreeNodeGraphMatchesStraightLineOracle) {
    const Dag d = make_dag({dense_node(3, Combiner::Add, Activation::ReLU),
                            identity_node(Combiner::Concat, Activation::Sigmoid), dense_node(2, Combiner::Add)},
                           {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}, {3, 4}});
    const std::size_t len = 3;
    const auto net = nn::Network::build(d, {len, 2}, {2, 1}, 31);
    const auto& p = net.parameters();
    ASSERT_EQ(p.size(), 6u);
    const Tensor& w1 = p[0].var.value();
    const Tensor& b1 = p[1].var.value();
    const Tensor& w3 = p[2].var.value();
    const Tensor& b3 = p[3].var.value();
    const Tensor& wh = p[4].var.value();
    const Tensor& bh = p[5].var.value();

    Rng rng = make_rng(13);
    const Tensor x = random_tensor({1, len, 2}, rng);
    std::vector<double> flat;
    for (std::size_t t = 0; t < len; ++t) {
        double v1[3];
        for (std::size_t o = 0; o < 3; ++o) {
            v1[o] = b1[o] + x.at(0, t, 0) * w1[o] + x.at(0, t, 1) * w1[3 + o];
            v1[o] = relu(v1[o]);
        }
        const double v2[5] = {sigm(x.at(0, t, 0)), sigm(x.at(0, t, 1)), sigm(v1[0]), sigm(v1[1]), sigm(v1[2])};
        const double mix[5] = {v1[0] + v2[0], v1[1] + v2[1], v1[2] + v2[2], v2[3], v2[4]};
        for (std::size_t o = 0; o < 2; ++o) {
            double s = b3[o];
            for (std::size_t i = 0; i < 5; ++i) {
                s += mix[i] * w3[i * 2 + o];
            }
            flat.push_back(s);
        }
    }
    const Tensor y = net.predict(x);
    for (std::size_t o = 0; o < 2; ++o) {
        double s = bh[o];
        for (std::size_t i = 0; i < flat.size(); ++i) {
            s += flat[i] * wh[i * 2 + o];
        }
        EXPECT_NEAR(y[o], s, 1e-12);
    }
}

TEST(Network, DropoutIsIdentityInEvalMode) {
    NodeSpec drop;
    drop.kind = LayerKind::Dropout;
    drop.params["rate"] = 0.5;
    const Dag d = make_dag({drop}, {{0, 1}, {1, 2}});
    const auto net = nn::Network::build(d, {4, 2}, {1, 1}, 3);
    const auto ref = nn::Network::build(make_dag(1, {{0, 1}, {1, 2}}), {4, 2}, {1, 1}, 3);
    Rng rng = make_rng(14);
    const Tensor x = random_tensor({2, 4, 2}, rng);
    Rng r1 = make_rng(1);
    Rng r2 = make_rng(2);
    const Tensor a = net.forward(Variable(x), nn::Mode::Eval, &r1).value();
    const Tensor b = net.forward(Variable(x), nn::Mode::Eval, &r2).value();
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, ref.predict(x));
    EXPECT_THROW(net.forward(Variable(x), nn::Mode::Train, nullptr), StateError);
}

TEST(Gradients, ZeroWhenPredictionsMatchTargets) {
    Rng rng = make_rng(15);
    const SearchSpace space = SearchSpace::defaults();
    for (int i = 0; i < 10; ++i) {
        const Dag d = random_dag(rng, NodeBounds{1, 5}, space);
        auto net = nn::Network::build(d, {4, 2}, {2, 1}, 9);
        const Tensor x = random_tensor({3, 4, 2}, rng);
        const Tensor y = net.predict(x);
        const auto g = nn::gradients(net, x, y);
        EXPECT_EQ(g.loss, 0.0);
        for (const auto& t : g.per_parameter) {
            for (double v : t.values()) {
                EXPECT_EQ(v, 0.0);
            }
        }
    }
}

// Targets one unit from each prediction keep the loss smooth and near 1.
void expect_matches_finite_differences(nn::Network& net, const Tensor& x, std::uint64_t dropout_seed,
                                       nn::Mode mode) {
    Rng probe_rng = make_rng(dropout_seed, 2);
    Tensor target = net.forward(Variable(x), mode, &probe_rng).value();
    for (std::size_t i = 0; i < target.size(); ++i) {
        target[i] += i % 2 == 0 ? 1.0 : -1.0;
    }
    auto loss = [&] {
        nn::NoGradGuard guard;
        Rng r = make_rng(dropout_seed, 2);
        return nn::mean_abs_error(net.forward(Variable(x), mode, &r), target).value()[0];
    };
    const auto g = nn::gradients(net, x, target, mode, dropout_seed);
    constexpr double eps = 1e-5;
    for (std::size_t k = 0; k < net.parameters().size(); ++k) {
        Tensor& w = net.parameters()[k].var.mutable_value();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double keep = w[i];
            w[i] = keep + eps;
            const double up = loss();
            w[i] = keep - eps;
            const double down = loss();
            w[i] = keep;
            const double numeric = (up - down) / (2 * eps);
            const double analytic = g.per_parameter[k][i];
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            EXPECT_LE(rel, 1e-4) << net.parameters()[k].name << "[" << i << "]";
        }
    }
}

TEST(Gradients, DenseAndRecurrentMatchFiniteDifferences) {
    NodeSpec gru;
    gru.kind = LayerKind::Recurrence;
    gru.params["output_units"] = std::int64_t{3};
    gru.params["cell"] = std::string("gru");
    gru.activation = Activation::Swish;
    const Dag d = make_dag({dense_node(2, Combiner::Add, Activation::ELU), gru}, {{0, 1}, {0, 2}, {1, 2}, {2, 3}});
    auto net = nn::Network::build(d, {4, 3}, {2, 1}, 17);
    Rng rng = make_rng(16);
    expect_matches_finite_differences(net, random_tensor({2, 4, 3}, rng), 0, nn::Mode::Eval);
}

TEST(Gradients, TrainModeDropoutMatchesFiniteDifferences) {
    NodeSpec drop;
    drop.kind = LayerKind::Dropout;
    drop.params["rate"] = 0.3;
    drop.combiner = Combiner::Mul;
    const Dag d = make_dag({dense_node(2), drop}, {{0, 1}, {0, 2}, {1, 2}, {2, 3}});
    auto net = nn::Network::build(d, {4, 3}, {2, 1}, 19);
    Rng rng = make_rng(18);
    expect_matches_finite_differences(net, random_tensor({2, 4, 3}, rng), 77, nn::Mode::Train);
}

TEST(Autograd, BackwardRequiresScalarRoot) {
    Variable a(Tensor({2}, 1.0), true);
    EXPECT_THROW(nn::backward(nn::scale(a, 2.0)), ShapeError);
    Variable s(Tensor({1}, 3.0), true);
    nn::backward(nn::mul(s, s));
    EXPECT_DOUBLE_EQ(s.grad()[0], 6.0);
}

}  // namespace
}  // namespace dagevo
