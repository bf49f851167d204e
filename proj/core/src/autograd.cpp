#include "dagevo/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>
#include <unordered_set>

#include "dagevo/errors.hpp"
#include "kernels.hpp"

namespace dagevo::nn {

struct Variable::Node {
    Tensor value;
    Tensor grad;
    bool grad_ready = false;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    Tensor& ensure_grad() {
        if (!grad_ready) {
            grad = Tensor(value.shape(), 0.0);
            grad_ready = true;
        }
        return grad;
    }
};

namespace {

using Node = Variable::Node;
using BackwardFn = std::function<void(Node&)>;

thread_local bool g_grad_enabled = true;

Variable make_op(Tensor value, std::vector<Variable> inputs, BackwardFn fn) {
    Variable out;
    out.node_ = std::make_shared<Node>();
    out.node_->value = std::move(value);
    if (!g_grad_enabled) {
        return out;
    }
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Variable& v) { return v.defined() && v.requires_grad(); });
    if (!any) {
        return out;
    }
    out.node_->requires_grad = true;
    out.node_->inputs.reserve(inputs.size());
    for (auto& v : inputs) {
        out.node_->inputs.push_back(v.node_);
    }
    out.node_->backward = std::move(fn);
    return out;
}

// Gradient buffer of input `i`, or nullptr when that input does not need one.
Tensor* input_grad(Node& self, std::size_t i) {
    Node* in = self.inputs[i].get();
    if (in == nullptr || !in->requires_grad) {
        return nullptr;
    }
    return &in->ensure_grad();
}

const Tensor& input_value(const Node& self, std::size_t i) { return self.inputs[i]->value; }

void require_same_shape(const Variable& a, const Variable& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
    }
}

std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

double stable_sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Elementwise op with derivative expressed through (input, output).
template <typename F, typename DF>
Variable unary(const Variable& x, F f, DF df) {
    const Tensor& xv = x.value();
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        y[i] = f(xv[i]);
    }
    return make_op(std::move(y), {x}, [df](Node& self) {
        Tensor* gx = input_grad(self, 0);
        if (gx == nullptr) {
            return;
        }
        const Tensor& xv = input_value(self, 0);
        for (std::size_t i = 0; i < xv.size(); ++i) {
            (*gx)[i] += self.grad[i] * df(xv[i], self.value[i]);
        }
    });
}

}  // namespace

Variable::Variable(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

const Tensor& Variable::value() const { return node_->value; }
Tensor& Variable::mutable_value() { return node_->value; }
bool Variable::requires_grad() const { return node_->requires_grad; }
bool Variable::has_grad() const { return node_->grad_ready; }
const Tensor& Variable::grad() const { return node_->ensure_grad(); }

void Variable::zero_grad() {
    if (node_->grad_ready) {
        node_->grad.fill(0.0);
    }
}

void backward(const Variable& root) {
    if (!root.defined() || root.value().size() != 1) {
        throw ShapeError("backward needs a scalar root");
    }
    if (!root.requires_grad()) {
        return;
    }
    // Post-order DFS gives a topological order with inputs before consumers.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node_.get(), 0}};
    visited.insert(root.node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child != nullptr && child->requires_grad && visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root.node_->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && node->grad_ready) {
            node->backward(*node);
        }
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Variable add(const Variable& a, const Variable& b) {
    require_same_shape(a, b, "add");
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] += b.value()[i];
    }
    return make_op(std::move(y), {a, b}, [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (Tensor* g = input_grad(self, k)) {
                for (std::size_t i = 0; i < g->size(); ++i) {
                    (*g)[i] += self.grad[i];
                }
            }
        }
    });
}

Variable sub(const Variable& a, const Variable& b) {
    require_same_shape(a, b, "sub");
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] -= b.value()[i];
    }
    return make_op(std::move(y), {a, b}, [](Node& self) {
        if (Tensor* g = input_grad(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i];
            }
        }
        if (Tensor* g = input_grad(self, 1)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] -= self.grad[i];
            }
        }
    });
}

Variable mul(const Variable& a, const Variable& b) {
    require_same_shape(a, b, "mul");
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] *= b.value()[i];
    }
    return make_op(std::move(y), {a, b}, [](Node& self) {
        const Tensor& av = input_value(self, 0);
        const Tensor& bv = input_value(self, 1);
        if (Tensor* g = input_grad(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i] * bv[i];
            }
        }
        if (Tensor* g = input_grad(self, 1)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i] * av[i];
            }
        }
    });
}

Variable scale(const Variable& a, double k) {
    Tensor y = a.value();
    for (auto& v : y.values()) {
        v *= k;
    }
    return make_op(std::move(y), {a}, [k](Node& self) {
        if (Tensor* g = input_grad(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += k * self.grad[i];
            }
        }
    });
}

Variable mul_constant(const Variable& a, const Tensor& mask) {
    if (a.shape() != mask.shape()) {
        throw ShapeError("mul_constant: mask shape " + shape_string(mask.shape()) + " does not match " +
                         shape_string(a.shape()));
    }
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] *= mask[i];
    }
    return make_op(std::move(y), {a}, [mask](Node& self) {
        if (Tensor* g = input_grad(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i] * mask[i];
            }
        }
    });
}

Variable linear(const Variable& x, const Variable& weight, const Variable& bias) {
    const Tensor& xv = x.value();
    const Tensor& w = weight.value();
    if (w.rank() != 2 || xv.rank() == 0 || xv.shape().back() != w.dim(0)) {
        throw ShapeError("linear: input " + shape_string(xv.shape()) + " incompatible with weight " +
                         shape_string(w.shape()));
    }
    const std::size_t in = w.dim(0);
    const std::size_t out = w.dim(1);
    if (bias.defined() && (bias.value().size() != out)) {
        throw ShapeError("linear: bias size does not match output width");
    }
    const std::size_t rows = xv.size() / in;
    Shape shape = xv.shape();
    shape.back() = out;
    Tensor y(shape);
    if (bias.defined()) {
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(bias.value().data(), out, y.data() + r * out);
        }
    }
    kernels::gemm_nn(rows, in, out, xv.data(), w.data(), y.data());
    std::vector<Variable> inputs{x, weight};
    if (bias.defined()) {
        inputs.push_back(bias);
    }
    return make_op(std::move(y), std::move(inputs), [rows, in, out](Node& self) {
        const Tensor& xv = input_value(self, 0);
        const Tensor& w = input_value(self, 1);
        const Tensor& g = self.grad;
        if (Tensor* gx = input_grad(self, 0)) {
            std::vector<double> scratch(in * out);
            kernels::gemm_nt(rows, out, in, g.data(), w.data(), gx->data(), scratch.data());
        }
        if (Tensor* gw = input_grad(self, 1)) {
            kernels::gemm_tn(rows, in, out, xv.data(), g.data(), gw->data());
        }
        if (self.inputs.size() > 2) {
            if (Tensor* gb = input_grad(self, 2)) {
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* gr = g.data() + r * out;
                    for (std::size_t o = 0; o < out; ++o) {
                        (*gb)[o] += gr[o];
                    }
                }
            }
        }
    });
}

Variable pad_channels(const Variable& x, std::size_t channels) {
    const std::size_t c = last_dim(x.shape());
    if (channels == c) {
        return x;
    }
    if (channels < c) {
        throw ShapeError("pad_channels: cannot pad " + std::to_string(c) + " channels down to " +
                         std::to_string(channels));
    }
    const std::size_t rows = x.value().size() / c;
    Shape shape = x.shape();
    shape.back() = channels;
    Tensor y(shape);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(x.value().data() + r * c, c, y.data() + r * channels);
    }
    return make_op(std::move(y), {x}, [rows, c, channels](Node& self) {
        if (Tensor* g = input_grad(self, 0)) {
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t i = 0; i < c; ++i) {
                    (*g)[r * c + i] += self.grad[r * channels + i];
                }
            }
        }
    });
}

Variable concat_channels(std::span<const Variable> inputs) {
    if (inputs.empty()) {
        throw ShapeError("concat_channels: no inputs");
    }
    if (inputs.size() == 1) {
        return inputs[0];
    }
    Shape lead = inputs[0].shape();
    lead.pop_back();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& v : inputs) {
        Shape l = v.shape();
        widths.push_back(l.back());
        l.pop_back();
        if (l != lead) {
            throw ShapeError("concat_channels: leading dimensions differ");
        }
        total += widths.back();
    }
    const std::size_t rows = element_count(lead);
    Shape shape = lead;
    shape.push_back(total);
    Tensor y(shape);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor& v = inputs[k].value();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(v.data() + r * widths[k], widths[k], y.data() + r * total + offset);
        }
        offset += widths[k];
    }
    std::vector<Variable> in(inputs.begin(), inputs.end());
    return make_op(std::move(y), std::move(in), [rows, total, widths](Node& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            if (Tensor* g = input_grad(self, k)) {
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t i = 0; i < widths[k]; ++i) {
                        (*g)[r * widths[k] + i] += self.grad[r * total + offset + i];
                    }
                }
            }
            offset += widths[k];
        }
    });
}

Variable slice_channels(const Variable& x, std::size_t start, std::size_t count) {
    const std::size_t c = last_dim(x.shape());
    if (start + count > c) {
        throw ShapeError("slice_channels: range exceeds channel count");
    }
    const std::size_t rows = x.value().size() / c;
    Shape shape = x.shape();
    shape.back() = count;
    Tensor y(shape);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(x.value().data() + r * c + start, count, y.data() + r * count);
    }
    return make_op(std::move(y), {x}, [rows, c, start, count](Node& self) {
        if (Tensor* g = input_grad(self, 0)) {
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t i = 0; i < count; ++i) {
                    (*g)[r * c + start + i] += self.grad[r * count + i];
                }
            }
        }
    });
}

Variable time_step(const Variable& x, std::size_t t) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3 || t >= xv.dim(1)) {
        throw ShapeError("time_step: expected [B, L, C] with t < L");
    }
    const std::size_t batch = xv.dim(0);
    const std::size_t len = xv.dim(1);
    const std::size_t c = xv.dim(2);
    Tensor y({batch, c});
    for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(xv.data() + (b * len + t) * c, c, y.data() + b * c);
    }
    return make_op(std::move(y), {x}, [batch, len, c, t](Node& self) {
        if (Tensor* g = input_grad(self, 0)) {
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t i = 0; i < c; ++i) {
                    (*g)[(b * len + t) * c + i] += self.grad[b * c + i];
                }
            }
        }
    });
}

Variable stack_time(std::span<const Variable> steps) {
    if (steps.empty()) {
        throw ShapeError("stack_time: no steps");
    }
    const Shape& s0 = steps[0].shape();
    if (s0.size() != 2) {
        throw ShapeError("stack_time: steps must be [B, C]");
    }
    const std::size_t batch = s0[0];
    const std::size_t c = s0[1];
    const std::size_t len = steps.size();
    Tensor y({batch, len, c});
    for (std::size_t t = 0; t < len; ++t) {
        if (steps[t].shape() != s0) {
            throw ShapeError("stack_time: step shapes differ");
        }
        for (std::size_t b = 0; b < batch; ++b) {
            std::copy_n(steps[t].value().data() + b * c, c, y.data() + (b * len + t) * c);
        }
    }
    std::vector<Variable> in(steps.begin(), steps.end());
    return make_op(std::move(y), std::move(in), [batch, len, c](Node& self) {
        for (std::size_t t = 0; t < len; ++t) {
            if (Tensor* g = input_grad(self, t)) {
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t i = 0; i < c; ++i) {
                        (*g)[b * c + i] += self.grad[(b * len + t) * c + i];
                    }
                }
            }
        }
    });
}

Variable reshape(const Variable& x, Shape shape) {
    Tensor y = x.value().reshaped(std::move(shape));
    return make_op(std::move(y), {x}, [](Node& self) {
        if (Tensor* g = input_grad(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i];
            }
        }
    });
}

Variable sigmoid(const Variable& x) {
    return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Variable tanh(const Variable& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Variable relu(const Variable& x) {
    return unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Variable leaky_relu(const Variable& x, double slope) {
    return unary(
        x, [slope](double v) { return v > 0 ? v : slope * v; },
        [slope](double v, double) { return v > 0 ? 1.0 : slope; });
}

Variable elu(const Variable& x, double alpha) {
    return unary(
        x, [alpha](double v) { return v > 0 ? v : alpha * std::expm1(v); },
        [alpha](double v, double) { return v > 0 ? 1.0 : alpha * std::exp(v); });
}

namespace {
constexpr double kGeluC = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);
}  // namespace

Variable gelu(const Variable& x) {
    return unary(
        x,
        [](double v) { return 0.5 * v * (1.0 + std::tanh(kSqrt2OverPi * (v + kGeluC * v * v * v))); },
        [](double v, double) {
            const double th = std::tanh(kSqrt2OverPi * (v + kGeluC * v * v * v));
            return 0.5 * (1.0 + th) +
                   0.5 * v * (1.0 - th * th) * kSqrt2OverPi * (1.0 + 3.0 * kGeluC * v * v);
        });
}

Variable swish(const Variable& x, double beta) {
    return unary(
        x, [beta](double v) { return v * stable_sigmoid(beta * v); },
        [beta](double v, double) {
            const double s = stable_sigmoid(beta * v);
            return s + beta * v * s * (1.0 - s);
        });
}

Variable softmax(const Variable& x) {
    const std::size_t c = last_dim(x.shape());
    const std::size_t rows = x.value().size() / c;
    Tensor y(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.value().data() + r * c;
        double* yr = y.data() + r * c;
        const double mx = *std::max_element(xr, xr + c);
        double sum = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            yr[i] = std::exp(xr[i] - mx);
            sum += yr[i];
        }
        for (std::size_t i = 0; i < c; ++i) {
            yr[i] /= sum;
        }
    }
    return make_op(std::move(y), {x}, [rows, c](Node& self) {
        Tensor* g = input_grad(self, 0);
        if (g == nullptr) {
            return;
        }
        for (std::size_t r = 0; r < rows; ++r) {
            const double* yr = self.value.data() + r * c;
            const double* gr = self.grad.data() + r * c;
            double dot = 0.0;
            for (std::size_t i = 0; i < c; ++i) {
                dot += gr[i] * yr[i];
            }
            for (std::size_t i = 0; i < c; ++i) {
                (*g)[r * c + i] += yr[i] * (gr[i] - dot);
            }
        }
    });
}

Variable conv1d_same(const Variable& x, const Variable& weight, const Variable& bias) {
    const Tensor& xv = x.value();
    const Tensor& w = weight.value();
    if (xv.rank() != 3 || w.rank() != 3 || w.dim(1) != xv.dim(2) || bias.value().size() != w.dim(2)) {
        throw ShapeError("conv1d: input " + shape_string(xv.shape()) + " incompatible with kernel " +
                         shape_string(w.shape()));
    }
    const std::size_t batch = xv.dim(0);
    const std::size_t len = xv.dim(1);
    const std::size_t cin = xv.dim(2);
    const std::size_t k = w.dim(0);
    const std::size_t cout = w.dim(2);
    const auto left = static_cast<std::ptrdiff_t>((k - 1) / 2);

    // Tap j reads input step t + j - left; the valid output steps form one
    // contiguous block per batch row, which is a plain matrix product.
    auto tap_range = [len, left](std::size_t j) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - left;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(len),
                                                           static_cast<std::ptrdiff_t>(len) - shift);
        return std::tuple{shift, lo, hi};
    };

    Tensor y({batch, len, cout});
    for (std::size_t r = 0; r < batch * len; ++r) {
        std::copy_n(bias.value().data(), cout, y.data() + r * cout);
    }
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < k; ++j) {
            const auto [shift, lo, hi] = tap_range(j);
            if (lo >= hi) {
                continue;
            }
            const auto t0 = static_cast<std::size_t>(lo);
            const auto s0 = static_cast<std::size_t>(lo + shift);
            kernels::gemm_nn(static_cast<std::size_t>(hi - lo), cin, cout, &xv.at(b, s0, 0),
                             w.data() + j * cin * cout, &y.at(b, t0, 0));
        }
    }
    return make_op(std::move(y), {x, weight, bias}, [batch, len, cin, k, cout, tap_range](Node& self) {
        const Tensor& xv = input_value(self, 0);
        const Tensor& w = input_value(self, 1);
        const Tensor& g = self.grad;
        Tensor* gx = input_grad(self, 0);
        Tensor* gw = input_grad(self, 1);
        Tensor* gb = input_grad(self, 2);
        if (gb != nullptr) {
            for (std::size_t r = 0; r < batch * len; ++r) {
                for (std::size_t o = 0; o < cout; ++o) {
                    (*gb)[o] += g[r * cout + o];
                }
            }
        }
        std::vector<double> scratch(gx != nullptr ? cin * cout : 0);
        for (std::size_t j = 0; j < k; ++j) {
            const auto [shift, lo, hi] = tap_range(j);
            if (lo >= hi) {
                continue;
            }
            const auto rows = static_cast<std::size_t>(hi - lo);
            const auto t0 = static_cast<std::size_t>(lo);
            const auto s0 = static_cast<std::size_t>(lo + shift);
            const double* wj = w.data() + j * cin * cout;
            for (std::size_t b = 0; b < batch; ++b) {
                if (gx != nullptr) {
                    kernels::gemm_nt(rows, cout, cin, &g.at(b, t0, 0), wj, &gx->at(b, s0, 0), scratch.data());
                }
                if (gw != nullptr) {
                    kernels::gemm_tn(rows, cin, cout, &xv.at(b, s0, 0), &g.at(b, t0, 0), gw->data() + j * cin * cout);
                }
            }
        }
    });
}

Variable pool1d_same(const Variable& x, std::size_t window, PoolMode mode) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3 || window == 0) {
        throw ShapeError("pool1d: expected [B, L, C] input and a positive window");
    }
    const std::size_t batch = xv.dim(0);
    const std::size_t len = xv.dim(1);
    const std::size_t c = xv.dim(2);
    const auto left = static_cast<std::ptrdiff_t>((window - 1) / 2);
    Tensor y(xv.shape());
    std::vector<std::size_t> argmax;
    if (mode == PoolMode::Max) {
        argmax.resize(xv.size());
    }
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < len; ++t) {
            const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(t) - left);
            const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(
                static_cast<std::ptrdiff_t>(len) - 1, static_cast<std::ptrdiff_t>(t) - left +
                                                          static_cast<std::ptrdiff_t>(window) - 1);
            for (std::size_t ch = 0; ch < c; ++ch) {
                if (mode == PoolMode::Average) {
                    double sum = 0.0;
                    for (std::ptrdiff_t s = lo; s <= hi; ++s) {
                        sum += xv.at(b, static_cast<std::size_t>(s), ch);
                    }
                    y.at(b, t, ch) = sum / static_cast<double>(window);
                } else {
                    auto best = static_cast<std::size_t>(lo);
                    for (std::ptrdiff_t s = lo + 1; s <= hi; ++s) {
                        if (xv.at(b, static_cast<std::size_t>(s), ch) > xv.at(b, best, ch)) {
                            best = static_cast<std::size_t>(s);
                        }
                    }
                    y.at(b, t, ch) = xv.at(b, best, ch);
                    argmax[(b * len + t) * c + ch] = (b * len + best) * c + ch;
                }
            }
        }
    }
    return make_op(std::move(y), {x},
                   [batch, len, c, left, window, mode, argmax = std::move(argmax)](Node& self) {
                       Tensor* g = input_grad(self, 0);
                       if (g == nullptr) {
                           return;
                       }
                       if (mode == PoolMode::Max) {
                           for (std::size_t i = 0; i < argmax.size(); ++i) {
                               (*g)[argmax[i]] += self.grad[i];
                           }
                           return;
                       }
                       const double inv = 1.0 / static_cast<double>(window);
                       for (std::size_t b = 0; b < batch; ++b) {
                           for (std::size_t t = 0; t < len; ++t) {
                               const std::ptrdiff_t lo =
                                   std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(t) - left);
                               const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(
                                   static_cast<std::ptrdiff_t>(len) - 1,
                                   static_cast<std::ptrdiff_t>(t) - left + static_cast<std::ptrdiff_t>(window) - 1);
                               for (std::size_t ch = 0; ch < c; ++ch) {
                                   const double gv = self.grad.at(b, t, ch) * inv;
                                   for (std::ptrdiff_t s = lo; s <= hi; ++s) {
                                       g->at(b, static_cast<std::size_t>(s), ch) += gv;
                                   }
                               }
                           }
                       }
                   });
}

Variable attention(const Variable& q, const Variable& k, const Variable& v, const Variable& rel_bias,
                   std::size_t heads) {
    require_same_shape(q, k, "attention");
    require_same_shape(q, v, "attention");
    const Tensor& qv = q.value();
    if (qv.rank() != 3 || heads == 0 || qv.dim(2) % heads != 0) {
        throw ShapeError("attention: channels must be a positive multiple of the head count");
    }
    const std::size_t batch = qv.dim(0);
    const std::size_t len = qv.dim(1);
    const std::size_t c = qv.dim(2);
    const std::size_t d = c / heads;
    const std::size_t offsets = 2 * len - 1;
    if (rel_bias.value().rank() != 2 || rel_bias.value().dim(0) != heads || rel_bias.value().dim(1) != offsets) {
        throw ShapeError("attention: relative bias must be [heads, 2L-1]");
    }
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    const Tensor& kv = k.value();
    const Tensor& vv = v.value();
    const Tensor& bias = rel_bias.value();

    Tensor weights({batch, heads, len, len});
    Tensor y(qv.shape());
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t i = 0; i < len; ++i) {
                double* a = weights.data() + ((b * heads + h) * len + i) * len;
                const double* qi = &qv.at(b, i, h * d);
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < len; ++j) {
                    const double* kj = &kv.at(b, j, h * d);
                    double s = 0.0;
                    for (std::size_t e = 0; e < d; ++e) {
                        s += qi[e] * kj[e];
                    }
                    a[j] = s * inv_sqrt_d + bias[h * offsets + (j + len - 1 - i)];
                    mx = std::max(mx, a[j]);
                }
                double sum = 0.0;
                for (std::size_t j = 0; j < len; ++j) {
                    a[j] = std::exp(a[j] - mx);
                    sum += a[j];
                }
                double* yi = &y.at(b, i, h * d);
                for (std::size_t j = 0; j < len; ++j) {
                    a[j] /= sum;
                    const double* vj = &vv.at(b, j, h * d);
                    for (std::size_t e = 0; e < d; ++e) {
                        yi[e] += a[j] * vj[e];
                    }
                }
            }
        }
    }
    return make_op(
        std::move(y), {q, k, v, rel_bias},
        [batch, heads, len, d, offsets, inv_sqrt_d, weights = std::move(weights)](Node& self) {
            const Tensor& qv = input_value(self, 0);
            const Tensor& kv = input_value(self, 1);
            const Tensor& vv = input_value(self, 2);
            Tensor* gq = input_grad(self, 0);
            Tensor* gk = input_grad(self, 1);
            Tensor* gv = input_grad(self, 2);
            Tensor* gbias = input_grad(self, 3);
            std::vector<double> da(len);
            std::vector<double> ds(len);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t h = 0; h < heads; ++h) {
                    for (std::size_t i = 0; i < len; ++i) {
                        const double* a = weights.data() + ((b * heads + h) * len + i) * len;
                        const double* gi = &self.grad.at(b, i, h * d);
                        double dot = 0.0;
                        for (std::size_t j = 0; j < len; ++j) {
                            const double* vj = &vv.at(b, j, h * d);
                            double acc = 0.0;
                            for (std::size_t e = 0; e < d; ++e) {
                                acc += gi[e] * vj[e];
                            }
                            da[j] = acc;
                            dot += a[j] * acc;
                            if (gv != nullptr) {
                                double* gvj = &gv->at(b, j, h * d);
                                for (std::size_t e = 0; e < d; ++e) {
                                    gvj[e] += a[j] * gi[e];
                                }
                            }
                        }
                        for (std::size_t j = 0; j < len; ++j) {
                            ds[j] = a[j] * (da[j] - dot);
                        }
                        if (gbias != nullptr) {
                            for (std::size_t j = 0; j < len; ++j) {
                                (*gbias)[h * offsets + (j + len - 1 - i)] += ds[j];
                            }
                        }
                        const double* qi = &qv.at(b, i, h * d);
                        for (std::size_t j = 0; j < len; ++j) {
                            const double sj = ds[j] * inv_sqrt_d;
                            if (gq != nullptr) {
                                const double* kj = &kv.at(b, j, h * d);
                                double* gqi = &gq->at(b, i, h * d);
                                for (std::size_t e = 0; e < d; ++e) {
                                    gqi[e] += sj * kj[e];
                                }
                            }
                            if (gk != nullptr) {
                                double* gkj = &gk->at(b, j, h * d);
                                for (std::size_t e = 0; e < d; ++e) {
                                    gkj[e] += sj * qi[e];
                                }
                            }
                        }
                    }
                }
            }
        });
}

Variable mean_abs_error(const Variable& prediction, const Tensor& target) {
    if (prediction.shape() != target.shape()) {
        throw ShapeError("mean_abs_error: prediction " + shape_string(prediction.shape()) +
                         " vs target " + shape_string(target.shape()));
    }
    const Tensor& p = prediction.value();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sum += std::abs(p[i] - target[i]);
    }
    const double n = static_cast<double>(p.size());
    return make_op(Tensor({1}, sum / n), {prediction}, [target, n](Node& self) {
        Tensor* g = input_grad(self, 0);
        if (g == nullptr) {
            return;
        }
        const Tensor& p = input_value(self, 0);
        const double scale = self.grad[0] / n;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double r = p[i] - target[i];
            (*g)[i] += r > 0 ? scale : (r < 0 ? -scale : 0.0);
        }
    });
}

}  // namespace dagevo::nn
