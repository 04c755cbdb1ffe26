// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "pqft/error.hpp"

namespace pqft {

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << "x";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---- BasicTensor -------------------------------------------------------------

template <class T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad) : impl_(std::make_shared<Impl>()) {
    for (std::size_t extent : shape) {
        if (extent == 0) throw Error(ErrorKind::Dimension, "zero extent in shape " + shape_string(shape));
    }
    if (shape_numel(shape) != data.size()) {
        throw Error(ErrorKind::Dimension, "shape " + shape_string(shape) + " does not match " +
                                              std::to_string(data.size()) + " values");
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

template <class T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), T(0), requires_grad);
}

template <class T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
    std::vector<T> data(shape_numel(shape), value);
    return BasicTensor<T>(std::move(shape), std::move(data), requires_grad);
}

template <class T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
    return BasicTensor<T>({1}, {value}, requires_grad);
}

template <class T>
const Shape& BasicTensor<T>::shape() const { return impl_->shape; }
template <class T>
std::size_t BasicTensor<T>::numel() const { return impl_->data.size(); }

template <class T>
std::size_t BasicTensor<T>::rows() const {
    if (rank() != 2) throw Error(ErrorKind::Dimension, "expected rank-2 tensor, got " + shape_string(shape()));
    return impl_->shape[0];
}

template <class T>
std::size_t BasicTensor<T>::cols() const {
    if (rank() != 2) throw Error(ErrorKind::Dimension, "expected rank-2 tensor, got " + shape_string(shape()));
    return impl_->shape[1];
}

template <class T>
std::span<T> BasicTensor<T>::data() { return impl_->data; }
template <class T>
std::span<const T> BasicTensor<T>::data() const { return impl_->data; }

template <class T>
T BasicTensor<T>::item() const {
    if (numel() != 1) throw Error(ErrorKind::Contract, "item() on non-scalar " + shape_string(shape()));
    return impl_->data[0];
}

template <class T>
T BasicTensor<T>::at(std::size_t row, std::size_t col) const { return impl_->data[row * cols() + col]; }

template <class T>
bool BasicTensor<T>::requires_grad() const { return impl_->requires_grad; }
template <class T>
void BasicTensor<T>::set_requires_grad(bool value) { impl_->requires_grad = value; }
template <class T>
bool BasicTensor<T>::has_grad() const { return !impl_->grad.empty(); }
template <class T>
std::span<const T> BasicTensor<T>::grad() const { return impl_->grad; }

template <class T>
std::span<T> BasicTensor<T>::mutable_grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
    return impl_->grad;
}

template <class T>
void BasicTensor<T>::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <class T>
void BasicTensor<T>::clear_grad() {
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
}

template <class T>
BasicTensor<T> BasicTensor<T>::clone() const {
    BasicTensor<T> copy(impl_->shape, impl_->data, impl_->requires_grad);
    copy.impl_->grad = impl_->grad;
    return copy;
}

// ---- Tape --------------------------------------------------------------------

namespace {
thread_local Tape* active_tape = nullptr;
}

Tape::Tape() : previous_(active_tape) { active_tape = this; }
Tape::~Tape() { active_tape = previous_; }
Tape* Tape::current() noexcept { return active_tape; }

void Tape::record(Entry entry) { entries_.push_back(std::move(entry)); }

void Tape::backward(const void* loss, const std::function<void()>& seed) {
    const auto producer =
        std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.output == loss; });
    if (producer == entries_.end()) {
        throw Error(ErrorKind::Contract, "loss was not produced on the current tape");
    }
    // Intermediate gradients restart from zero on every pass so that leaf
    // gradients accumulate exactly once per call.
    for (Entry& e : entries_) e.reset_output_grad();
    seed();

    std::unordered_set<const void*> reachable{loss};
    for (auto it = std::make_reverse_iterator(producer + 1); it != entries_.rend(); ++it) {
        if (!reachable.contains(it->output)) continue;
        it->backward();
        reachable.insert(it->inputs.begin(), it->inputs.end());
    }
}

template <class T>
void backward(const BasicTensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw Error(ErrorKind::Contract, "backward() needs a scalar loss");
    }
    Tape* tape = Tape::current();
    if (tape == nullptr) throw Error(ErrorKind::Contract, "backward() called with no active tape");
    BasicTensor<T> seeded = loss;
    tape->backward(loss.identity(), [seeded]() mutable { seeded.mutable_grad()[0] = T(1); });
}

// ---- helpers -----------------------------------------------------------------

namespace {

template <class T>
using BackwardRule = std::function<void(const BasicTensor<T>& output, std::span<BasicTensor<T>> inputs)>;

// Records `out` on the active tape when any input needs a gradient.
template <class T>
void record(std::vector<BasicTensor<T>> inputs, BasicTensor<T>& out, std::type_identity_t<BackwardRule<T>> rule) {
    Tape* tape = Tape::current();
    if (tape == nullptr) return;
    Tape::Entry entry;
    for (const BasicTensor<T>& in : inputs) {
        if (in.requires_grad()) entry.inputs.push_back(in.identity());
    }
    if (entry.inputs.empty()) return;
    out.set_requires_grad(true);
    entry.output = out.identity();
    entry.reset_output_grad = [out]() mutable {
        out.mutable_grad();
        out.zero_grad();
    };
    entry.backward = [out, inputs = std::move(inputs), rule = std::move(rule)]() mutable { rule(out, inputs); };
    tape->record(std::move(entry));
}

// Dot product with eight interleaved partial sums so the compiler can keep the
// loop in vector registers; the summation order is fixed, so results stay
// deterministic.
template <class T>
T dot(const T* a, const T* b, std::size_t n) {
    T lanes[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
    }
    T acc = ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5])) + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7]));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <class T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw Error(ErrorKind::Dimension, std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                                              shape_string(b.shape()) + " differ");
    }
}

template <class T>
void require_rank2(const BasicTensor<T>& a, const char* op) {
    if (a.rank() != 2) {
        throw Error(ErrorKind::Dimension, std::string(op) + ": expected rank-2 tensor, got " + shape_string(a.shape()));
    }
}

}  // namespace

// ---- elementwise -------------------------------------------------------------

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_same_shape(a, b, "add");
    std::vector<T> out(a.numel());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    BasicTensor<T> result(a.shape(), std::move(out));
    record({a, b}, result, [](const BasicTensor<T>& o, std::span<BasicTensor<T>> in) {
        auto g = o.grad();
        for (BasicTensor<T>& t : in) {
            if (!t.requires_grad()) continue;
            auto dt = t.mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) dt[i] += g[i];
        }
    });
    return result;
}

template <class T>
BasicTensor<T> multiply(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_same_shape(a, b, "multiply");
    std::vector<T> out(a.numel());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    BasicTensor<T> result(a.shape(), std::move(out));
    record({a, b}, result, [](const BasicTensor<T>& o, std::span<BasicTensor<T>> in) {
        auto g = o.grad();
        for (std::size_t k = 0; k < 2; ++k) {
            if (!in[k].requires_grad()) continue;
            auto other = in[1 - k].data();
            auto dt = in[k].mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) dt[i] += g[i] * other[i];
        }
    });
    return result;
}

template <class T>
BasicTensor<T> scale(const BasicTensor<T>& a, Scalar<T> factor) {
    std::vector<T> out(a.numel());
    auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    BasicTensor<T> result(a.shape(), std::move(out));
    record({a}, result, [factor](const BasicTensor<T>& o, std::span<BasicTensor<T>> in) {
        auto g = o.grad();
        auto dt = in[0].mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) dt[i] += g[i] * factor;
    });
    return result;
}

template <class T>
BasicTensor<T> sum(const BasicTensor<T>& a) {
    double total = 0.0;
    for (T v : a.data()) total += v;
    BasicTensor<T> result = BasicTensor<T>::scalar(static_cast<T>(total));
    record({a}, result, [](const BasicTensor<T>& o, std::span<BasicTensor<T>> in) {
        const T g = o.grad()[0];
        for (T& d : in[0].mutable_grad()) d += g;
    });
    return result;
}

// ---- matrix products -----------------------------------------------------------

template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw Error(ErrorKind::Dimension,
                    "matmul: inner extents differ for " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
    }
    std::vector<T> out(m * n, T(0));
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        T* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T s = pa[i * k + p];
            const T* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
        }
    }
    BasicTensor<T> result({m, n}, std::move(out));
    record({a, b}, result, [m, k, n](const BasicTensor<T>& o, std::span<BasicTensor<T>> in) {
        const T* g = o.grad().data();
        const T* pa = in[0].data().data();
        const T* pb = in[1].data().data();
        if (in[0].requires_grad()) {
            T* da = in[0].mutable_grad().data();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    da[i * k + p] += dot(g + i * n, pb + p * n, n);
                }
            }
        }
        if (in[1].requires_grad()) {
            T* db = in[1].mutable_grad().data();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const T s = pa[i * k + p];
                    const T* grow = g + i * n;
                    T* drow = db + p * n;
                    for (std::size_t j = 0; j < n; ++j) drow[j] += s * grow[j];
                }
            }
        }
    });
    return result;
}

template <class T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w) {
    require_rank2(x, "linear");
    require_rank2(w, "linear");
    const std::size_t m = x.rows(), k = x.cols(), n = w.rows();
    if (w.cols() != k) {
        throw Error(ErrorKind::Dimension,
                    "linear: input " + shape_string(x.shape()) + " incompatible with weight " + shape_string(w.shape()));
    }
    std::vector<T> out(m * n);
    const T* px = x.data().data();
    const T* pw = w.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        const T* xrow = px + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = dot(xrow, pw + j * k, k);
        }
    }
    BasicTensor<T> result({m, n}, std::move(out));
    record({x, w}, result, [m, k, n](const BasicTensor<T>& o, std::span<BasicTensor<T>> in) {
        const T* g = o.grad().data();
        const T* px = in[0].data().data();
        const T* pw = in[1].data().data();
        if (in[0].requires_grad()) {
            T* dx = in[0].mutable_grad().data();
            for (std::size_t i = 0; i < m; ++i) {
                T* drow = dx + i * k;
                for (std::size_t j = 0; j < n; ++j) {
                    const T s = g[i * n + j];
                    const T* wrow = pw + j * k;
                    for (std::size_t p = 0; p < k; ++p) drow[p] += s * wrow[p];
                }
            }
        }
        if (in[1].requires_grad()) {
            T* dw = in[1].mutable_grad().data();
            for (std::size_t i = 0; i < m; ++i) {
                const T* xrow = px + i * k;
                for (std::size_t j = 0; j < n; ++j) {
                    const T s = g[i * n + j];
                    T* drow = dw + j * k;
                    for (std::size_t p = 0; p < k; ++p) drow[p] += s * xrow[p];
                }
            }
        }
    });
    return result;
}

template <class T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
    require_rank2(a, "transpose");
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<T> out(m * n);
    auto x = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
    BasicTensor<T> result({n, m}, std::move(out));
    record({a}, result, [m, n](const BasicTensor<T>& o, std::span<BasicTensor<T>> in) {
        auto g = o.grad();
        auto d = in[0].mutable_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) d[i * n + j] += g[j * m + i];
    });
    return result;
}

// ---- nonlinearities ----------------------------------------------------------

template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis) {
    const Shape& shape = x.shape();
    if (axis >= shape.size()) {
        throw Error(ErrorKind::Dimension, "softmax: axis " + std::to_string(axis) + " invalid for " + shape_string(shape));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
    const std::size_t len = shape[axis];

    auto in = x.data();
    std::vector<T> out(in.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t s = 0; s < inner; ++s) {
            const std::size_t base = o * len * inner + s;
            T hi = in[base];
            for (std::size_t i = 1; i < len; ++i) hi = std::max(hi, in[base + i * inner]);
            double total = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                const T e = std::exp(in[base + i * inner] - hi);
                out[base + i * inner] = e;
                total += e;
            }
            const T inv = static_cast<T>(1.0 / total);
            for (std::size_t i = 0; i < len; ++i) out[base + i * inner] *= inv;
        }
    }
    BasicTensor<T> result(shape, std::move(out));
    record({x}, result, [outer, inner, len](const BasicTensor<T>& o, std::span<BasicTensor<T>> ins) {
        auto y = o.data();
        auto g = o.grad();
        auto d = ins[0].mutable_grad();
        for (std::size_t a = 0; a < outer; ++a) {
            for (std::size_t s = 0; s < inner; ++s) {
                const std::size_t base = a * len * inner + s;
                double dot = 0.0;
                for (std::size_t i = 0; i < len; ++i) dot += static_cast<double>(g[base + i * inner]) * y[base + i * inner];
                const T fdot = static_cast<T>(dot);
                for (std::size_t i = 0; i < len; ++i) {
                    const std::size_t idx = base + i * inner;
                    d[idx] += y[idx] * (g[idx] - fdot);
                }
            }
        }
    });
    return result;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluK = 0.044715;
}  // namespace

template <class T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
    auto in = x.data();
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const T v = in[i];
        out[i] = T(0.5) * v * (T(1) + std::tanh(T(kGeluC) * (v + T(kGeluK) * v * v * v)));
    }
    BasicTensor<T> result(x.shape(), std::move(out));
    record({x}, result, [](const BasicTensor<T>& o, std::span<BasicTensor<T>> ins) {
        auto g = o.grad();
        auto v = ins[0].data();
        auto d = ins[0].mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T u = v[i];
            const T t = std::tanh(T(kGeluC) * (u + T(kGeluK) * u * u * u));
            const T dt = (T(1) - t * t) * T(kGeluC) * (T(1) + T(3) * T(kGeluK) * u * u);
            d[i] += g[i] * (T(0.5) * (T(1) + t) + T(0.5) * u * dt);
        }
    });
    return result;
}

template <class T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain, const BasicTensor<T>& bias, Scalar<T> eps) {
    require_rank2(x, "layer_norm");
    const std::size_t rows = x.rows(), width = x.cols();
    if (gain.numel() != width || bias.numel() != width) {
        throw Error(ErrorKind::Dimension, "layer_norm: gain/bias " + shape_string(gain.shape()) + "/" +
                                              shape_string(bias.shape()) + " do not match width " +
                                              std::to_string(width));
    }
    auto in = x.data();
    auto gv = gain.data();
    auto bv = bias.data();
    std::vector<T> out(in.size());
    std::vector<T> normalized(in.size());
    std::vector<T> rstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = in.data() + r * width;
        double mean = 0.0;
        for (std::size_t c = 0; c < width; ++c) mean += row[c];
        mean /= static_cast<double>(width);
        double var = 0.0;
        for (std::size_t c = 0; c < width; ++c) {
            const double dev = row[c] - mean;
            var += dev * dev;
        }
        var /= static_cast<double>(width);
        const T inv = static_cast<T>(1.0 / std::sqrt(var + eps));
        rstd[r] = inv;
        for (std::size_t c = 0; c < width; ++c) {
            const T xhat = static_cast<T>(row[c] - mean) * inv;
            normalized[r * width + c] = xhat;
            out[r * width + c] = xhat * gv[c] + bv[c];
        }
    }
    BasicTensor<T> result(x.shape(), std::move(out));
    record({x, gain, bias}, result,
           [rows, width, normalized = std::move(normalized), rstd = std::move(rstd)](const BasicTensor<T>& o,
                                                                                       std::span<BasicTensor<T>> ins) {
               auto g = o.grad();
               auto gv = ins[1].data();
               if (ins[1].requires_grad()) {
                   auto dg = ins[1].mutable_grad();
                   for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t c = 0; c < width; ++c) dg[c] += g[r * width + c] * normalized[r * width + c];
               }
               if (ins[2].requires_grad()) {
                   auto db = ins[2].mutable_grad();
                   for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t c = 0; c < width; ++c) db[c] += g[r * width + c];
               }
               if (ins[0].requires_grad()) {
                   auto dx = ins[0].mutable_grad();
                   for (std::size_t r = 0; r < rows; ++r) {
                       double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                       for (std::size_t c = 0; c < width; ++c) {
                           const double dxhat = static_cast<double>(g[r * width + c]) * gv[c];
                           mean_dxhat += dxhat;
                           mean_dxhat_xhat += dxhat * normalized[r * width + c];
                       }
                       mean_dxhat /= static_cast<double>(width);
                       mean_dxhat_xhat /= static_cast<double>(width);
                       for (std::size_t c = 0; c < width; ++c) {
                           const double dxhat = static_cast<double>(g[r * width + c]) * gv[c];
                           dx[r * width + c] += static_cast<T>(
                               rstd[r] * (dxhat - mean_dxhat - normalized[r * width + c] * mean_dxhat_xhat));
                       }
                   }
               }
           });
    return result;
}

// ---- loss --------------------------------------------------------------------

template <class T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, std::span<const int> targets, std::span<const std::uint8_t> loss_mask) {
    require_rank2(logits, "cross_entropy");
    const std::size_t t = logits.rows(), v = logits.cols();
    if (targets.size() != t || loss_mask.size() != t) {
        throw Error(ErrorKind::Dimension, "cross_entropy: logits " + shape_string(logits.shape()) + " with " +
                                              std::to_string(targets.size()) + " targets and " +
                                              std::to_string(loss_mask.size()) + " mask entries");
    }
    std::size_t count = 0;
    for (std::size_t i = 0; i < t; ++i) {
        if (!loss_mask[i]) continue;
        if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) {
            throw Error(ErrorKind::Contract, "cross_entropy: target id " + std::to_string(targets[i]) +
                                                 " outside vocabulary of " + std::to_string(v));
        }
        ++count;
    }
    if (count == 0) throw Error(ErrorKind::DegenerateBatch, "cross_entropy: loss mask selects no positions");

    auto in = logits.data();
    std::vector<T> probs(in.size(), T(0));
    double total = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        if (!loss_mask[i]) continue;
        const T* row = in.data() + i * v;
        const T hi = *std::max_element(row, row + v);
        double z = 0.0;
        for (std::size_t j = 0; j < v; ++j) z += std::exp(static_cast<double>(row[j]) - hi);
        const double log_z = hi + std::log(z);
        total += log_z - row[targets[i]];
        for (std::size_t j = 0; j < v; ++j) probs[i * v + j] = static_cast<T>(std::exp(row[j] - log_z));
    }
    BasicTensor<T> result = BasicTensor<T>::scalar(static_cast<T>(total / static_cast<double>(count)));
    std::vector<int> tgt(targets.begin(), targets.end());
    std::vector<std::uint8_t> mask(loss_mask.begin(), loss_mask.end());
    record({logits}, result,
           [t, v, count, probs = std::move(probs), tgt = std::move(tgt), mask = std::move(mask)](
               const BasicTensor<T>& o, std::span<BasicTensor<T>> ins) {
               const T g = o.grad()[0] / static_cast<T>(count);
               auto d = ins[0].mutable_grad();
               for (std::size_t i = 0; i < t; ++i) {
                   if (!mask[i]) continue;
                   for (std::size_t j = 0; j < v; ++j) d[i * v + j] += g * probs[i * v + j];
                   d[i * v + static_cast<std::size_t>(tgt[i])] -= g;
               }
           });
    return result;
}

// ---- indexing ----------------------------------------------------------------

template <class T>
BasicTensor<T> embedding_lookup(const BasicTensor<T>& table, std::span<const int> ids) {
    require_rank2(table, "embedding_lookup");
    const std::size_t vocab = table.rows(), width = table.cols();
    if (ids.empty()) throw Error(ErrorKind::Dimension, "embedding_lookup: empty id sequence");
    std::vector<T> out(ids.size() * width);
    auto src = table.data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
            throw Error(ErrorKind::Vocabulary,
                        "token id " + std::to_string(ids[i]) + " outside vocabulary of " + std::to_string(vocab));
        }
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(ids[i] * width), width, out.begin() + static_cast<std::ptrdiff_t>(i * width));
    }
    BasicTensor<T> result({ids.size(), width}, std::move(out));
    record({table}, result, [width, idv = std::vector<int>(ids.begin(), ids.end())](const BasicTensor<T>& o, std::span<BasicTensor<T>> ins) {
        auto g = o.grad();
        auto d = ins[0].mutable_grad();
        for (std::size_t i = 0; i < idv.size(); ++i) {
            const std::size_t base = static_cast<std::size_t>(idv[i]) * width;
            for (std::size_t c = 0; c < width; ++c) d[base + c] += g[i * width + c];
        }
    });
    return result;
}

template <class T>
BasicTensor<T> concat_rows(std::span<const BasicTensor<T>> parts) {
    if (parts.empty()) throw Error(ErrorKind::Dimension, "concat_rows: no inputs");
    const std::size_t width = parts[0].cols();
    std::size_t total = 0;
    for (const BasicTensor<T>& p : parts) {
        if (p.cols() != width) {
            throw Error(ErrorKind::Dimension, "concat_rows: widths " + shape_string(parts[0].shape()) + " and " +
                                                  shape_string(p.shape()) + " differ");
        }
        total += p.rows();
    }
    std::vector<T> out;
    out.reserve(total * width);
    for (const BasicTensor<T>& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    BasicTensor<T> result({total, width}, std::move(out));
    record(std::vector<BasicTensor<T>>(parts.begin(), parts.end()), result, [](const BasicTensor<T>& o, std::span<BasicTensor<T>> ins) {
        auto g = o.grad();
        std::size_t offset = 0;
        for (BasicTensor<T>& p : ins) {
            const std::size_t n = p.numel();
            if (p.requires_grad()) {
                auto d = p.mutable_grad();
                for (std::size_t i = 0; i < n; ++i) d[i] += g[offset + i];
            }
            offset += n;
        }
    });
    return result;
}

template <class T>
BasicTensor<T> slice_rows(const BasicTensor<T>& x, std::size_t begin, std::size_t end) {
    if (begin >= end || end > x.rows()) {
        throw Error(ErrorKind::Dimension, "slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                              ") invalid for " + shape_string(x.shape()));
    }
    const std::size_t width = x.cols();
    auto src = x.data();
    std::vector<T> out(src.begin() + static_cast<std::ptrdiff_t>(begin * width),
                           src.begin() + static_cast<std::ptrdiff_t>(end * width));
    BasicTensor<T> result({end - begin, width}, std::move(out));
    record({x}, result, [begin, width](const BasicTensor<T>& o, std::span<BasicTensor<T>> ins) {
        auto g = o.grad();
        auto d = ins[0].mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) d[begin * width + i] += g[i];
    });
    return result;
}

template <class T>
BasicTensor<T> gather_rows(const BasicTensor<T>& x, std::span<const std::size_t> rows) {
    const std::size_t width = x.cols(), height = x.rows();
    if (rows.empty()) throw Error(ErrorKind::Dimension, "gather_rows: no rows selected");
    std::vector<T> out(rows.size() * width);
    auto src = x.data();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= height) {
            throw Error(ErrorKind::Dimension, "gather_rows: row " + std::to_string(rows[i]) + " outside " +
                                                  shape_string(x.shape()));
        }
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(rows[i] * width), width,
                    out.begin() + static_cast<std::ptrdiff_t>(i * width));
    }
    BasicTensor<T> result({rows.size(), width}, std::move(out));
    record({x}, result, [width, idx = std::vector<std::size_t>(rows.begin(), rows.end())](const BasicTensor<T>& o,
                                                                                       std::span<BasicTensor<T>> ins) {
        auto g = o.grad();
        auto d = ins[0].mutable_grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t c = 0; c < width; ++c) d[idx[i] * width + c] += g[i * width + c];
    });
    return result;
}

template <class T>
BasicTensor<T> concat_cols(std::span<const BasicTensor<T>> parts) {
    if (parts.empty()) throw Error(ErrorKind::Dimension, "concat_cols: no inputs");
    const std::size_t height = parts[0].rows();
    std::size_t total = 0;
    for (const BasicTensor<T>& p : parts) {
        if (p.rows() != height) {
            throw Error(ErrorKind::Dimension, "concat_cols: heights " + shape_string(parts[0].shape()) + " and " +
                                                  shape_string(p.shape()) + " differ");
        }
        total += p.cols();
    }
    std::vector<T> out(height * total);
    std::size_t offset = 0;
    for (const BasicTensor<T>& p : parts) {
        const std::size_t w = p.cols();
        auto src = p.data();
        for (std::size_t r = 0; r < height; ++r)
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                        out.begin() + static_cast<std::ptrdiff_t>(r * total + offset));
        offset += w;
    }
    BasicTensor<T> result({height, total}, std::move(out));
    record(std::vector<BasicTensor<T>>(parts.begin(), parts.end()), result, [height, total](const BasicTensor<T>& o, std::span<BasicTensor<T>> ins) {
        auto g = o.grad();
        std::size_t offset = 0;
        for (BasicTensor<T>& p : ins) {
            const std::size_t w = p.cols();
            if (p.requires_grad()) {
                auto d = p.mutable_grad();
                for (std::size_t r = 0; r < height; ++r)
                    for (std::size_t c = 0; c < w; ++c) d[r * w + c] += g[r * total + offset + c];
            }
            offset += w;
        }
    });
    return result;
}

template <class T>
BasicTensor<T> slice_cols(const BasicTensor<T>& x, std::size_t begin, std::size_t end) {
    const std::size_t height = x.rows(), width = x.cols();
    if (begin >= end || end > width) {
        throw Error(ErrorKind::Dimension, "slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                              ") invalid for " + shape_string(x.shape()));
    }
    const std::size_t w = end - begin;
    std::vector<T> out(height * w);
    auto src = x.data();
    for (std::size_t r = 0; r < height; ++r)
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(r * width + begin), w,
                    out.begin() + static_cast<std::ptrdiff_t>(r * w));
    BasicTensor<T> result({height, w}, std::move(out));
    record({x}, result, [height, width, begin, w](const BasicTensor<T>& o, std::span<BasicTensor<T>> ins) {
        auto g = o.grad();
        auto d = ins[0].mutable_grad();
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < w; ++c) d[r * width + begin + c] += g[r * w + c];
    });
    return result;
}

template <class T>
BasicTensor<T> masked_fill(const BasicTensor<T>& x, std::span<const std::uint8_t> allowed, Scalar<T> fill) {
    if (allowed.size() != x.numel()) {
        throw Error(ErrorKind::Dimension, "masked_fill: mask of " + std::to_string(allowed.size()) +
                                              " entries for " + shape_string(x.shape()));
    }
    auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = allowed[i] ? src[i] : fill;
    BasicTensor<T> result(x.shape(), std::move(out));
    record({x}, result, [mask = std::vector<std::uint8_t>(allowed.begin(), allowed.end())](const BasicTensor<T>& o,
                                                                                         std::span<BasicTensor<T>> ins) {
        auto g = o.grad();
        auto d = ins[0].mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (mask[i]) d[i] += g[i];
    });
    return result;
}

// ---- instantiations ----------------------------------------------------------

#define PQFT_INSTANTIATE_TENSOR(T)                                                                            \
    template class BasicTensor<T>;                                                                            \
    template void backward(const BasicTensor<T>&);                                                            \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                \
    template BasicTensor<T> multiply(const BasicTensor<T>&, const BasicTensor<T>&);                           \
    template BasicTensor<T> scale(const BasicTensor<T>&, Scalar<T>);                                          \
    template BasicTensor<T> sum(const BasicTensor<T>&);                                                       \
    template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                             \
    template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&);                             \
    template BasicTensor<T> transpose(const BasicTensor<T>&);                                                 \
    template BasicTensor<T> softmax(const BasicTensor<T>&, std::size_t);                                      \
    template BasicTensor<T> gelu(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,   \
                                       Scalar<T>);                                                            \
    template BasicTensor<T> cross_entropy(const BasicTensor<T>&, std::span<const int>,                        \
                                          std::span<const std::uint8_t>);                                     \
    template BasicTensor<T> embedding_lookup(const BasicTensor<T>&, std::span<const int>);                    \
    template BasicTensor<T> concat_rows(std::span<const BasicTensor<T>>);                                     \
    template BasicTensor<T> slice_rows(const BasicTensor<T>&, std::size_t, std::size_t);                      \
    template BasicTensor<T> gather_rows(const BasicTensor<T>&, std::span<const std::size_t>);                 \
    template BasicTensor<T> concat_cols(std::span<const BasicTensor<T>>);                                     \
    template BasicTensor<T> slice_cols(const BasicTensor<T>&, std::size_t, std::size_t);                      \
    template BasicTensor<T> masked_fill(const BasicTensor<T>&, std::span<const std::uint8_t>, Scalar<T>);

PQFT_INSTANTIATE_TENSOR(float)
PQFT_INSTANTIATE_TENSOR(double)

#undef PQFT_INSTANTIATE_TENSOR

}  // namespace pqft
