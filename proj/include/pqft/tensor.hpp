// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace pqft {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major array with an optional gradient slot. Model math runs on
// Tensor (f32); Tensor64 exists so finite-difference checks can shadow the
// same operations at double precision.
//
// BasicTensor is a shared handle: copies alias the same storage, which is what
// the tape needs to route gradients back to parameters. Use clone() for a deep
// copy.
template <class T>
class BasicTensor {
  public:
    using value_type = T;

    BasicTensor() = default;
    BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

    static BasicTensor zeros(Shape shape, bool requires_grad = false);
    static BasicTensor full(Shape shape, T value, bool requires_grad = false);
    static BasicTensor scalar(T value, bool requires_grad = false);

    bool defined() const noexcept { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    std::size_t rows() const;  // extent 0 of a rank-2 tensor
    std::size_t cols() const;  // extent 1 of a rank-2 tensor

    std::span<T> data();
    std::span<const T> data() const;
    T item() const;
    T at(std::size_t row, std::size_t col) const;

    bool requires_grad() const;
    void set_requires_grad(bool value);

    bool has_grad() const;
    std::span<const T> grad() const;
    // Allocates a zero gradient on first use.
    std::span<T> mutable_grad();
    void zero_grad();
    void clear_grad();

    BasicTensor clone() const;
    template <class U>
    BasicTensor<U> cast() const;
    const void* identity() const noexcept { return impl_.get(); }

  private:
    struct Impl {
        Shape shape;
        std::vector<T> data;
        std::vector<T> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <class T>
template <class U>
BasicTensor<U> BasicTensor<T>::cast() const {
    std::vector<U> converted(data().begin(), data().end());
    return BasicTensor<U>(shape(), std::move(converted), requires_grad());
}

// Ordered record of differentiable operations executed while the tape is the
// active one on the current thread. Constructing a Tape makes it active;
// destroying it restores the previously active tape. Ops run with no active
// tape are not recorded (inference mode).
class Tape {
  public:
    struct Entry {
        const void* output = nullptr;
        std::vector<const void*> inputs;  // the inputs that carry gradients
        std::function<void()> reset_output_grad;
        std::function<void()> backward;  // accumulates input grads from the output grad
    };

    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* current() noexcept;

    void record(Entry entry);
    // Replays backward rules in reverse order starting from the entry that
    // produced `loss`; `seed` sets the loss gradient to one.
    void backward(const void* loss, const std::function<void()>& seed);
    std::size_t size() const noexcept { return entries_.size(); }

  private:
    std::vector<Entry> entries_;
    Tape* previous_;
};

// Runs the backward rules of the active tape from a scalar loss. Leaf
// gradients accumulate across calls until zeroed.
template <class T>
void backward(const BasicTensor<T>& loss);

// ---- differentiable operations ----------------------------------------------

template <class T> using Scalar = std::type_identity_t<T>;

template <class T> BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T> BasicTensor<T> multiply(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T> BasicTensor<T> scale(const BasicTensor<T>& a, Scalar<T> factor);
template <class T> BasicTensor<T> sum(const BasicTensor<T>& a);

template <class T> BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);  // [m×k]·[k×n]
template <class T> BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w);  // x·wᵀ
template <class T> BasicTensor<T> transpose(const BasicTensor<T>& a);

template <class T> BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis);
template <class T> BasicTensor<T> gelu(const BasicTensor<T>& x);
template <class T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain, const BasicTensor<T>& bias,
                          Scalar<T> eps = Scalar<T>(1e-5));

// Mean over masked positions of -log softmax(logits[i])[targets[i]].
template <class T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, std::span<const int> targets,
                             std::span<const std::uint8_t> loss_mask);

template <class T> BasicTensor<T> embedding_lookup(const BasicTensor<T>& table, std::span<const int> ids);

// Concatenation along the sequence (row) axis.
template <class T> BasicTensor<T> concat_rows(std::span<const BasicTensor<T>> parts);
template <class T> BasicTensor<T> slice_rows(const BasicTensor<T>& x, std::size_t begin, std::size_t end);
template <class T> BasicTensor<T> gather_rows(const BasicTensor<T>& x, std::span<const std::size_t> rows);
template <class T> BasicTensor<T> concat_cols(std::span<const BasicTensor<T>> parts);
template <class T> BasicTensor<T> slice_cols(const BasicTensor<T>& x, std::size_t begin, std::size_t end);

// Replaces entries where allowed[i] == 0 with `fill`; gradient is zero there.
template <class T>
BasicTensor<T> masked_fill(const BasicTensor<T>& x, std::span<const std::uint8_t> allowed, Scalar<T> fill);

template <class T>
BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>& parts) {
    return concat_rows(std::span<const BasicTensor<T>>(parts));
}
template <class T>
BasicTensor<T> concat_cols(const std::vector<BasicTensor<T>>& parts) {
    return concat_cols(std::span<const BasicTensor<T>>(parts));
}

}  // namespace pqft
