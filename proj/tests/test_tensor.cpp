// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gradcheck.hpp"
#include "pqft/error.hpp"
#include "pqft/tensor.hpp"

using namespace pqft;
using pqft::testing::gradcheck;
using pqft::testing::random_tensor;

namespace {

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::size_t extent(Rng& rng) { return 1 + static_cast<std::size_t>(rng.below(8)); }

}  // namespace

TEST_CASE("matmul: identity, hand arithmetic, shape errors") {
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor b({2, 2}, {3, 1, 2, 4});
    CHECK(values(matmul(eye, b)) == std::vector<float>{3, 1, 2, 4});

    Tensor row({1, 2}, {1, 2});
    Tensor col({2, 1}, {3, 4});
    CHECK(values(matmul(row, col)) == std::vector<float>{11});

    try {
        matmul(row, Tensor::zeros({3, 1}));
        FAIL("expected a dimension error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Dimension);
        const std::string msg = e.what();
        CHECK(msg.find("[1x2]") != std::string::npos);
        CHECK(msg.find("[3x1]") != std::string::npos);
    }
}

TEST_CASE("softmax: closed forms, normalization and shift invariance") {
    CHECK(values(softmax(Tensor({2}, {0, 0}), 0)) == std::vector<float>{0.5f, 0.5f});
    auto q = values(softmax(Tensor({2}, {0.0f, std::log(3.0f)}), 0));
    CHECK(q[0] == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(q[1] == doctest::Approx(0.75).epsilon(1e-6));

    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t r = extent(rng), c = extent(rng);
        Tensor x = random_tensor({r, c}, rng, 3.0, false);
        const float shift = static_cast<float>(rng.normal() * 10.0);
        std::vector<float> shifted = values(x);
        for (float& v : shifted) v += shift;
        auto a = values(softmax(x, 1));
        auto b = values(softmax(Tensor({r, c}, shifted), 1));
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-6f);
        for (std::size_t row = 0; row < r; ++row) {
            double total = 0.0;
            for (std::size_t col = 0; col < c; ++col) total += a[row * c + col];
            CHECK(std::abs(total - 1.0) <= 1e-6);
        }
    }
    CHECK_THROWS_AS(softmax(Tensor({2}, {0, 0}), 1), Error);
}

TEST_CASE("softmax along a leading axis matches the transposed last-axis result") {
    Rng rng(11);
    Tensor x = random_tensor({3, 5}, rng, 1.0, false);
    auto by_col = values(softmax(x, 0));
    auto by_row_t = values(transpose(softmax(transpose(x), 1)));
    for (std::size_t i = 0; i < by_col.size(); ++i) CHECK(by_col[i] == doctest::Approx(by_row_t[i]).epsilon(1e-6));
}

TEST_CASE("cross_entropy: closed forms, masking and degenerate batches") {
    const std::vector<int> t0{0};
    const std::vector<std::uint8_t> on{1};
    CHECK(cross_entropy(Tensor({1, 2}, {0, 0}), t0, on).item() == doctest::Approx(std::numbers::ln2).epsilon(1e-6));
    CHECK(cross_entropy(Tensor({1, 2}, {1000, 0}), t0, on).item() == doctest::Approx(0.0).epsilon(1e-6));

    const std::vector<int> targets{1, 0};
    const std::vector<std::uint8_t> mask{1, 0};
    const float a = cross_entropy(Tensor({2, 3}, {0.1f, 0.2f, 0.3f, 5, 6, 7}), targets, mask).item();
    const float b = cross_entropy(Tensor({2, 3}, {0.1f, 0.2f, 0.3f, -9, 1, 42}), targets, mask).item();
    CHECK(a == b);

    const std::vector<std::uint8_t> none{0, 0};
    try {
        cross_entropy(Tensor({2, 3}, std::vector<float>(6, 0.0f)), targets, none);
        FAIL("expected degenerate batch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateBatch);
    }
    const std::vector<int> bad{3, 0};
    CHECK_THROWS_AS(cross_entropy(Tensor({2, 3}, std::vector<float>(6, 0.0f)), bad, mask), Error);
}

TEST_CASE("backward: hand derivatives, accumulation and contract errors") {
    Tensor x({3}, {1, 2, 3}, true);
    {
        Tape tape;
        backward(sum(x));
    }
    CHECK(values(Tensor({3}, std::vector<float>(x.grad().begin(), x.grad().end()))) == std::vector<float>{1, 1, 1});

    Tensor y({2}, {1, 2}, true);
    {
        Tape tape;
        Tensor loss = sum(multiply(y, y));
        backward(loss);
        CHECK(std::vector<float>(y.grad().begin(), y.grad().end()) == std::vector<float>{2, 4});
        backward(loss);
        CHECK(std::vector<float>(y.grad().begin(), y.grad().end()) == std::vector<float>{4, 8});
    }

    {
        Tape tape;
        Tensor z = multiply(y, y);
        CHECK_THROWS_AS(backward(z), Error);
        Tensor stray = Tensor::scalar(1.0f, true);
        CHECK_THROWS_AS(backward(stray), Error);
    }
    CHECK_THROWS_AS(backward(sum(y)), Error);  // no active tape
}

TEST_CASE("backward on one tape twice accumulates exactly twice the single pass") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = random_tensor({extent(rng), 4}, rng);
        Tensor b = random_tensor({4, extent(rng)}, rng);
        std::vector<int> targets(a.rows());
        std::vector<std::uint8_t> mask(a.rows(), 1);
        for (int& t : targets) t = static_cast<int>(rng.below(b.cols()));
        Tape tape;
        Tensor loss = cross_entropy(softmax(matmul(a, b), 1), targets, mask);
        backward(loss);
        std::vector<float> once(a.grad().begin(), a.grad().end());
        backward(loss);
        for (std::size_t i = 0; i < once.size(); ++i) CHECK(a.grad()[i] == 2.0f * once[i]);
    }
}

TEST_CASE("ops outside a tape are not recorded") {
    Tensor x({2}, {1, 2}, true);
    Tensor y = multiply(x, x);
    CHECK_FALSE(y.requires_grad());
    Tape tape;
    CHECK(tape.size() == 0);
    Tensor z = multiply(x, x);
    CHECK(z.requires_grad());
    CHECK(tape.size() == 1);
}

TEST_CASE("finite-difference agreement for every differentiable op") {
    Rng rng(2026);
    constexpr int kTrials = 100;
    constexpr double kTol = 1e-3;
    using Inputs = std::vector<Tensor>;

    auto check = [&](const char* name, auto make_inputs, auto fn) {
        double worst = 0.0;
        for (int trial = 0; trial < kTrials; ++trial) {
            Inputs in = make_inputs();
            auto result = gradcheck(fn, in, rng);
            worst = std::max(worst, result.max_relative_error);
        }
        const std::string label = std::string(name) + " worst relative error " + std::to_string(worst);
        INFO(label);
        CHECK(worst < kTol);
    };

    check("add", [&] { Shape s{extent(rng), extent(rng)}; return Inputs{random_tensor(s, rng), random_tensor(s, rng)}; },
          [](auto& in) { return add(in[0], in[1]); });
    check("multiply", [&] { Shape s{extent(rng), extent(rng)}; return Inputs{random_tensor(s, rng), random_tensor(s, rng)}; },
          [](auto& in) { return multiply(in[0], in[1]); });
    check("scale", [&] { return Inputs{random_tensor({extent(rng), extent(rng)}, rng)}; },
          [](auto& in) { return scale(in[0], -1.7); });
    check("sum", [&] { return Inputs{random_tensor({extent(rng), extent(rng)}, rng)}; },
          [](auto& in) { return sum(in[0]); });
    check("matmul", [&] { const auto k = extent(rng); return Inputs{random_tensor({extent(rng), k}, rng), random_tensor({k, extent(rng)}, rng)}; },
          [](auto& in) { return matmul(in[0], in[1]); });
    check("linear", [&] { const auto k = extent(rng); return Inputs{random_tensor({extent(rng), k}, rng), random_tensor({extent(rng), k}, rng)}; },
          [](auto& in) { return linear(in[0], in[1]); });
    check("transpose", [&] { return Inputs{random_tensor({extent(rng), extent(rng)}, rng)}; },
          [](auto& in) { return transpose(in[0]); });
    check("softmax", [&] { return Inputs{random_tensor({extent(rng), extent(rng)}, rng, 2.0)}; },
          [](auto& in) { return softmax(in[0], 1); });
    check("softmax axis 0", [&] { return Inputs{random_tensor({extent(rng), extent(rng)}, rng, 2.0)}; },
          [](auto& in) { return softmax(in[0], 0); });
    check("gelu", [&] { return Inputs{random_tensor({extent(rng), extent(rng)}, rng, 2.0)}; },
          [](auto& in) { return gelu(in[0]); });
    check("layer_norm", [&] {
              const auto w = 3 + rng.below(6);  // width 2 normalizes to a constant ±1
              return Inputs{random_tensor({extent(rng), w}, rng), random_tensor({w}, rng), random_tensor({w}, rng)};
          },
          [](auto& in) { return layer_norm(in[0], in[1], in[2]); });
    check("cross_entropy", [&] { return Inputs{random_tensor({extent(rng), 1 + extent(rng)}, rng, 2.0)}; },
          [&](auto& in) {
              const std::size_t t = in[0].rows(), v = in[0].cols();
              std::vector<int> targets(t);
              std::vector<std::uint8_t> mask(t);
              for (std::size_t i = 0; i < t; ++i) {
                  targets[i] = static_cast<int>((i * 7 + 3) % v);
                  mask[i] = (i % 3 != 1) ? 1 : 0;
              }
              return cross_entropy(in[0], targets, mask);
          });
    check("embedding_lookup", [&] { return Inputs{random_tensor({extent(rng), extent(rng)}, rng)}; },
          [](auto& in) {
              const int vocab = static_cast<int>(in[0].rows());
              std::vector<int> ids{0, vocab - 1, vocab / 2, 0};
              return embedding_lookup(in[0], ids);
          });
    check("concat_rows", [&] { const auto w = extent(rng); return Inputs{random_tensor({extent(rng), w}, rng), random_tensor({extent(rng), w}, rng)}; },
          [](auto& in) { return concat_rows(in); });
    check("slice_rows", [&] { return Inputs{random_tensor({1 + extent(rng), extent(rng)}, rng)}; },
          [](auto& in) { return slice_rows(in[0], 1, in[0].rows()); });
    check("gather_rows", [&] { return Inputs{random_tensor({extent(rng), extent(rng)}, rng)}; },
          [](auto& in) {
              std::vector<std::size_t> rows{in[0].rows() - 1, 0, in[0].rows() - 1};
              return gather_rows(in[0], rows);
          });
    check("concat_cols", [&] { const auto h = extent(rng); return Inputs{random_tensor({h, extent(rng)}, rng), random_tensor({h, extent(rng)}, rng)}; },
          [](auto& in) { return concat_cols(in); });
    check("slice_cols", [&] { return Inputs{random_tensor({extent(rng), 1 + extent(rng)}, rng)}; },
          [](auto& in) { return slice_cols(in[0], 1, in[0].cols()); });
    check("masked_fill", [&] { const auto n = extent(rng); return Inputs{random_tensor({n, n}, rng)}; },
          [](auto& in) {
              const std::size_t n = in[0].rows();
              std::vector<std::uint8_t> allowed(n * n);
              for (std::size_t i = 0; i < n; ++i)
                  for (std::size_t j = 0; j < n; ++j) allowed[i * n + j] = j <= i;
              return masked_fill(in[0], allowed, -1e9);
          });
    check("composite matmul+softmax+cross_entropy",
          [&] { const auto k = extent(rng); return Inputs{random_tensor({extent(rng), k}, rng), random_tensor({k, 1 + extent(rng)}, rng)}; },
          [](auto& in) {
              auto logits = matmul(in[0], in[1]);
              std::vector<int> targets(logits.rows());
              for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<int>(i % logits.cols());
              std::vector<std::uint8_t> mask(logits.rows(), 1);
              return cross_entropy(softmax(logits, 1), targets, mask);
          });
}

TEST_CASE("operations are deterministic") {
    Rng a(99), b(99);
    Tensor x1 = random_tensor({6, 5}, a), w1 = random_tensor({4, 5}, a);
    Tensor x2 = random_tensor({6, 5}, b), w2 = random_tensor({4, 5}, b);
    Tensor g({5}, std::vector<float>(5, 1.0f)), z({5}, std::vector<float>(5, 0.0f));
    auto r1 = values(softmax(linear(gelu(layer_norm(x1, g, z)), w1), 1));
    auto r2 = values(softmax(linear(gelu(layer_norm(x2, g, z)), w2), 1));
    CHECK(r1 == r2);
}
