// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace pqft {

// Seeded generator with platform-independent derived distributions.
// std::mt19937_64's raw output is fully specified by the standard; the
// std:: distributions are not, so the bounded/normal helpers are written here.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound), rejection sampled.
    std::uint64_t below(std::uint64_t bound);

    // Standard normal via Box-Muller; the spare value is cached.
    double normal();

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    std::string save_state() const;
    void load_state(const std::string& state);

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent named sub-seed from a global seed.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stream_name);

}  // namespace pqft
