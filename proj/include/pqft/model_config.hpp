// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pqft/tensor.hpp"

namespace pqft {

// Hyperparameters of the decoder-only model. Defaults describe the desk-scale
// stand-in used throughout the toolkit.
struct ModelConfig {
    std::size_t n_layers = 4;
    std::size_t n_heads = 4;
    std::size_t d_model = 64;
    std::size_t d_ff = 256;
    std::size_t vocab_size = 259;
    std::size_t max_seq_len = 256;

    void validate() const;
    std::size_t head_dim() const { return d_model / n_heads; }
    // Closed-form number of stored base parameters.
    std::size_t parameter_count() const;

    bool operator==(const ModelConfig&) const = default;
};

using NamedTensor = std::pair<std::string, Tensor>;

enum class Projection { Query = 0, Key = 1, Value = 2, Output = 3 };

std::string_view to_string(Projection projection);
Projection projection_from_string(std::string_view name);

}  // namespace pqft
