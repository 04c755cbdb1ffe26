// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "pqft/model_config.hpp"
#include "pqft/tensor.hpp"

namespace pqft {

struct LoraConfig {
    std::size_t rank = 4;
    float alpha = 16.0f;
    std::vector<Projection> targets{Projection::Query, Projection::Value};

    void validate() const;
    float scaling() const { return alpha / static_cast<float>(rank); }
    bool operator==(const LoraConfig&) const = default;
};

// Low-rank delta (alpha/r)·B·A over a frozen weight of shape [d_out×d_in].
struct LoraLayer {
    Tensor a;  // [r×d_in], Gaussian
    Tensor b;  // [d_out×r], zero at init
    float alpha = 16.0f;

    std::size_t rank() const { return a.rows(); }
    float scaling() const { return alpha / static_cast<float>(rank()); }

    static LoraLayer init(std::size_t d_in, std::size_t d_out, std::size_t rank, float alpha, std::uint64_t seed);
};

// The adapters attached to one model: one optional LoraLayer per projection
// per transformer layer.
struct LoraSet {
    LoraConfig config;
    std::vector<std::array<std::optional<LoraLayer>, 4>> layers;

    static LoraSet attach(const ModelConfig& model, const LoraConfig& config, std::uint64_t seed);

    const LoraLayer* find(std::size_t layer, Projection projection) const;
    // Trainable tensors named "lora.<layer>.<proj>.a|b", in a fixed order.
    std::vector<NamedTensor> named_tensors() const;
    LoraSet clone() const;
};

Tensor lora_forward(const Tensor& x, const Tensor& weight, const LoraLayer& layer);
Tensor lora_merge(const Tensor& weight, const LoraLayer& layer);

struct PrefixConfig {
    std::size_t num_virtual_tokens = 16;
    bool operator==(const PrefixConfig&) const = default;
};

// Trainable virtual-token embeddings injected before the question segment.
// An undefined tensor represents the degenerate zero-token prefix.
struct PrefixParams {
    Tensor rows;  // [m×d_model]

    std::size_t size() const { return rows.defined() ? rows.rows() : 0; }
    static PrefixParams init(std::size_t d_model, std::size_t num_virtual_tokens, std::uint64_t seed);
    std::vector<NamedTensor> named_tensors() const;
    PrefixParams clone() const;
};

// embedded[0..question_start) ++ P ++ embedded[question_start..t)
Tensor prefix_inject(const Tensor& embedded, const PrefixParams& prefix, std::size_t question_start,
                     std::size_t max_seq_len);

enum class AdapterMode { Lora, Prefix };

std::string_view to_string(AdapterMode mode);
AdapterMode adapter_mode_from_string(std::string_view name);

struct AdapterConfig {
    AdapterMode mode = AdapterMode::Lora;
    LoraConfig lora;
    PrefixConfig prefix;
    bool operator==(const AdapterConfig&) const = default;
};

struct TrainableCount {
    std::size_t count = 0;
    std::size_t base_total = 0;
    double ratio = 0.0;
};

TrainableCount trainable_params(const ModelConfig& model, const AdapterConfig& adapter);

}  // namespace pqft
