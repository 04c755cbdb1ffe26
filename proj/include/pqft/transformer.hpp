// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pqft/adapters.hpp"
#include "pqft/model_config.hpp"
#include "pqft/tensor.hpp"

namespace pqft {

struct LayerWeights {
    Tensor attn_norm_gain, attn_norm_bias;
    Tensor wq, wk, wv, wo;  // [d_model×d_model], applied as x·Wᵀ
    Tensor ffn_norm_gain, ffn_norm_bias;
    Tensor ffn_in;   // [d_ff×d_model]
    Tensor ffn_out;  // [d_model×d_ff]

    const Tensor& projection(Projection p) const;
    Tensor& projection(Projection p);
};

// Pre-norm decoder-only transformer. The output head is tied to the token
// embedding, so it is not stored separately.
struct ModelWeights {
    ModelConfig config;
    Tensor token_embedding;     // [vocab×d_model]
    Tensor position_embedding;  // [max_seq_len×d_model]
    std::vector<LayerWeights> layers;
    Tensor final_norm_gain, final_norm_bias;

    // Handles to every stored tensor under a stable name, in a fixed order.
    std::vector<NamedTensor> named_tensors() const;
    std::size_t parameter_count() const;
    void set_requires_grad(bool value) const;
    ModelWeights clone() const;
};

ModelWeights init_weights(const ModelConfig& config, std::uint64_t seed);

// Returns a copy of `weights` with every LoRA delta folded into its projection.
ModelWeights merge_lora(const ModelWeights& weights, const LoraSet& lora);

struct ForwardOptions {
    const PrefixParams* prefix = nullptr;
    std::size_t prefix_position = 0;  // index of the first question token
    const LoraSet* lora = nullptr;
    // When set, receives the [T×T] attention probabilities of every head of
    // every layer (T includes virtual positions).
    std::vector<Tensor>* attention_probs = nullptr;
    // Only compute logits for the final real position ([1×vocab]).
    bool last_only = false;
};

// Causal logits [t×vocab] for the real token positions.
Tensor forward(const ModelWeights& weights, std::span<const int> tokens, const ForwardOptions& options = {});

// Attention visibility over the injected sequence. Real positions see earlier
// real positions and every virtual position; virtual positions see only
// earlier-or-equal virtual positions.
std::vector<std::uint8_t> attention_visibility(std::size_t real_tokens, std::size_t virtual_tokens,
                                               std::size_t prefix_position);

}  // namespace pqft
