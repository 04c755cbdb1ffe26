// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/transformer.hpp"

#include <cmath>
#include <string>

#include "init.hpp"
#include "pqft/error.hpp"
#include "pqft/rng.hpp"

namespace pqft {

namespace {
constexpr float kInitStd = 0.02f;
constexpr float kMaskedScore = -1e9f;
}  // namespace

void ModelConfig::validate() const {
    if (n_layers == 0 || n_heads == 0 || d_model == 0 || d_ff == 0 || vocab_size == 0 || max_seq_len == 0) {
        throw Error(ErrorKind::Configuration, "model extents must all be positive");
    }
    if (d_model % n_heads != 0) {
        throw Error(ErrorKind::Configuration, "d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                                                  std::to_string(n_heads));
    }
}

std::size_t ModelConfig::parameter_count() const {
    const std::size_t per_layer = 4 * d_model * d_model + 2 * d_model * d_ff + 4 * d_model;
    return vocab_size * d_model + max_seq_len * d_model + n_layers * per_layer + 2 * d_model;
}

const Tensor& LayerWeights::projection(Projection p) const {
    switch (p) {
        case Projection::Query: return wq;
        case Projection::Key: return wk;
        case Projection::Value: return wv;
        case Projection::Output: return wo;
    }
    return wq;
}

Tensor& LayerWeights::projection(Projection p) {
    return const_cast<Tensor&>(static_cast<const LayerWeights&>(*this).projection(p));
}

std::vector<NamedTensor> ModelWeights::named_tensors() const {
    std::vector<NamedTensor> out;
    out.emplace_back("token_embedding", token_embedding);
    out.emplace_back("position_embedding", position_embedding);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerWeights& w = layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        out.emplace_back(p + "attn_norm.gain", w.attn_norm_gain);
        out.emplace_back(p + "attn_norm.bias", w.attn_norm_bias);
        out.emplace_back(p + "attn.q", w.wq);
        out.emplace_back(p + "attn.k", w.wk);
        out.emplace_back(p + "attn.v", w.wv);
        out.emplace_back(p + "attn.o", w.wo);
        out.emplace_back(p + "ffn_norm.gain", w.ffn_norm_gain);
        out.emplace_back(p + "ffn_norm.bias", w.ffn_norm_bias);
        out.emplace_back(p + "ffn.in", w.ffn_in);
        out.emplace_back(p + "ffn.out", w.ffn_out);
    }
    out.emplace_back("final_norm.gain", final_norm_gain);
    out.emplace_back("final_norm.bias", final_norm_bias);
    return out;
}

std::size_t ModelWeights::parameter_count() const {
    std::size_t total = 0;
    for (const auto& [name, t] : named_tensors()) total += t.numel();
    return total;
}

void ModelWeights::set_requires_grad(bool value) const {
    for (auto [name, t] : named_tensors()) t.set_requires_grad(value);
}

ModelWeights ModelWeights::clone() const {
    ModelWeights copy = *this;
    copy.token_embedding = token_embedding.clone();
    copy.position_embedding = position_embedding.clone();
    for (LayerWeights& w : copy.layers) {
        for (Tensor* t : {&w.attn_norm_gain, &w.attn_norm_bias, &w.wq, &w.wk, &w.wv, &w.wo, &w.ffn_norm_gain,
                          &w.ffn_norm_bias, &w.ffn_in, &w.ffn_out}) {
            *t = t->clone();
        }
    }
    copy.final_norm_gain = final_norm_gain.clone();
    copy.final_norm_bias = final_norm_bias.clone();
    return copy;
}

ModelWeights init_weights(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const std::size_t d = config.d_model;
    ModelWeights w;
    w.config = config;
    w.token_embedding = detail::random_normal({config.vocab_size, d}, kInitStd, rng);
    w.position_embedding = detail::random_normal({config.max_seq_len, d}, kInitStd, rng);
    w.layers.resize(config.n_layers);
    for (LayerWeights& layer : w.layers) {
        layer.attn_norm_gain = Tensor::full({d}, 1.0f);
        layer.attn_norm_bias = Tensor::zeros({d});
        layer.wq = detail::random_normal({d, d}, kInitStd, rng);
        layer.wk = detail::random_normal({d, d}, kInitStd, rng);
        layer.wv = detail::random_normal({d, d}, kInitStd, rng);
        layer.wo = detail::random_normal({d, d}, kInitStd, rng);
        layer.ffn_norm_gain = Tensor::full({d}, 1.0f);
        layer.ffn_norm_bias = Tensor::zeros({d});
        layer.ffn_in = detail::random_normal({config.d_ff, d}, kInitStd, rng);
        layer.ffn_out = detail::random_normal({d, config.d_ff}, kInitStd, rng);
    }
    w.final_norm_gain = Tensor::full({d}, 1.0f);
    w.final_norm_bias = Tensor::zeros({d});
    return w;
}

ModelWeights merge_lora(const ModelWeights& weights, const LoraSet& lora) {
    ModelWeights merged = weights.clone();
    for (std::size_t l = 0; l < merged.layers.size(); ++l) {
        for (Projection p : {Projection::Query, Projection::Key, Projection::Value, Projection::Output}) {
            if (const LoraLayer* layer = lora.find(l, p)) {
                Tensor& w = merged.layers[l].projection(p);
                w = lora_merge(w, *layer);
                w.set_requires_grad(false);
            }
        }
    }
    return merged;
}

std::vector<std::uint8_t> attention_visibility(std::size_t real_tokens, std::size_t virtual_tokens,
                                               std::size_t prefix_position) {
    const std::size_t total = real_tokens + virtual_tokens;
    auto is_virtual = [&](std::size_t i) { return i >= prefix_position && i < prefix_position + virtual_tokens; };
    std::vector<std::uint8_t> allowed(total * total, 0);
    for (std::size_t i = 0; i < total; ++i) {
        for (std::size_t j = 0; j < total; ++j) {
            bool ok;
            if (is_virtual(i)) {
                ok = is_virtual(j) && j <= i;
            } else {
                ok = is_virtual(j) || j <= i;
            }
            allowed[i * total + j] = ok ? 1 : 0;
        }
    }
    return allowed;
}

namespace {

Tensor project(const Tensor& x, const LayerWeights& w, std::size_t layer, Projection p, const LoraSet* lora) {
    if (lora != nullptr) {
        if (const LoraLayer* adapter = lora->find(layer, p)) return lora_forward(x, w.projection(p), *adapter);
    }
    return linear(x, w.projection(p));
}

}  // namespace

Tensor forward(const ModelWeights& weights, std::span<const int> tokens, const ForwardOptions& options) {
    const ModelConfig& cfg = weights.config;
    const std::size_t t = tokens.size();
    if (t == 0) throw Error(ErrorKind::SequenceLength, "empty token sequence");
    const std::size_t m = options.prefix != nullptr ? options.prefix->size() : 0;
    if (t + m > cfg.max_seq_len) {
        throw Error(ErrorKind::SequenceLength, std::to_string(t) + " tokens + " + std::to_string(m) +
                                                   " virtual tokens exceed max_seq_len " +
                                                   std::to_string(cfg.max_seq_len));
    }

    Tensor x = embedding_lookup(weights.token_embedding, tokens);
    std::size_t prefix_position = 0;
    if (m > 0) {
        prefix_position = options.prefix_position;
        x = prefix_inject(x, *options.prefix, prefix_position, cfg.max_seq_len);
    }
    const std::size_t total = t + m;
    std::vector<int> positions(total);
    for (std::size_t i = 0; i < total; ++i) positions[i] = static_cast<int>(i);
    x = add(x, embedding_lookup(weights.position_embedding, positions));

    const std::vector<std::uint8_t> allowed = attention_visibility(t, m, prefix_position);
    const std::size_t hd = cfg.head_dim();
    const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(hd));

    for (std::size_t l = 0; l < weights.layers.size(); ++l) {
        const LayerWeights& w = weights.layers[l];
        Tensor h = layer_norm(x, w.attn_norm_gain, w.attn_norm_bias);
        Tensor q = project(h, w, l, Projection::Query, options.lora);
        Tensor k = project(h, w, l, Projection::Key, options.lora);
        Tensor v = project(h, w, l, Projection::Value, options.lora);
        std::vector<Tensor> heads;
        heads.reserve(cfg.n_heads);
        for (std::size_t head = 0; head < cfg.n_heads; ++head) {
            const std::size_t lo = head * hd, hi = lo + hd;
            Tensor qh = cfg.n_heads == 1 ? q : slice_cols(q, lo, hi);
            Tensor kh = cfg.n_heads == 1 ? k : slice_cols(k, lo, hi);
            Tensor vh = cfg.n_heads == 1 ? v : slice_cols(v, lo, hi);
            Tensor scores = masked_fill(scale(linear(qh, kh), inv_sqrt), allowed, kMaskedScore);
            Tensor probs = softmax(scores, 1);
            if (options.attention_probs != nullptr) options.attention_probs->push_back(probs);
            heads.push_back(matmul(probs, vh));
        }
        Tensor attn = cfg.n_heads == 1 ? heads[0] : concat_cols(heads);
        x = add(x, project(attn, w, l, Projection::Output, options.lora));

        Tensor f = layer_norm(x, w.ffn_norm_gain, w.ffn_norm_bias);
        f = linear(gelu(linear(f, w.ffn_in)), w.ffn_out);
        x = add(x, f);
    }
    x = layer_norm(x, weights.final_norm_gain, weights.final_norm_bias);
    if (options.last_only) {
        const std::size_t last = (m > 0 && prefix_position == t) ? prefix_position - 1 : total - 1;
        return linear(slice_rows(x, last, last + 1), weights.token_embedding);
    }
    if (m > 0) {
        std::vector<std::size_t> real;
        real.reserve(t);
        for (std::size_t i = 0; i < total; ++i) {
            if (i < prefix_position || i >= prefix_position + m) real.push_back(i);
        }
        x = gather_rows(x, real);
    }
    return linear(x, weights.token_embedding);
}

}  // namespace pqft
