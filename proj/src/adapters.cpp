// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/adapters.hpp"

#include <string>

#include "init.hpp"
#include "pqft/error.hpp"
#include "pqft/rng.hpp"

namespace pqft {

namespace {
constexpr float kAdapterInitStd = 0.02f;
}

std::string_view to_string(Projection projection) {
    switch (projection) {
        case Projection::Query: return "q";
        case Projection::Key: return "k";
        case Projection::Value: return "v";
        case Projection::Output: return "o";
    }
    return "?";
}

Projection projection_from_string(std::string_view name) {
    if (name == "q") return Projection::Query;
    if (name == "k") return Projection::Key;
    if (name == "v") return Projection::Value;
    if (name == "o") return Projection::Output;
    throw Error(ErrorKind::Configuration, "unknown projection '" + std::string(name) + "' (expected q, k, v or o)");
}

std::string_view to_string(AdapterMode mode) { return mode == AdapterMode::Lora ? "lora" : "prefix"; }

AdapterMode adapter_mode_from_string(std::string_view name) {
    if (name == "lora") return AdapterMode::Lora;
    if (name == "prefix") return AdapterMode::Prefix;
    throw Error(ErrorKind::Configuration, "unknown adapter mode '" + std::string(name) + "'");
}

void LoraConfig::validate() const {
    if (rank < 1) throw Error(ErrorKind::Configuration, "LoRA rank must be at least 1");
    if (!(alpha > 0.0f)) throw Error(ErrorKind::Configuration, "LoRA alpha must be positive");
    if (targets.empty()) throw Error(ErrorKind::Configuration, "LoRA target set is empty");
    for (std::size_t i = 0; i < targets.size(); ++i)
        for (std::size_t j = i + 1; j < targets.size(); ++j)
            if (targets[i] == targets[j])
                throw Error(ErrorKind::Configuration,
                            "LoRA target '" + std::string(to_string(targets[i])) + "' listed twice");
}

LoraLayer LoraLayer::init(std::size_t d_in, std::size_t d_out, std::size_t rank, float alpha, std::uint64_t seed) {
    if (rank < 1) throw Error(ErrorKind::Configuration, "LoRA rank must be at least 1");
    Rng rng(seed);
    LoraLayer layer;
    layer.a = detail::random_normal({rank, d_in}, kAdapterInitStd, rng);
    layer.b = Tensor::zeros({d_out, rank});
    layer.alpha = alpha;
    return layer;
}

LoraSet LoraSet::attach(const ModelConfig& model, const LoraConfig& config, std::uint64_t seed) {
    model.validate();
    config.validate();
    LoraSet set;
    set.config = config;
    set.layers.resize(model.n_layers);
    for (std::size_t l = 0; l < model.n_layers; ++l) {
        for (Projection p : config.targets) {
            const auto slot = static_cast<std::size_t>(p);
            const std::uint64_t sub = derive_seed(seed, "lora." + std::to_string(l) + "." + std::string(to_string(p)));
            set.layers[l][slot] = LoraLayer::init(model.d_model, model.d_model, config.rank, config.alpha, sub);
        }
    }
    return set;
}

const LoraLayer* LoraSet::find(std::size_t layer, Projection projection) const {
    if (layer >= layers.size()) return nullptr;
    const auto& slot = layers[layer][static_cast<std::size_t>(projection)];
    return slot ? &*slot : nullptr;
}

std::vector<NamedTensor> LoraSet::named_tensors() const {
    std::vector<NamedTensor> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t p = 0; p < 4; ++p) {
            if (!layers[l][p]) continue;
            const std::string base =
                "lora." + std::to_string(l) + "." + std::string(to_string(static_cast<Projection>(p)));
            out.emplace_back(base + ".a", layers[l][p]->a);
            out.emplace_back(base + ".b", layers[l][p]->b);
        }
    }
    return out;
}

LoraSet LoraSet::clone() const {
    LoraSet copy = *this;
    for (auto& layer : copy.layers) {
        for (auto& slot : layer) {
            if (!slot) continue;
            slot->a = slot->a.clone();
            slot->b = slot->b.clone();
        }
    }
    return copy;
}

namespace {
void check_lora_shapes(const Tensor& weight, const LoraLayer& layer) {
    if (weight.rank() != 2 || layer.a.rank() != 2 || layer.b.rank() != 2 || layer.a.cols() != weight.cols() ||
        layer.b.rows() != weight.rows() || layer.b.cols() != layer.a.rows()) {
        throw Error(ErrorKind::Configuration, "LoRA factors A" + shape_string(layer.a.shape()) + " B" +
                                                  shape_string(layer.b.shape()) + " inconsistent with weight " +
                                                  shape_string(weight.shape()));
    }
}
}  // namespace

Tensor lora_forward(const Tensor& x, const Tensor& weight, const LoraLayer& layer) {
    check_lora_shapes(weight, layer);
    Tensor base = linear(x, weight);
    Tensor low_rank = linear(linear(x, layer.a), layer.b);
    return add(base, scale(low_rank, layer.scaling()));
}

Tensor lora_merge(const Tensor& weight, const LoraLayer& layer) {
    check_lora_shapes(weight, layer);
    return add(weight, scale(matmul(layer.b, layer.a), layer.scaling()));
}

PrefixParams PrefixParams::init(std::size_t d_model, std::size_t num_virtual_tokens, std::uint64_t seed) {
    PrefixParams params;
    if (num_virtual_tokens == 0) return params;
    Rng rng(seed);
    params.rows = detail::random_normal({num_virtual_tokens, d_model}, kAdapterInitStd, rng);
    return params;
}

std::vector<NamedTensor> PrefixParams::named_tensors() const {
    if (!rows.defined()) return {};
    return {{"prefix.rows", rows}};
}

PrefixParams PrefixParams::clone() const {
    PrefixParams copy;
    if (rows.defined()) copy.rows = rows.clone();
    return copy;
}

Tensor prefix_inject(const Tensor& embedded, const PrefixParams& prefix, std::size_t question_start,
                     std::size_t max_seq_len) {
    const std::size_t t = embedded.rows();
    if (question_start > t) {
        throw Error(ErrorKind::Contract, "question_start " + std::to_string(question_start) +
                                             " beyond sequence of length " + std::to_string(t));
    }
    const std::size_t m = prefix.size();
    if (t + m > max_seq_len) {
        throw Error(ErrorKind::SequenceLength, "sequence of " + std::to_string(t) + " tokens plus " +
                                                   std::to_string(m) + " virtual tokens exceeds max_seq_len " +
                                                   std::to_string(max_seq_len));
    }
    if (m == 0) return embedded;
    if (prefix.rows.cols() != embedded.cols()) {
        throw Error(ErrorKind::Dimension, "prefix " + shape_string(prefix.rows.shape()) +
                                              " does not match embedding width of " + shape_string(embedded.shape()));
    }
    std::vector<Tensor> parts;
    if (question_start > 0) parts.push_back(slice_rows(embedded, 0, question_start));
    parts.push_back(prefix.rows);
    if (question_start < t) parts.push_back(slice_rows(embedded, question_start, t));
    return concat_rows(parts);
}

TrainableCount trainable_params(const ModelConfig& model, const AdapterConfig& adapter) {
    model.validate();
    TrainableCount result;
    result.base_total = model.parameter_count();
    if (adapter.mode == AdapterMode::Lora) {
        adapter.lora.validate();
        // Every supported target projection is square [d_model×d_model].
        const std::size_t per_target = adapter.lora.rank * (model.d_model + model.d_model);
        result.count = model.n_layers * adapter.lora.targets.size() * per_target;
    } else {
        result.count = adapter.prefix.num_virtual_tokens * model.d_model;
    }
    result.ratio = static_cast<double>(result.count) / static_cast<double>(result.base_total);
    return result;
}

}  // namespace pqft
