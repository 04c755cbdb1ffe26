// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pqft/adapters.hpp"
#include "pqft/corpus.hpp"
#include "pqft/decoder.hpp"
#include "pqft/transformer.hpp"

namespace pqft {

struct TrainConfig {
    double learning_rate = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
    std::size_t grad_accum_steps = 32;
    std::size_t micro_batch_tokens = 1024;
    std::size_t warmup_steps = 100;
    std::size_t max_optimizer_steps = 200;
    std::size_t eval_every = 20;
    std::uint64_t seed = 0;
    AdapterConfig adapter;
    DecodeConfig eval_decode;

    void validate() const;
    std::size_t tokens_per_step() const { return grad_accum_steps * micro_batch_tokens; }
    bool operator==(const TrainConfig&) const = default;
};

// Linear warmup to learning_rate, constant afterwards.
double lr_at(std::size_t step, const TrainConfig& config);

struct OptimizerState {
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
    std::size_t step = 0;
};

// One decoupled-weight-decay Adam update over `params` using their grads.
void adamw_step(std::span<Tensor> params, OptimizerState& state, double lr, const TrainConfig& config);

// The trainable side of a fine-tuning run.
struct AdapterState {
    AdapterConfig config;
    LoraSet lora;
    PrefixParams prefix;

    static AdapterState attach(const ModelConfig& model, const AdapterConfig& config, std::uint64_t seed);
    std::vector<NamedTensor> named_tensors() const;
    // Points into this object; it must stay put while the options are used.
    ForwardOptions options() const;
    std::size_t virtual_tokens() const { return config.mode == AdapterMode::Prefix ? prefix.size() : 0; }
    AdapterState clone() const;
};

struct MetricRecord {
    std::size_t step = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    std::optional<double> val_accuracy;
    std::optional<double> val_macro_f1;
    bool operator==(const MetricRecord&) const = default;
};

std::string render_metrics_jsonl(std::span<const MetricRecord> metrics);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    ModelWeights base;
    AdapterState adapter;
    OptimizerState optimizer;
    std::size_t step = 0;
    std::string rng_state;
    std::vector<MetricRecord> metrics;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// `expected` (when set) is the model configuration the caller will run with;
// tensors that disagree with it are reported by name.
Checkpoint deserialize_checkpoint(std::string_view bytes, const ModelConfig* expected = nullptr);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

// SHA-256 over names, shapes and values of the base tensors (hex).
std::string weights_hash(const ModelWeights& weights);

struct TrainResult {
    Checkpoint best;  // best validation accuracy, then macro-F1, then earlier step
    Checkpoint last;
    std::vector<MetricRecord> metrics;
    std::size_t best_step = 0;
    std::size_t micro_batches = 0;
};

struct TrainHooks {
    std::function<void(const MetricRecord&)> on_step;
};

// Token-budgeted packing of sequence indices, in order.
std::vector<std::vector<std::size_t>> pack_micro_batches(std::span<const TrainingSequence> sequences,
                                                         std::span<const std::size_t> order, std::size_t budget);

// Runs forward and backward over one micro-batch, adding each sequence's
// gradient scaled by its share of the batch's loss tokens and by
// 1/grad_accum_steps. Returns the batch's mean token loss.
double accumulate_micro_batch(const ModelWeights& base, const ForwardOptions& options,
                              std::span<const TrainingSequence> sequences, std::span<const std::size_t> batch,
                              std::size_t grad_accum_steps);

// Full-parameter language-model training on context passages, standing in for
// pretraining of the base model.
struct WarmPhaseConfig {
    std::size_t steps = 0;
    double learning_rate = 3e-3;
    std::size_t warmup_steps = 10;
    std::size_t micro_batch_tokens = 1024;
    std::uint64_t seed = 0;

    bool operator==(const WarmPhaseConfig&) const = default;
};

// Returns trained copies of `init`; `init` is left untouched.
ModelWeights warm_phase(const ModelWeights& init, std::span<const PubMedQARecord> records, const WarmPhaseConfig& config,
                        const TrainHooks& hooks = {});

TrainResult train(const ModelWeights& base, AdapterState adapter, std::span<const PubMedQARecord> train_set,
                  std::span<const PubMedQARecord> validation_set, const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace pqft
