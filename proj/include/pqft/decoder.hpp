// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "pqft/adapters.hpp"
#include "pqft/transformer.hpp"

namespace pqft {

struct DecodeConfig {
    float repetition_penalty = 2.0f;
    float temperature = 0.8f;
    std::size_t num_beams = 5;
    std::size_t max_new_tokens = 16;
    int eos_id = 257;

    void validate() const;
    bool operator==(const DecodeConfig&) const = default;
};

// Seen ids: positive logits are divided by the penalty, the rest multiplied.
std::vector<float> apply_repetition_penalty(std::span<const float> logits, std::span<const int> seen, float penalty);
std::vector<float> apply_temperature(std::span<const float> logits, float temperature);
std::vector<float> log_softmax(std::span<const float> logits);

struct DecodeState {
    std::span<const int> prompt;
    std::span<const int> generated;
};

class LogitsProcessor {
  public:
    virtual ~LogitsProcessor() = default;
    virtual std::string_view name() const = 0;
    virtual void apply(const DecodeState& state, std::vector<float>& scores) const = 0;
};

class RepetitionPenaltyProcessor final : public LogitsProcessor {
  public:
    explicit RepetitionPenaltyProcessor(float penalty) : penalty_(penalty) {}
    std::string_view name() const override { return "repetition_penalty"; }
    void apply(const DecodeState& state, std::vector<float>& scores) const override;

  private:
    float penalty_;
};

class TemperatureProcessor final : public LogitsProcessor {
  public:
    explicit TemperatureProcessor(float temperature) : temperature_(temperature) {}
    std::string_view name() const override { return "temperature"; }
    void apply(const DecodeState& state, std::vector<float>& scores) const override;

  private:
    float temperature_;
};

class LogSoftmaxProcessor final : public LogitsProcessor {
  public:
    std::string_view name() const override { return "log_softmax"; }
    void apply(const DecodeState& state, std::vector<float>& scores) const override;
};

// Restricts the generated continuation to a prefix of one of `allowed`; every
// other token scores -inf.
class AllowedSequencesProcessor final : public LogitsProcessor {
  public:
    explicit AllowedSequencesProcessor(std::vector<std::vector<int>> allowed) : allowed_(std::move(allowed)) {}
    std::string_view name() const override { return "allowed_sequences"; }
    void apply(const DecodeState& state, std::vector<float>& scores) const override;

  private:
    std::vector<std::vector<int>> allowed_;
};

class LogitsPipeline {
  public:
    // repetition penalty, temperature, log-softmax.
    static LogitsPipeline standard(const DecodeConfig& config);

    LogitsPipeline& append(std::shared_ptr<const LogitsProcessor> processor);
    std::vector<float> run(const DecodeState& state, std::vector<float> logits) const;
    std::vector<std::string_view> names() const;

  private:
    std::vector<std::shared_ptr<const LogitsProcessor>> processors_;
};

// Next-token logits for a full id sequence.
struct ScoringModel {
    std::function<std::vector<float>(std::span<const int>)> next_logits;
    std::size_t max_seq_len = 0;
};

// Wraps a transformer forward pass. The weights and any adapters referenced by
// `options` must outlive the returned model.
ScoringModel transformer_scorer(const ModelWeights& weights, ForwardOptions options);

struct Hypothesis {
    std::vector<int> tokens;  // generated tokens only
    double score = 0.0;       // sum of per-step log-probabilities
    bool finished = false;

    double normalized_score() const { return tokens.empty() ? score : score / static_cast<double>(tokens.size()); }
};

Hypothesis beam_search(const ScoringModel& model, std::span<const int> prompt, const DecodeConfig& config,
                       const LogitsPipeline& pipeline);
Hypothesis beam_search(const ScoringModel& model, std::span<const int> prompt, const DecodeConfig& config);

// Argmax of the processed scores at every step.
Hypothesis greedy_decode(const ScoringModel& model, std::span<const int> prompt, const DecodeConfig& config,
                         const LogitsPipeline& pipeline);

}  // namespace pqft
