// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pqft/error.hpp"

namespace pqft {

void DecodeConfig::validate() const {
    if (!(repetition_penalty >= 1.0f)) throw Error(ErrorKind::Configuration, "repetition_penalty must be >= 1");
    if (!(temperature > 0.0f)) throw Error(ErrorKind::Configuration, "temperature must be > 0");
    if (num_beams < 1) throw Error(ErrorKind::Configuration, "num_beams must be >= 1");
    if (max_new_tokens < 1) throw Error(ErrorKind::Configuration, "max_new_tokens must be >= 1");
}

std::vector<float> apply_repetition_penalty(std::span<const float> logits, std::span<const int> seen, float penalty) {
    std::vector<float> out(logits.begin(), logits.end());
    std::vector<std::uint8_t> mark(out.size(), 0);
    for (int id : seen) {
        if (id >= 0 && static_cast<std::size_t>(id) < out.size()) mark[static_cast<std::size_t>(id)] = 1;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (mark[i]) out[i] = out[i] > 0.0f ? out[i] / penalty : out[i] * penalty;
    }
    return out;
}

std::vector<float> apply_temperature(std::span<const float> logits, float temperature) {
    std::vector<float> out(logits.begin(), logits.end());
    for (float& v : out) v /= temperature;
    return out;
}

std::vector<float> log_softmax(std::span<const float> logits) {
    double hi = -std::numeric_limits<double>::infinity();
    for (float v : logits) hi = std::max(hi, static_cast<double>(v));
    double total = 0.0;
    for (float v : logits) total += std::exp(static_cast<double>(v) - hi);
    const double log_z = hi + std::log(total);
    std::vector<float> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<float>(static_cast<double>(logits[i]) - log_z);
    return out;
}

void RepetitionPenaltyProcessor::apply(const DecodeState& state, std::vector<float>& scores) const {
    if (penalty_ == 1.0f) return;
    std::vector<int> seen(state.prompt.begin(), state.prompt.end());
    seen.insert(seen.end(), state.generated.begin(), state.generated.end());
    scores = apply_repetition_penalty(scores, seen, penalty_);
}

void TemperatureProcessor::apply(const DecodeState&, std::vector<float>& scores) const {
    scores = apply_temperature(scores, temperature_);
}

void LogSoftmaxProcessor::apply(const DecodeState&, std::vector<float>& scores) const { scores = log_softmax(scores); }

void AllowedSequencesProcessor::apply(const DecodeState& state, std::vector<float>& scores) const {
    std::vector<std::uint8_t> ok(scores.size(), 0);
    const auto g = state.generated;
    for (const auto& seq : allowed_) {
        if (seq.size() <= g.size() || !std::equal(g.begin(), g.end(), seq.begin())) continue;
        const int next = seq[g.size()];
        if (next >= 0 && static_cast<std::size_t>(next) < ok.size()) ok[static_cast<std::size_t>(next)] = 1;
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!ok[i]) scores[i] = -std::numeric_limits<float>::infinity();
    }
}

LogitsPipeline LogitsPipeline::standard(const DecodeConfig& config) {
    LogitsPipeline p;
    p.append(std::make_shared<RepetitionPenaltyProcessor>(config.repetition_penalty));
    p.append(std::make_shared<TemperatureProcessor>(config.temperature));
    p.append(std::make_shared<LogSoftmaxProcessor>());
    return p;
}

LogitsPipeline& LogitsPipeline::append(std::shared_ptr<const LogitsProcessor> processor) {
    processors_.push_back(std::move(processor));
    return *this;
}

std::vector<float> LogitsPipeline::run(const DecodeState& state, std::vector<float> logits) const {
    for (const auto& p : processors_) p->apply(state, logits);
    return logits;
}

std::vector<std::string_view> LogitsPipeline::names() const {
    std::vector<std::string_view> out;
    for (const auto& p : processors_) out.push_back(p->name());
    return out;
}

ScoringModel transformer_scorer(const ModelWeights& weights, ForwardOptions options) {
    options.last_only = true;
    options.attention_probs = nullptr;
    ScoringModel model;
    model.max_seq_len = weights.config.max_seq_len;
    if (options.prefix != nullptr) model.max_seq_len -= std::min(model.max_seq_len, options.prefix->size());
    model.next_logits = [&weights, options](std::span<const int> ids) {
        Tensor logits = forward(weights, ids, options);
        return std::vector<float>(logits.data().begin(), logits.data().end());
    };
    return model;
}

namespace {

void check_room(const ScoringModel& model, std::span<const int> prompt, const DecodeConfig& config) {
    config.validate();
    if (prompt.empty()) throw Error(ErrorKind::SequenceLength, "empty prompt");
    if (prompt.size() + config.max_new_tokens > model.max_seq_len) {
        throw Error(ErrorKind::SequenceLength, "no room to generate: prompt " + std::to_string(prompt.size()) + " + " +
                                                   std::to_string(config.max_new_tokens) + " new tokens exceeds " +
                                                   std::to_string(model.max_seq_len));
    }
}

std::vector<float> step_scores(const ScoringModel& model, std::span<const int> prompt, const std::vector<int>& generated,
                               const LogitsPipeline& pipeline) {
    std::vector<int> ids(prompt.begin(), prompt.end());
    ids.insert(ids.end(), generated.begin(), generated.end());
    return pipeline.run(DecodeState{prompt, generated}, model.next_logits(ids));
}

// Higher score first, then lexicographically smaller tokens.
bool ranks_before(double sa, const std::vector<int>& ta, double sb, const std::vector<int>& tb) {
    if (sa != sb) return sa > sb;
    return ta < tb;
}

}  // namespace

Hypothesis beam_search(const ScoringModel& model, std::span<const int> prompt, const DecodeConfig& config,
                       const LogitsPipeline& pipeline) {
    check_room(model, prompt, config);
    std::vector<Hypothesis> live{Hypothesis{}};
    std::vector<Hypothesis> finished;

    for (std::size_t step = 0; step < config.max_new_tokens && !live.empty(); ++step) {
        std::vector<Hypothesis> candidates;
        for (const Hypothesis& h : live) {
            const std::vector<float> scores = step_scores(model, prompt, h.tokens, pipeline);
            for (std::size_t v = 0; v < scores.size(); ++v) {
                if (!std::isfinite(scores[v])) continue;
                Hypothesis next;
                next.tokens = h.tokens;
                next.tokens.push_back(static_cast<int>(v));
                next.score = h.score + static_cast<double>(scores[v]);
                next.finished = static_cast<int>(v) == config.eos_id;
                candidates.push_back(std::move(next));
            }
        }
        const std::size_t keep = std::min(config.num_beams, candidates.size());
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                          [](const Hypothesis& a, const Hypothesis& b) {
                              return ranks_before(a.score, a.tokens, b.score, b.tokens);
                          });
        live.clear();
        for (std::size_t i = 0; i < keep; ++i) {
            (candidates[i].finished ? finished : live).push_back(std::move(candidates[i]));
        }
    }

    const std::vector<Hypothesis>& pool = finished.empty() ? live : finished;
    if (pool.empty()) throw Error(ErrorKind::Contract, "beam search produced no hypotheses");
    const Hypothesis* best = &pool.front();
    for (const Hypothesis& h : pool) {
        if (ranks_before(h.normalized_score(), h.tokens, best->normalized_score(), best->tokens)) best = &h;
    }
    return *best;
}

Hypothesis beam_search(const ScoringModel& model, std::span<const int> prompt, const DecodeConfig& config) {
    return beam_search(model, prompt, config, LogitsPipeline::standard(config));
}

Hypothesis greedy_decode(const ScoringModel& model, std::span<const int> prompt, const DecodeConfig& config,
                         const LogitsPipeline& pipeline) {
    check_room(model, prompt, config);
    Hypothesis h;
    for (std::size_t step = 0; step < config.max_new_tokens; ++step) {
        const std::vector<float> scores = step_scores(model, prompt, h.tokens, pipeline);
        std::size_t best = scores.size();
        for (std::size_t v = 0; v < scores.size(); ++v) {
            if (!std::isfinite(scores[v])) continue;
            if (best == scores.size() || scores[v] > scores[best]) best = v;
        }
        if (best == scores.size()) break;
        h.tokens.push_back(static_cast<int>(best));
        h.score += static_cast<double>(scores[best]);
        if (static_cast<int>(best) == config.eos_id) {
            h.finished = true;
            break;
        }
    }
    return h;
}

}  // namespace pqft
