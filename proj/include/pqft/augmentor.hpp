// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pqft/corpus.hpp"

namespace pqft {

enum class AugmentStrategy { RewriteQA, NewQA, CombinedQA };

std::string_view to_string(AugmentStrategy strategy);
// Accepts "rewriteQA", "newQA", "combinedQA" (case-insensitive).
AugmentStrategy parse_strategy(std::string_view text);

struct GenerationRequest {
    std::string prompt;
    std::string model;
    double temperature = 0.7;
    std::size_t max_tokens = 512;

    void validate() const;
    // Sorted-key JSON; the cache key is the SHA-256 of this text.
    std::string canonical() const;
    std::string hash() const;
    static GenerationRequest from_canonical(std::string_view text);
    bool operator==(const GenerationRequest&) const = default;
};

class GenerationBackend {
  public:
    virtual ~GenerationBackend() = default;
    virtual std::string generate(const GenerationRequest& request) = 0;
    virtual std::string name() const = 0;
};

// The four delimited fields of one generated record.
struct GeneratedFields {
    std::string question;
    std::vector<std::string> contexts;
    std::string long_answer;
    Label decision = Label::Yes;
    bool operator==(const GeneratedFields&) const = default;
};

GeneratedFields fields_of(const PubMedQARecord& record);

// "QUESTION: ..\nCONTEXT: ..\n(one line per context)LONG_ANSWER: ..\nDECISION: ..\n".
// Line breaks inside a field are flattened to spaces.
std::string render_generation(const GeneratedFields& fields);
// Lines outside the four keys are ignored, so chatty replies still parse.
// Missing field: Parse error naming it. Bad decision: Validation error.
GeneratedFields parse_generation(std::string_view text);

struct PromptSettings {
    std::string model = "mock";
    double temperature = 0.7;
    std::size_t max_tokens = 512;
};

// rewriteQA requires `source`; for newQA a source acts as a topical exemplar
// and only its long answer is shown. `variant` separates repeated requests.
GenerationRequest build_prompt(AugmentStrategy strategy, const PubMedQARecord* source, std::size_t variant,
                               const PromptSettings& settings = {});

// Offline stand-in for a chat model. Rewrites reverse the question's clause
// order behind "It is asked whether" and shuffle sentences; new pairs come
// from the synthetic record generator keyed by the request hash.
class MockBackend final : public GenerationBackend {
  public:
    explicit MockBackend(std::uint64_t seed = 0) : seed_(seed) {}
    std::string generate(const GenerationRequest& request) override;
    std::string name() const override { return "mock"; }

  private:
    std::uint64_t seed_;
};

// Content-addressed response cache: <dir>/<request hash>.json holding
// {"request": ..., "response": ...}. Identical concurrent requests wait for
// the first one instead of calling the inner backend twice.
class CachingBackend final : public GenerationBackend {
  public:
    CachingBackend(std::shared_ptr<GenerationBackend> inner, std::filesystem::path dir);
    std::string generate(const GenerationRequest& request) override;
    std::string name() const override { return inner_->name(); }

    std::filesystem::path path_for(const std::string& hash) const { return dir_ / (hash + ".json"); }
    std::optional<std::string> lookup(const GenerationRequest& request) const;

  private:
    std::shared_ptr<GenerationBackend> inner_;
    std::filesystem::path dir_;
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<std::mutex>> in_flight_;
};

class CountingBackend final : public GenerationBackend {
  public:
    explicit CountingBackend(std::shared_ptr<GenerationBackend> inner) : inner_(std::move(inner)) {}
    std::string generate(const GenerationRequest& request) override;
    std::string name() const override { return inner_->name(); }
    std::size_t calls() const { return calls_.load(); }

  private:
    std::shared_ptr<GenerationBackend> inner_;
    std::atomic<std::size_t> calls_{0};
};

struct RemoteSettings {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env = "OPENAI_API_KEY";
    std::size_t max_retries = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::seconds timeout{120};
};

// Chat-completion client: POST {base_url}/chat/completions with a single
// user message; the first choice's message content is the reply. Transport
// errors, 429 and 5xx are retried with doubling backoff. An unset key
// variable sends no Authorization header.
class RemoteChatBackend final : public GenerationBackend {
  public:
    explicit RemoteChatBackend(RemoteSettings settings);
    std::string generate(const GenerationRequest& request) override;
    std::string name() const override { return "remote"; }

    static std::string request_body(const GenerationRequest& request);
    static std::string reply_text(std::string_view response_body);

  private:
    RemoteSettings settings_;
    std::string origin_;
    std::string path_;
};

struct AugmentedRecord {
    PubMedQARecord record;
    AugmentStrategy strategy = AugmentStrategy::RewriteQA;  // never CombinedQA
    std::string source_id;  // empty for newQA
    std::string model;
    std::string request_hash;
    bool operator==(const AugmentedRecord&) const = default;
};

// Lowercase, punctuation stripped, whitespace runs collapsed to one space.
std::string normalize_question(std::string_view question);

struct RequestFailure {
    std::size_t index = 0;
    std::string message;
};

struct StrategyStats {
    AugmentStrategy strategy = AugmentStrategy::RewriteQA;
    std::size_t requests = 0;
    std::size_t parse_failures = 0;
    std::size_t label_mismatches = 0;
    std::size_t dedup_drops = 0;
    std::size_t kept = 0;
    std::vector<RequestFailure> failures;
};

struct AugmentOptions {
    std::size_t n_per_source = 1;
    std::size_t concurrency = 4;
    PromptSettings prompt;
    // Written when a request fails for good, so a rerun over the cache can resume.
    std::optional<std::filesystem::path> progress_path;
};

struct AugmentResult {
    std::vector<AugmentedRecord> records;
    std::vector<StrategyStats> stats;  // one per sub-strategy that ran
    std::string summary_json() const;
};

// Parse and Validation failures are counted per request. A Transport error
// aborts the batch once in-flight requests finish; any other error is rethrown.
AugmentResult augment(std::span<const PubMedQARecord> train, AugmentStrategy strategy, GenerationBackend& backend,
                      const AugmentOptions& options = {});

// Originals followed by the generated records.
std::vector<PubMedQARecord> augmented_training_set(std::span<const PubMedQARecord> train,
                                                   std::span<const AugmentedRecord> generated);

std::string render_augmented_jsonl(std::span<const AugmentedRecord> records);
std::vector<AugmentedRecord> parse_augmented_jsonl(std::string_view text);

}  // namespace pqft
