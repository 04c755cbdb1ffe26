// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pqft {

// Decision classes. Invalid only appears as an extracted prediction.
enum class Label : std::uint8_t { Yes = 0, No = 1, Maybe = 2, Invalid = 3 };

inline constexpr std::size_t kNumClasses = 3;

std::string_view to_string(Label label);
// Case-insensitive; nullopt for anything outside yes/no/maybe.
std::optional<Label> parse_label(std::string_view text);

struct PubMedQARecord {
    std::string id;  // PMID
    std::string question;
    std::vector<std::string> contexts;
    std::string long_answer;
    Label final_decision = Label::Yes;

    void validate() const;
    bool operator==(const PubMedQARecord&) const = default;
};

// Reads the labeled-set layout: {"<pmid>": {"QUESTION": ..., "CONTEXTS": [...],
// "LONG_ANSWER": ..., "final_decision": ...}, ...}. Record order follows the
// document.
std::vector<PubMedQARecord> parse_pubmedqa(std::string_view text);
std::vector<PubMedQARecord> load_pubmedqa(const std::filesystem::path& path);
std::string render_pubmedqa(std::span<const PubMedQARecord> records);

struct DatasetSplit {
    std::vector<PubMedQARecord> train;
    std::vector<PubMedQARecord> validation;
    std::vector<PubMedQARecord> test;
    std::uint64_t seed = 0;
};

struct SplitSizes {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
};

// 45% / 5% rounded down, remainder to test.
SplitSizes split_sizes(std::size_t n);
DatasetSplit split(std::vector<PubMedQARecord> records, std::uint64_t seed);

// Manifest: {"seed": n, "train": [ids], "validation": [ids], "test": [ids]}.
std::string render_manifest(const DatasetSplit& split);
// Rebuilds a split from a manifest and the full record list.
DatasetSplit apply_manifest(std::string_view manifest, std::span<const PubMedQARecord> records);

class ByteTokenizer {
  public:
    static constexpr int kBos = 256;
    static constexpr int kEos = 257;
    static constexpr int kPad = 258;
    static constexpr std::size_t kVocabSize = 259;

    static std::vector<int> encode(std::string_view text);
    // Special tokens are dropped; ids outside the vocabulary throw.
    static std::string decode(std::span<const int> ids);
};

struct QaTemplate {
    std::string context_prefix = "context: ";
    std::string question_prefix = "question: ";
    std::string answer_prefix = "answer: ";

    // "context: {contexts} question: {question} answer: {label}"
    std::string render(std::string_view contexts, std::string_view question, std::string_view label) const;
};

struct SequenceExample {
    std::string id;
    std::vector<int> ids;                // BOS ... EOS
    std::vector<std::uint8_t> loss_mask;  // label tokens and EOS
    std::size_t question_start = 0;
    Label label = Label::Yes;
};

// Next-token view of an example: inputs ids[0..n-1), targets ids[1..n).
struct TrainingSequence {
    std::vector<int> inputs;
    std::vector<int> targets;
    std::vector<std::uint8_t> mask;
    std::size_t question_start = 0;
};

struct Prompt {
    std::string id;
    std::vector<int> ids;  // BOS ... "answer: "
    std::size_t question_start = 0;
    Label label = Label::Yes;
};

std::string join_contexts(std::span<const std::string> contexts);

SequenceExample format_example(const PubMedQARecord& record, std::size_t max_seq_len, const QaTemplate& tmpl = {});
TrainingSequence to_training(const SequenceExample& example);
// The answer label is omitted; `reserve` tokens are kept free for generation.
Prompt format_prompt(const PubMedQARecord& record, std::size_t max_seq_len, std::size_t reserve,
                     const QaTemplate& tmpl = {});

}  // namespace pqft
