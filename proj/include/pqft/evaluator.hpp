// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pqft/corpus.hpp"
#include "pqft/decoder.hpp"

namespace pqft {

// Lowercase, punctuation removed. Idempotent.
std::string normalize_answer(std::string_view text);
// First whitespace token of the normalized text that is a class name.
Label hard_match_label(std::string_view decoded);

struct Prediction {
    std::string id;
    std::string text;
    Label predicted = Label::Invalid;
    Label gold = Label::Yes;
};

// Rows: gold yes/no/maybe. Columns: predicted yes/no/maybe/invalid.
using Confusion = std::array<std::array<std::size_t, 4>, kNumClasses>;

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

Confusion confusion_matrix(std::span<const Prediction> predictions);
double accuracy(std::span<const Prediction> predictions);
double macro_f1(std::span<const Prediction> predictions);
std::array<ClassMetrics, kNumClasses> class_metrics(const Confusion& confusion);

struct EvalReport {
    std::string model;
    std::string adapter;
    std::string strategy;  // empty means none
    std::uint64_t seed = 0;
    DecodeConfig decode;

    std::size_t total = 0;
    std::size_t decode_failures = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::array<ClassMetrics, kNumClasses> per_class{};
    Confusion confusion{};

    std::string to_json() const;
    static EvalReport from_json(std::string_view text);
};

// Fills the metric fields from predictions; metadata is left untouched.
void score_report(EvalReport& report, std::span<const Prediction> predictions);

struct EvalOptions {
    DecodeConfig decode;
    // Decoding may only produce a class name followed by EOS.
    bool constrain_to_labels = true;
    std::size_t workers = 1;
};

struct EvalResult {
    EvalReport report;
    std::vector<Prediction> predictions;
};

// Decodes every record (answer omitted) and scores the extracted labels.
// `options` carries the adapters; its prefix_position is set per record.
EvalResult evaluate(const ModelWeights& weights, const ForwardOptions& adapters, std::span<const PubMedQARecord> records,
                    const EvalOptions& options);

// Table with columns Model | Augment. | Accuracy | Macro-F1.
std::string render_table(std::span<const EvalReport> reports);
// JSON array of the reports.
std::string render_reports_json(std::span<const EvalReport> reports);

}  // namespace pqft
