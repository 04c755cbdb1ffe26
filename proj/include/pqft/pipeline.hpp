// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pqft/augmentor.hpp"
#include "pqft/evaluator.hpp"
#include "pqft/json_io.hpp"
#include "pqft/trainer.hpp"

// End-to-end orchestration behind the pqft command line tool. Every random
// choice flows from RunConfig::seed through named sub-seeds.
namespace pqft {

struct PathsConfig {
    std::filesystem::path dataset = "data/pubmedqa.json";
    std::filesystem::path manifest = "run/split.json";
    std::filesystem::path augmented = "run/augmented.jsonl";
    std::filesystem::path cache_dir = "run/cache";
    std::filesystem::path checkpoint_dir = "run/checkpoints";
    std::filesystem::path report_dir = "run/reports";
    bool operator==(const PathsConfig&) const = default;
};

struct CorpusSettings {
    // Train on the originals plus paths.augmented.
    bool use_augmented = false;
    bool operator==(const CorpusSettings&) const = default;
};

struct AugmentSettings {
    AugmentStrategy strategy = AugmentStrategy::RewriteQA;
    std::string backend = "mock";  // mock | remote
    std::string model = "mock";
    std::size_t n_per_source = 1;
    std::size_t concurrency = 4;
    double temperature = 0.7;
    std::size_t max_tokens = 512;
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env = "OPENAI_API_KEY";
    std::size_t retry_backoff_ms = 1000;
    // Anything but "train" trips the leakage guard.
    std::string split = "train";
    bool operator==(const AugmentSettings&) const = default;
};

struct EvalSettings {
    std::string model_name = "toy-slm";
    std::string split = "test";
    bool constrain_to_labels = true;
    std::size_t workers = 1;
    std::string report_name = "report.json";
    bool operator==(const EvalSettings&) const = default;
};

struct SweepSettings {
    std::vector<std::size_t> grid{16, 64, 128, 256, 512};
    std::vector<std::string> techniques{"lora", "prefix"};
    std::size_t lora_rank = 4;
    bool operator==(const SweepSettings&) const = default;
};

struct RunConfig {
    std::uint64_t seed = 0;
    PathsConfig paths;
    CorpusSettings corpus;
    ModelConfig model;
    AdapterConfig adapter;
    // adapter, eval_decode and seed are filled from the sections above.
    TrainConfig train;
    WarmPhaseConfig warm;
    DecodeConfig decode;
    AugmentSettings augment;
    EvalSettings eval;
    SweepSettings sweep;

    Json to_json() const;
    // Strict: unknown keys and wrong types are configuration errors. Relative
    // paths are resolved against `base_dir`.
    static RunConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
    void validate() const;
    TrainConfig train_config() const;
    WarmPhaseConfig warm_config() const;
    bool operator==(const RunConfig&) const = default;
};

// Sets a dotted field ("train.learning_rate") in a config document. The field
// must already exist; the text is read as JSON unless the field is a string.
void apply_override(Json& document, std::string_view dotted_key, std::string_view value);

// Defaults, overlaid with the file (if any), then with the overrides.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Process exit status for an error kind: 1 usage/config, 2 data, 3 transport,
// 4 numeric failure.
int exit_code_for(ErrorKind kind);

using Logger = std::function<void(const std::string&)>;

struct IngestSummary {
    std::size_t records = 0;
    std::array<std::size_t, kNumClasses> per_label{};
};

IngestSummary command_ingest(const RunConfig& config, const Logger& log = {});
DatasetSplit command_split(const RunConfig& config, const Logger& log = {});
// `backend` overrides the configured one (tests inject fakes through it).
AugmentResult command_augment(const RunConfig& config, GenerationBackend* backend = nullptr, const Logger& log = {});
TrainResult command_train(const RunConfig& config, const Logger& log = {});
// Evaluates `checkpoint` (default: best.ckpt in the checkpoint dir).
EvalResult command_eval(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint = {},
                        const Logger& log = {});

struct SweepRow {
    std::string technique;
    std::size_t hyperparameter = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::string run_key;
    bool operator==(const SweepRow&) const = default;
};

std::vector<SweepRow> command_sweep(const RunConfig& config, const Logger& log = {});
std::string render_sweep_table(const std::vector<SweepRow>& rows);

// Merges report files into reports.json and table.md under the report dir.
std::string command_report(const RunConfig& config, const std::vector<std::filesystem::path>& inputs,
                           const Logger& log = {});

// Writes a synthetic dataset in the upstream labeled layout.
void command_synth(const std::filesystem::path& out, std::size_t n, std::uint64_t seed);

// Base model for a run: seeded init, then the warm phase on the train split's
// contexts. Cached under the checkpoint dir.
ModelWeights prepare_base(const RunConfig& config, std::span<const PubMedQARecord> train, const Logger& log = {});

}  // namespace pqft
