// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "pqft/error.hpp"
#include "pqft/rng.hpp"
#include "pqft/sha256.hpp"
#include "pqft/synthetic.hpp"

namespace pqft {

namespace fs = std::filesystem;

namespace {

Json paths_json(const PathsConfig& p) {
    return Json{{"dataset", p.dataset.generic_string()},       {"manifest", p.manifest.generic_string()},
                {"augmented", p.augmented.generic_string()},   {"cache_dir", p.cache_dir.generic_string()},
                {"checkpoint_dir", p.checkpoint_dir.generic_string()}, {"report_dir", p.report_dir.generic_string()}};
}

// Training knobs only; the adapter, decode and seed live in their own sections.
Json train_json(const TrainConfig& t) {
    Json j = t;
    j.erase("adapter");
    j.erase("eval_decode");
    j.erase("seed");
    return j;
}

Json warm_json(const WarmPhaseConfig& w) {
    return Json{{"steps", w.steps},
                {"learning_rate", w.learning_rate},
                {"warmup_steps", w.warmup_steps},
                {"micro_batch_tokens", w.micro_batch_tokens}};
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

void write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorKind::Io, "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void require_file(const fs::path& path, std::string_view what) {
    if (!fs::is_regular_file(path)) throw Error(ErrorKind::Io, std::string(what) + " not found: " + path.string());
}

const std::set<std::string> kSplitNames{"train", "validation", "test"};

void log_line(const Logger& log, const std::string& line) {
    if (log) log(line);
}

std::string fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

Json RunConfig::to_json() const {
    Json j;
    j["seed"] = seed;
    j["paths"] = paths_json(paths);
    j["corpus"] = Json{{"use_augmented", corpus.use_augmented}};
    j["model"] = model;
    j["adapter"] = adapter;
    j["train"] = train_json(train);
    j["warm"] = warm_json(warm);
    j["decode"] = decode;
    j["augment"] = Json{{"strategy", std::string(to_string(augment.strategy))},
                        {"backend", augment.backend},
                        {"model", augment.model},
                        {"n_per_source", augment.n_per_source},
                        {"concurrency", augment.concurrency},
                        {"temperature", augment.temperature},
                        {"max_tokens", augment.max_tokens},
                        {"base_url", augment.base_url},
                        {"api_key_env", augment.api_key_env},
                        {"retry_backoff_ms", augment.retry_backoff_ms},
                        {"split", augment.split}};
    j["eval"] = Json{{"model_name", eval.model_name},
                     {"split", eval.split},
                     {"constrain_to_labels", eval.constrain_to_labels},
                     {"workers", eval.workers},
                     {"report_name", eval.report_name}};
    j["sweep"] = Json{{"grid", sweep.grid}, {"techniques", sweep.techniques}, {"lora_rank", sweep.lora_rank}};
    return j;
}

RunConfig RunConfig::from_json(const Json& j, const fs::path& base_dir) {
    RunConfig c;
    JsonReader r(j, "config");
    r.get("seed", c.seed);

    Json section = Json::object();
    r.get("paths", section);
    {
        JsonReader p(section, "paths");
        std::string dataset = c.paths.dataset.string(), manifest = c.paths.manifest.string(),
                    augmented = c.paths.augmented.string(), cache = c.paths.cache_dir.string(),
                    checkpoints = c.paths.checkpoint_dir.string(), reports = c.paths.report_dir.string();
        p.get("dataset", dataset);
        p.get("manifest", manifest);
        p.get("augmented", augmented);
        p.get("cache_dir", cache);
        p.get("checkpoint_dir", checkpoints);
        p.get("report_dir", reports);
        p.finish();
        c.paths = {resolve(dataset, base_dir), resolve(manifest, base_dir),    resolve(augmented, base_dir),
                   resolve(cache, base_dir),   resolve(checkpoints, base_dir), resolve(reports, base_dir)};
    }

    section = Json::object();
    r.get("corpus", section);
    {
        JsonReader p(section, "corpus");
        p.get("use_augmented", c.corpus.use_augmented);
        p.finish();
    }

    r.get("model", c.model);
    r.get("adapter", c.adapter);

    section = Json::object();
    r.get("train", section);
    for (const char* key : {"adapter", "eval_decode", "seed"}) {
        if (section.contains(key)) {
            throw Error(ErrorKind::Configuration, std::string("train.") + key + " is set by its own top-level section");
        }
    }
    c.train = section.get<TrainConfig>();

    section = Json::object();
    r.get("warm", section);
    {
        JsonReader p(section, "warm");
        p.get("steps", c.warm.steps);
        p.get("learning_rate", c.warm.learning_rate);
        p.get("warmup_steps", c.warm.warmup_steps);
        p.get("micro_batch_tokens", c.warm.micro_batch_tokens);
        p.finish();
    }

    r.get("decode", c.decode);

    section = Json::object();
    r.get("augment", section);
    {
        JsonReader p(section, "augment");
        std::string strategy(to_string(c.augment.strategy));
        p.get("strategy", strategy);
        c.augment.strategy = parse_strategy(strategy);
        p.get("backend", c.augment.backend);
        p.get("model", c.augment.model);
        p.get("n_per_source", c.augment.n_per_source);
        p.get("concurrency", c.augment.concurrency);
        p.get("temperature", c.augment.temperature);
        p.get("max_tokens", c.augment.max_tokens);
        p.get("base_url", c.augment.base_url);
        p.get("api_key_env", c.augment.api_key_env);
        p.get("retry_backoff_ms", c.augment.retry_backoff_ms);
        p.get("split", c.augment.split);
        p.finish();
    }

    section = Json::object();
    r.get("eval", section);
    {
        JsonReader p(section, "eval");
        p.get("model_name", c.eval.model_name);
        p.get("split", c.eval.split);
        p.get("constrain_to_labels", c.eval.constrain_to_labels);
        p.get("workers", c.eval.workers);
        p.get("report_name", c.eval.report_name);
        p.finish();
    }

    section = Json::object();
    r.get("sweep", section);
    {
        JsonReader p(section, "sweep");
        p.get("grid", c.sweep.grid);
        p.get("techniques", c.sweep.techniques);
        p.get("lora_rank", c.sweep.lora_rank);
        p.finish();
    }
    r.finish();
    c.validate();
    return c;
}

void RunConfig::validate() const {
    model.validate();
    adapter.lora.validate();
    train_config().validate();
    decode.validate();
    auto fail = [](const std::string& m) { throw Error(ErrorKind::Configuration, m); };
    if (augment.backend != "mock" && augment.backend != "remote") fail("augment.backend must be mock or remote");
    if (augment.n_per_source == 0) fail("augment.n_per_source must be at least 1");
    if (augment.concurrency == 0) fail("augment.concurrency must be at least 1");
    if (augment.model.empty()) fail("augment.model is empty");
    if (!kSplitNames.contains(augment.split)) fail("augment.split must be train, validation or test");
    if (!kSplitNames.contains(eval.split)) fail("eval.split must be train, validation or test");
    if (eval.workers == 0) fail("eval.workers must be at least 1");
    if (eval.report_name.empty() || eval.report_name.find('/') != std::string::npos) fail("eval.report_name must be a file name");
    if (sweep.grid.empty()) fail("sweep.grid is empty");
    if (sweep.techniques.empty()) fail("sweep.techniques is empty");
    for (const auto& t : sweep.techniques) {
        if (t != "lora" && t != "prefix") fail("sweep technique '" + t + "' is not lora or prefix");
    }
    for (std::size_t g : sweep.grid) {
        if (g == 0) fail("sweep.grid values must be positive");
    }
    if (sweep.lora_rank == 0) fail("sweep.lora_rank must be positive");
    if (warm.steps > 0 && (warm.micro_batch_tokens == 0 || !(warm.learning_rate > 0.0))) {
        fail("warm phase needs a positive learning rate and token budget");
    }
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t = train;
    t.adapter = adapter;
    t.eval_decode = decode;
    t.seed = derive_seed(seed, "train");
    return t;
}

WarmPhaseConfig RunConfig::warm_config() const {
    WarmPhaseConfig w = warm;
    w.seed = derive_seed(seed, "warm");
    return w;
}

void apply_override(Json& document, std::string_view dotted_key, std::string_view value) {
    Json* node = &document;
    std::size_t start = 0;
    const std::string key(dotted_key);
    while (true) {
        const std::size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part)) throw Error(ErrorKind::Configuration, "unknown field " + key);
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (node->is_object()) throw Error(ErrorKind::Configuration, key + " is a section, not a field");
    if (node->is_string()) {
        *node = std::string(value);
        return;
    }
    try {
        *node = Json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        throw Error(ErrorKind::Configuration, key + ": cannot read '" + std::string(value) + "'");
    }
}

namespace {

void overlay(Json& base, const Json& patch, const std::string& where) {
    if (!patch.is_object()) throw Error(ErrorKind::Configuration, (where.empty() ? "config" : where) + " must be an object");
    for (const auto& [key, value] : patch.items()) {
        const std::string name = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) throw Error(ErrorKind::Configuration, "unknown field " + name);
        if (base[key].is_object() && value.is_object()) {
            overlay(base[key], value, name);
        } else {
            base[key] = value;
        }
    }
}

}  // namespace

RunConfig load_run_config(const std::optional<fs::path>& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
    Json doc = RunConfig{}.to_json();
    fs::path base_dir;
    if (file) {
        if (!fs::is_regular_file(*file)) throw Error(ErrorKind::Configuration, "config file not found: " + file->string());
        Json patch;
        try {
            patch = Json::parse(read_file(*file));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::Configuration, file->string() + ": parse failure at byte " + std::to_string(e.byte));
        }
        overlay(doc, patch, "");
        base_dir = fs::absolute(*file).parent_path();
    }
    for (const auto& [key, value] : overrides) apply_override(doc, key, value);
    return RunConfig::from_json(doc, base_dir);
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Configuration:
        case ErrorKind::Contract:
        case ErrorKind::Dimension:
            return 1;
        case ErrorKind::Transport:
            return 3;
        case ErrorKind::NumericFailure:
            return 4;
        default:
            return 2;
    }
}

namespace {

std::vector<PubMedQARecord> load_dataset(const RunConfig& config) {
    require_file(config.paths.dataset, "dataset");
    return load_pubmedqa(config.paths.dataset);
}

DatasetSplit load_split(const RunConfig& config) {
    require_file(config.paths.manifest, "split manifest (run the split command first)");
    const auto records = load_dataset(config);
    return apply_manifest(read_file(config.paths.manifest), records);
}

const std::vector<PubMedQARecord>& split_part(const DatasetSplit& split, const std::string& name) {
    if (name == "train") return split.train;
    if (name == "validation") return split.validation;
    return split.test;
}

std::set<std::string> held_out_ids(const DatasetSplit& split) {
    std::set<std::string> ids;
    for (const auto& r : split.validation) ids.insert(r.id);
    for (const auto& r : split.test) ids.insert(r.id);
    return ids;
}

void guard_leakage(std::span<const AugmentedRecord> records, const DatasetSplit& split) {
    const auto held_out = held_out_ids(split);
    for (const auto& a : records) {
        if (!a.source_id.empty() && held_out.contains(a.source_id)) {
            throw Error(ErrorKind::Leakage, "augmented record " + a.record.id + " derives from held-out record " + a.source_id);
        }
    }
}

// Training records: the train split, plus the augmented file when enabled.
std::vector<PubMedQARecord> training_records(const RunConfig& config, const DatasetSplit& split) {
    if (!config.corpus.use_augmented) return split.train;
    require_file(config.paths.augmented, "augmented dataset (run the augment command first)");
    const auto generated = parse_augmented_jsonl(read_file(config.paths.augmented));
    guard_leakage(generated, split);
    return augmented_training_set(split.train, generated);
}

std::string data_fingerprint(std::span<const PubMedQARecord> records) { return sha256_hex(render_pubmedqa(records)); }

std::string adapter_label(const AdapterConfig& a) {
    if (a.mode == AdapterMode::Prefix) return "prefix m=" + std::to_string(a.prefix.num_virtual_tokens);
    char buf[64];
    std::snprintf(buf, sizeof buf, "lora r=%zu alpha=%g", a.lora.rank, static_cast<double>(a.lora.alpha));
    return buf;
}

TrainHooks logging_hooks(const Logger& log, std::size_t every, const std::string& tag) {
    TrainHooks hooks;
    if (!log) return hooks;
    hooks.on_step = [log, every, tag](const MetricRecord& m) {
        if (m.step % std::max<std::size_t>(1, every) != 0 && !m.val_accuracy) return;
        std::string line = tag + " step " + std::to_string(m.step) + " lr " + fixed(m.lr, 6) + " loss " + fixed(m.train_loss, 4);
        if (m.val_accuracy) line += " val_acc " + fixed(*m.val_accuracy, 3) + " val_f1 " + fixed(m.val_macro_f1.value_or(0.0), 3);
        log(line);
    };
    return hooks;
}

}  // namespace

IngestSummary command_ingest(const RunConfig& config, const Logger& log) {
    const auto records = load_dataset(config);
    IngestSummary s;
    s.records = records.size();
    for (const auto& r : records) ++s.per_label[static_cast<std::size_t>(r.final_decision)];
    Json j;
    j["dataset"] = config.paths.dataset.generic_string();
    j["records"] = s.records;
    j["per_label"] = Json{{"yes", s.per_label[0]}, {"no", s.per_label[1]}, {"maybe", s.per_label[2]}};
    j["sha256"] = data_fingerprint(records);
    write_file(config.paths.report_dir / "ingest.json", j.dump(2) + "\n");
    log_line(log, "ingested " + std::to_string(s.records) + " records");
    return s;
}

DatasetSplit command_split(const RunConfig& config, const Logger& log) {
    auto records = load_dataset(config);
    DatasetSplit s = split(std::move(records), derive_seed(config.seed, "split"));
    write_file(config.paths.manifest, render_manifest(s));
    log_line(log, "split " + std::to_string(s.train.size()) + "/" + std::to_string(s.validation.size()) + "/" +
                      std::to_string(s.test.size()) + " -> " + config.paths.manifest.string());
    return s;
}

AugmentResult command_augment(const RunConfig& config, GenerationBackend* backend, const Logger& log) {
    // Checked before anything is read so held-out records never reach a backend.
    if (config.augment.split != "train") {
        throw Error(ErrorKind::Leakage, "augmentation only reads the train split, not '" + config.augment.split + "'");
    }
    const DatasetSplit s = load_split(config);

    std::shared_ptr<GenerationBackend> owned;
    PromptSettings prompt{config.augment.model, config.augment.temperature, config.augment.max_tokens};
    if (backend == nullptr) {
        if (config.augment.backend == "mock") {
            const std::uint64_t mock_seed = derive_seed(config.seed, "mock");
            owned = std::make_shared<MockBackend>(mock_seed);
            // The mock's output depends on its seed, so the seed is part of the cache key.
            prompt.model = config.augment.model + "-" + std::to_string(mock_seed);
        } else {
            RemoteSettings rs;
            rs.base_url = config.augment.base_url;
            rs.api_key_env = config.augment.api_key_env;
            rs.initial_backoff = std::chrono::milliseconds(config.augment.retry_backoff_ms);
            owned = std::make_shared<RemoteChatBackend>(rs);
        }
    } else {
        owned = std::shared_ptr<GenerationBackend>(backend, [](GenerationBackend*) {});
    }
    CachingBackend cached(owned, config.paths.cache_dir);

    AugmentOptions options;
    options.n_per_source = config.augment.n_per_source;
    options.concurrency = config.augment.concurrency;
    options.prompt = prompt;
    options.progress_path = config.paths.report_dir / "augment_progress.json";
    AugmentResult result = augment(s.train, config.augment.strategy, cached, options);
    guard_leakage(result.records, s);

    write_file(config.paths.augmented, render_augmented_jsonl(result.records));
    write_file(config.paths.report_dir / "augment_summary.json", result.summary_json());
    std::error_code ec;
    fs::remove(config.paths.report_dir / "augment_progress.json", ec);
    for (const auto& st : result.stats) {
        log_line(log, std::string(to_string(st.strategy)) + ": " + std::to_string(st.requests) + " requests, " +
                          std::to_string(st.parse_failures) + " parse failures, " + std::to_string(st.label_mismatches) +
                          " label mismatches, " + std::to_string(st.dedup_drops) + " duplicates, " +
                          std::to_string(st.kept) + " kept");
    }
    return result;
}

ModelWeights prepare_base(const RunConfig& config, std::span<const PubMedQARecord> train, const Logger& log) {
    ModelWeights init = init_weights(config.model, derive_seed(config.seed, "init"));
    if (config.warm.steps == 0) return init;
    Json key;
    key["model"] = config.model;
    key["warm"] = warm_json(config.warm);
    key["seed"] = config.seed;
    key["data"] = data_fingerprint(train);
    const fs::path path = config.paths.checkpoint_dir / ("warm-" + sha256_hex(key.dump()).substr(0, 16) + ".ckpt");
    if (fs::exists(path)) {
        log_line(log, "warm phase: reusing " + path.string());
        return load_checkpoint(path, &config.model).base;
    }
    ModelWeights warmed = warm_phase(init, train, config.warm_config(), logging_hooks(log, 50, "warm"));
    Checkpoint c;
    c.base = warmed;
    c.adapter = AdapterState::attach(config.model, config.adapter, 0);
    for (const auto& [name, t] : c.adapter.named_tensors()) {
        c.optimizer.m.emplace_back(t.numel(), 0.0f);
        c.optimizer.v.emplace_back(t.numel(), 0.0f);
    }
    save_checkpoint(c, path);
    return warmed;
}

TrainResult command_train(const RunConfig& config, const Logger& log) {
    const DatasetSplit s = load_split(config);
    const auto records = training_records(config, s);
    const ModelWeights base = prepare_base(config, s.train, log);
    AdapterState adapter = AdapterState::attach(config.model, config.adapter, derive_seed(config.seed, "adapter"));
    const TrainConfig tc = config.train_config();
    log_line(log, "training " + adapter_label(config.adapter) + " on " + std::to_string(records.size()) + " records");
    TrainResult result = train(base, std::move(adapter), records, s.validation, tc, logging_hooks(log, tc.eval_every, "train"));
    save_checkpoint(result.best, config.paths.checkpoint_dir / "best.ckpt");
    save_checkpoint(result.last, config.paths.checkpoint_dir / "last.ckpt");
    write_file(config.paths.checkpoint_dir / "metrics.jsonl", render_metrics_jsonl(result.metrics));
    log_line(log, "best step " + std::to_string(result.best_step) + " -> " + (config.paths.checkpoint_dir / "best.ckpt").string());
    return result;
}

namespace {

EvalResult evaluate_checkpoint(const RunConfig& config, const Checkpoint& c, std::span<const PubMedQARecord> records) {
    EvalOptions options;
    options.decode = config.decode;
    options.constrain_to_labels = config.eval.constrain_to_labels;
    options.workers = config.eval.workers;
    EvalResult r = evaluate(c.base, c.adapter.options(), records, options);
    r.report.model = config.eval.model_name;
    r.report.adapter = adapter_label(c.adapter.config);
    r.report.strategy = config.corpus.use_augmented ? std::string(to_string(config.augment.strategy)) : "";
    r.report.seed = config.seed;
    return r;
}

std::string predictions_jsonl(std::span<const Prediction> predictions) {
    std::string out;
    for (const auto& p : predictions) {
        Json j{{"id", p.id},
               {"text", p.text},
               {"predicted", std::string(to_string(p.predicted))},
               {"gold", std::string(to_string(p.gold))}};
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace

EvalResult command_eval(const RunConfig& config, const std::optional<fs::path>& checkpoint, const Logger& log) {
    const fs::path path = checkpoint.value_or(config.paths.checkpoint_dir / "best.ckpt");
    require_file(path, "checkpoint");
    const DatasetSplit s = load_split(config);
    const Checkpoint c = load_checkpoint(path, &config.model);
    EvalResult r = evaluate_checkpoint(config, c, split_part(s, config.eval.split));

    const fs::path report_path = config.paths.report_dir / config.eval.report_name;
    write_file(report_path, r.report.to_json());
    write_file(report_path.string() + ".predictions.jsonl", predictions_jsonl(r.predictions));
    const std::vector<EvalReport> one{r.report};
    write_file(config.paths.report_dir / "table.md", render_table(one));
    log_line(log, "accuracy " + fixed(r.report.accuracy, 3) + " macro-F1 " + fixed(r.report.macro_f1, 3) + " on " +
                      std::to_string(r.report.total) + " " + config.eval.split + " records (" +
                      std::to_string(r.report.decode_failures) + " decode failures) -> " + report_path.string());
    return r;
}

std::string render_sweep_table(const std::vector<SweepRow>& rows) {
    std::string out = "| Technique | Hyperparameter | Accuracy | Macro-F1 |\n|---|---|---|---|\n";
    for (const auto& r : rows) {
        out += "| " + r.technique + " | " + std::to_string(r.hyperparameter) + " | " + fixed(r.accuracy, 3) + " | " +
               fixed(r.macro_f1, 3) + " |\n";
    }
    return out;
}

namespace {

void write_sweep(const RunConfig& config, const std::vector<SweepRow>& rows) {
    Json arr = Json::array();
    for (const auto& r : rows) {
        arr.push_back(Json{{"technique", r.technique},
                           {"hyperparameter", r.hyperparameter},
                           {"accuracy", r.accuracy},
                           {"macro_f1", r.macro_f1},
                           {"run_key", r.run_key}});
    }
    write_file(config.paths.report_dir / "sweep.json", arr.dump(2) + "\n");
    write_file(config.paths.report_dir / "sweep.md", render_sweep_table(rows));
}

}  // namespace

std::vector<SweepRow> command_sweep(const RunConfig& config, const Logger& log) {
    const DatasetSplit s = load_split(config);
    const auto records = training_records(config, s);
    const auto& eval_records = split_part(s, config.eval.split);

    // Virtual tokens occupy positions, so every run gets room for the largest prefix.
    RunConfig shared = config;
    if (std::find(config.sweep.techniques.begin(), config.sweep.techniques.end(), "prefix") != config.sweep.techniques.end()) {
        shared.model.max_seq_len += *std::max_element(config.sweep.grid.begin(), config.sweep.grid.end());
    }
    const ModelWeights base = prepare_base(shared, s.train, log);
    const std::string data = data_fingerprint(records);

    std::vector<SweepRow> rows;
    for (const auto& technique : config.sweep.techniques) {
        for (std::size_t g : config.sweep.grid) {
            RunConfig run = shared;
            if (technique == "lora") {
                run.adapter.mode = AdapterMode::Lora;
                run.adapter.lora.rank = config.sweep.lora_rank;
                run.adapter.lora.alpha = static_cast<float>(g);
            } else {
                run.adapter.mode = AdapterMode::Prefix;
                run.adapter.prefix.num_virtual_tokens = g;
            }
            Json key;
            key["model"] = run.model;
            key["adapter"] = run.adapter;
            key["train"] = run.train_config();
            key["warm"] = warm_json(run.warm);
            key["seed"] = run.seed;
            key["data"] = data;
            const std::string run_key = sha256_hex(key.dump()).substr(0, 16);
            const fs::path path = config.paths.checkpoint_dir / "sweep" / (run_key + ".ckpt");

            try {
                Checkpoint c;
                if (fs::exists(path)) {
                    log_line(log, technique + " " + std::to_string(g) + ": reusing " + path.string());
                    c = load_checkpoint(path, &run.model);
                } else {
                    log_line(log, technique + " " + std::to_string(g) + ": training");
                    AdapterState adapter = AdapterState::attach(run.model, run.adapter, derive_seed(run.seed, "adapter"));
                    const TrainConfig tc = run.train_config();
                    TrainResult tr = train(base, std::move(adapter), records, s.validation, tc,
                                           logging_hooks(log, tc.eval_every, technique + "-" + std::to_string(g)));
                    save_checkpoint(tr.best, path);
                    c = std::move(tr.best);
                }
                const EvalResult r = evaluate_checkpoint(run, c, eval_records);
                rows.push_back({technique, g, r.report.accuracy, r.report.macro_f1, run_key});
                log_line(log, technique + " " + std::to_string(g) + ": accuracy " + fixed(r.report.accuracy, 3) +
                                  " macro-F1 " + fixed(r.report.macro_f1, 3));
            } catch (...) {
                write_sweep(config, rows);
                throw;
            }
            write_sweep(config, rows);
        }
    }
    return rows;
}

std::string command_report(const RunConfig& config, const std::vector<fs::path>& inputs, const Logger& log) {
    std::vector<fs::path> files = inputs;
    if (files.empty() && fs::is_directory(config.paths.report_dir)) {
        for (const auto& entry : fs::directory_iterator(config.paths.report_dir)) {
            const std::string name = entry.path().filename().string();
            if (entry.is_regular_file() && name.size() >= 11 && name.compare(name.size() - 11, 11, "report.json") == 0) {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
    }
    if (files.empty()) throw Error(ErrorKind::Io, "no report files to merge");
    std::vector<EvalReport> reports;
    for (const auto& f : files) {
        require_file(f, "report");
        reports.push_back(EvalReport::from_json(read_file(f)));
    }
    const std::string table = render_table(reports);
    write_file(config.paths.report_dir / "reports.json", render_reports_json(reports));
    write_file(config.paths.report_dir / "table.md", table);
    log_line(log, "merged " + std::to_string(reports.size()) + " reports");
    return table;
}

void command_synth(const fs::path& out, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw Error(ErrorKind::Configuration, "synthetic dataset size must be positive");
    write_file(out, render_pubmedqa(synthesize_pubmedqa(n, seed)));
}

}  // namespace pqft
