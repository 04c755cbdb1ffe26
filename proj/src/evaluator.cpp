// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pqft/error.hpp"

namespace pqft {

using ordered_json = nlohmann::ordered_json;

std::string normalize_answer(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (unsigned char c : text) {
        if (std::ispunct(c)) continue;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

Label hard_match_label(std::string_view decoded) {
    std::istringstream words(normalize_answer(decoded));
    std::string word;
    while (words >> word) {
        if (word == "yes") return Label::Yes;
        if (word == "no") return Label::No;
        if (word == "maybe") return Label::Maybe;
    }
    return Label::Invalid;
}

Confusion confusion_matrix(std::span<const Prediction> predictions) {
    Confusion c{};
    for (const auto& p : predictions) {
        if (p.gold == Label::Invalid) throw Error(ErrorKind::Contract, "prediction " + p.id + " has no gold label");
        ++c[static_cast<std::size_t>(p.gold)][static_cast<std::size_t>(p.predicted)];
    }
    return c;
}

namespace {

void require_nonempty(std::span<const Prediction> predictions) {
    if (predictions.empty()) throw Error(ErrorKind::DegenerateBatch, "no predictions to score");
}

std::size_t total_of(const Confusion& c) {
    std::size_t n = 0;
    for (const auto& row : c)
        for (std::size_t v : row) n += v;
    return n;
}

double accuracy_of(const Confusion& c) {
    std::size_t hits = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) hits += c[k][k];
    return static_cast<double>(hits) / static_cast<double>(total_of(c));
}

double macro_of(const std::array<ClassMetrics, kNumClasses>& m) {
    double total = 0.0;
    for (const auto& cm : m) total += cm.f1;
    return total / static_cast<double>(kNumClasses);
}

}  // namespace

std::array<ClassMetrics, kNumClasses> class_metrics(const Confusion& c) {
    std::array<ClassMetrics, kNumClasses> out{};
    for (std::size_t k = 0; k < kNumClasses; ++k) {
        std::size_t tp = c[k][k], fp = 0, fn = 0;
        for (std::size_t g = 0; g < kNumClasses; ++g) {
            if (g != k) fp += c[g][k];
        }
        for (std::size_t p = 0; p < 4; ++p) {
            if (p != k) fn += c[k][p];
        }
        ClassMetrics& m = out[k];
        m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return out;
}

double accuracy(std::span<const Prediction> predictions) {
    require_nonempty(predictions);
    return accuracy_of(confusion_matrix(predictions));
}

double macro_f1(std::span<const Prediction> predictions) {
    require_nonempty(predictions);
    return macro_of(class_metrics(confusion_matrix(predictions)));
}

void score_report(EvalReport& report, std::span<const Prediction> predictions) {
    require_nonempty(predictions);
    report.confusion = confusion_matrix(predictions);
    report.total = predictions.size();
    report.accuracy = accuracy_of(report.confusion);
    report.per_class = class_metrics(report.confusion);
    report.macro_f1 = macro_of(report.per_class);
}

namespace {

constexpr std::array<Label, 4> kColumns{Label::Yes, Label::No, Label::Maybe, Label::Invalid};

ordered_json decode_json(const DecodeConfig& d) {
    ordered_json j;
    j["repetition_penalty"] = d.repetition_penalty;
    j["temperature"] = d.temperature;
    j["num_beams"] = d.num_beams;
    j["max_new_tokens"] = d.max_new_tokens;
    j["eos_id"] = d.eos_id;
    return j;
}

ordered_json report_json(const EvalReport& r) {
    ordered_json j;
    j["model"] = r.model;
    j["adapter"] = r.adapter;
    j["strategy"] = r.strategy.empty() ? "none" : r.strategy;
    j["seed"] = r.seed;
    j["decode"] = decode_json(r.decode);
    j["total"] = r.total;
    j["decode_failures"] = r.decode_failures;
    j["accuracy"] = r.accuracy;
    j["macro_f1"] = r.macro_f1;
    ordered_json per = ordered_json::object();
    for (std::size_t k = 0; k < kNumClasses; ++k) {
        per[std::string(to_string(kColumns[k]))] = {
            {"precision", r.per_class[k].precision}, {"recall", r.per_class[k].recall}, {"f1", r.per_class[k].f1}};
    }
    j["per_class"] = per;
    ordered_json conf = ordered_json::object();
    for (std::size_t g = 0; g < kNumClasses; ++g) {
        ordered_json row = ordered_json::object();
        for (std::size_t p = 0; p < 4; ++p) row[std::string(to_string(kColumns[p]))] = r.confusion[g][p];
        conf[std::string(to_string(kColumns[g]))] = row;
    }
    j["confusion"] = conf;
    return j;
}

}  // namespace

std::string EvalReport::to_json() const { return report_json(*this).dump(2) + "\n"; }

EvalReport EvalReport::from_json(std::string_view text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Format, "report parse failure at byte " + std::to_string(e.byte));
    }
    try {
        EvalReport r;
        r.model = j.at("model").get<std::string>();
        r.adapter = j.at("adapter").get<std::string>();
        r.strategy = j.at("strategy").get<std::string>();
        if (r.strategy == "none") r.strategy.clear();
        r.seed = j.at("seed").get<std::uint64_t>();
        const auto& d = j.at("decode");
        r.decode.repetition_penalty = d.at("repetition_penalty").get<float>();
        r.decode.temperature = d.at("temperature").get<float>();
        r.decode.num_beams = d.at("num_beams").get<std::size_t>();
        r.decode.max_new_tokens = d.at("max_new_tokens").get<std::size_t>();
        r.decode.eos_id = d.at("eos_id").get<int>();
        r.total = j.at("total").get<std::size_t>();
        r.decode_failures = j.at("decode_failures").get<std::size_t>();
        r.accuracy = j.at("accuracy").get<double>();
        r.macro_f1 = j.at("macro_f1").get<double>();
        for (std::size_t k = 0; k < kNumClasses; ++k) {
            const auto& m = j.at("per_class").at(std::string(to_string(kColumns[k])));
            r.per_class[k] = {m.at("precision").get<double>(), m.at("recall").get<double>(), m.at("f1").get<double>()};
            const auto& row = j.at("confusion").at(std::string(to_string(kColumns[k])));
            for (std::size_t p = 0; p < 4; ++p) r.confusion[k][p] = row.at(std::string(to_string(kColumns[p]))).get<std::size_t>();
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, std::string("malformed report: ") + e.what());
    }
}

EvalResult evaluate(const ModelWeights& weights, const ForwardOptions& adapters, std::span<const PubMedQARecord> records,
                    const EvalOptions& options) {
    if (records.empty()) throw Error(ErrorKind::DegenerateBatch, "no records to evaluate");
    options.decode.validate();

    LogitsPipeline pipeline = LogitsPipeline::standard(options.decode);
    if (options.constrain_to_labels) {
        std::vector<std::vector<int>> allowed;
        for (Label l : {Label::Yes, Label::No, Label::Maybe}) {
            auto ids = ByteTokenizer::encode(to_string(l));
            ids.push_back(options.decode.eos_id);
            allowed.push_back(std::move(ids));
        }
        pipeline.append(std::make_shared<AllowedSequencesProcessor>(std::move(allowed)));
    }
    const std::size_t virtual_tokens = adapters.prefix != nullptr ? adapters.prefix->size() : 0;
    const std::size_t budget = weights.config.max_seq_len - std::min(weights.config.max_seq_len, virtual_tokens);

    std::vector<Prediction> predictions(records.size());
    std::vector<std::uint8_t> failed(records.size(), 0);
    auto run = [&](std::size_t i) {
        const PubMedQARecord& r = records[i];
        Prediction& p = predictions[i];
        p.id = r.id;
        p.gold = r.final_decision;
        try {
            const Prompt prompt = format_prompt(r, budget, options.decode.max_new_tokens);
            ForwardOptions fo = adapters;
            fo.prefix_position = prompt.question_start;
            const Hypothesis h = beam_search(transformer_scorer(weights, fo), prompt.ids, options.decode, pipeline);
            p.text = ByteTokenizer::decode(h.tokens);
            p.predicted = hard_match_label(p.text);
        } catch (const Error&) {
            p.predicted = Label::Invalid;
            failed[i] = 1;
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, records.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < records.size(); ++i) run(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < records.size(); i += workers) run(i);
            });
        }
        for (auto& t : pool) t.join();
    }

    EvalResult result;
    result.report.decode = options.decode;
    result.report.decode_failures = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
    score_report(result.report, predictions);
    result.predictions = std::move(predictions);
    return result;
}

namespace {

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

std::string render_table(std::span<const EvalReport> reports) {
    std::string out = "| Model | Augment. | Accuracy | Macro-F1 |\n|---|---|---|---|\n";
    for (const auto& r : reports) {
        out += "| " + r.model + " | " + (r.strategy.empty() ? "none" : r.strategy) + " | " + fixed3(r.accuracy) + " | " +
               fixed3(r.macro_f1) + " |\n";
    }
    return out;
}

std::string render_reports_json(std::span<const EvalReport> reports) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    return arr.dump(2) + "\n";
}

}  // namespace pqft
