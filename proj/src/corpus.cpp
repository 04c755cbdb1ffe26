// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pqft/error.hpp"
#include "pqft/rng.hpp"

namespace pqft {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Label label) {
    switch (label) {
        case Label::Yes: return "yes";
        case Label::No: return "no";
        case Label::Maybe: return "maybe";
        case Label::Invalid: return "invalid";
    }
    return "invalid";
}

std::optional<Label> parse_label(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "yes") return Label::Yes;
    if (lower == "no") return Label::No;
    if (lower == "maybe") return Label::Maybe;
    return std::nullopt;
}

void PubMedQARecord::validate() const {
    if (question.empty()) throw Error(ErrorKind::Record, "record " + id + ": empty question");
    if (final_decision == Label::Invalid) throw Error(ErrorKind::Record, "record " + id + ": invalid final_decision");
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string field_string(const ordered_json& obj, const std::string& id, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw Error(ErrorKind::Record, "record " + id + ": missing string field " + key);
    }
    return it->get<std::string>();
}

}  // namespace

std::vector<PubMedQARecord> parse_pubmedqa(std::string_view text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Format, "parse failure at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorKind::Format, "top level must be an object keyed by PMID");

    std::vector<PubMedQARecord> records;
    records.reserve(doc.size());
    for (const auto& [pmid, body] : doc.items()) {
        if (!body.is_object()) throw Error(ErrorKind::Record, "record " + pmid + ": not an object");
        PubMedQARecord r;
        r.id = pmid;
        r.question = field_string(body, pmid, "QUESTION");
        r.long_answer = body.contains("LONG_ANSWER") ? field_string(body, pmid, "LONG_ANSWER") : "";
        auto ctx = body.find("CONTEXTS");
        if (ctx == body.end() || !ctx->is_array()) {
            throw Error(ErrorKind::Record, "record " + pmid + ": missing array field CONTEXTS");
        }
        for (const auto& c : *ctx) {
            if (!c.is_string()) throw Error(ErrorKind::Record, "record " + pmid + ": non-string context");
            r.contexts.push_back(c.get<std::string>());
        }
        const std::string decision = field_string(body, pmid, "final_decision");
        auto label = parse_label(decision);
        if (!label) throw Error(ErrorKind::Record, "record " + pmid + ": unknown final_decision '" + decision + "'");
        r.final_decision = *label;
        r.validate();
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<PubMedQARecord> load_pubmedqa(const std::filesystem::path& path) {
    return parse_pubmedqa(read_file(path));
}

std::string render_pubmedqa(std::span<const PubMedQARecord> records) {
    ordered_json doc = ordered_json::object();
    for (const auto& r : records) {
        ordered_json body;
        body["QUESTION"] = r.question;
        body["CONTEXTS"] = r.contexts;
        body["LONG_ANSWER"] = r.long_answer;
        body["final_decision"] = std::string(to_string(r.final_decision));
        doc[r.id] = std::move(body);
    }
    return doc.dump(2) + "\n";
}

SplitSizes split_sizes(std::size_t n) {
    SplitSizes s;
    s.train = n * 45 / 100;
    s.validation = n * 5 / 100;
    s.test = n - s.train - s.validation;
    return s;
}

DatasetSplit split(std::vector<PubMedQARecord> records, std::uint64_t seed) {
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.id).second) throw Error(ErrorKind::Record, "duplicate record id " + r.id);
    }
    Rng rng(seed);
    rng.shuffle(std::span<PubMedQARecord>(records));
    const SplitSizes sizes = split_sizes(records.size());
    DatasetSplit out;
    out.seed = seed;
    auto begin = std::make_move_iterator(records.begin());
    out.train.assign(begin, begin + static_cast<std::ptrdiff_t>(sizes.train));
    begin += static_cast<std::ptrdiff_t>(sizes.train);
    out.validation.assign(begin, begin + static_cast<std::ptrdiff_t>(sizes.validation));
    begin += static_cast<std::ptrdiff_t>(sizes.validation);
    out.test.assign(begin, std::make_move_iterator(records.end()));
    return out;
}

std::string render_manifest(const DatasetSplit& s) {
    auto ids = [](const std::vector<PubMedQARecord>& part) {
        std::vector<std::string> out;
        for (const auto& r : part) out.push_back(r.id);
        return out;
    };
    ordered_json doc;
    doc["seed"] = s.seed;
    doc["train"] = ids(s.train);
    doc["validation"] = ids(s.validation);
    doc["test"] = ids(s.test);
    return doc.dump(2) + "\n";
}

DatasetSplit apply_manifest(std::string_view manifest, std::span<const PubMedQARecord> records) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(manifest);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Format, "manifest parse failure at byte " + std::to_string(e.byte));
    }
    std::map<std::string, const PubMedQARecord*> by_id;
    for (const auto& r : records) by_id[r.id] = &r;

    DatasetSplit out;
    out.seed = doc.value("seed", std::uint64_t{0});
    std::set<std::string> used;
    auto fill = [&](const char* key, std::vector<PubMedQARecord>& part) {
        if (!doc.contains(key) || !doc[key].is_array()) throw Error(ErrorKind::Format, std::string("manifest lacks ") + key);
        for (const auto& id_json : doc[key]) {
            const auto id = id_json.get<std::string>();
            auto it = by_id.find(id);
            if (it == by_id.end()) throw Error(ErrorKind::Record, "manifest id " + id + " not in dataset");
            if (!used.insert(id).second) throw Error(ErrorKind::Record, "manifest lists " + id + " twice");
            part.push_back(*it->second);
        }
    };
    fill("train", out.train);
    fill("validation", out.validation);
    fill("test", out.test);
    return out;
}

std::vector<int> ByteTokenizer::encode(std::string_view text) {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(c);
    return ids;
}

std::string ByteTokenizer::decode(std::span<const int> ids) {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id >= static_cast<int>(kVocabSize)) {
            throw Error(ErrorKind::Vocabulary, "token id " + std::to_string(id) + " outside vocabulary");
        }
        if (id < 256) out.push_back(static_cast<char>(id));
    }
    return out;
}

std::string QaTemplate::render(std::string_view contexts, std::string_view question, std::string_view label) const {
    std::string out;
    out.reserve(context_prefix.size() + contexts.size() + question_prefix.size() + question.size() +
                answer_prefix.size() + label.size() + 2);
    out += context_prefix;
    out += contexts;
    out += ' ';
    out += question_prefix;
    out += question;
    out += ' ';
    out += answer_prefix;
    out += label;
    return out;
}

std::string join_contexts(std::span<const std::string> contexts) {
    std::string out;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        if (i) out += ' ';
        out += contexts[i];
    }
    return out;
}

namespace {

// Drops leading context bytes until `fixed + contexts` fits in `limit`.
std::string_view fit_contexts(std::string_view contexts, std::size_t fixed, std::size_t limit, const std::string& id) {
    if (fixed > limit) {
        throw Error(ErrorKind::Oversize, "record " + id + ": question and answer need " + std::to_string(fixed) +
                                             " tokens, limit is " + std::to_string(limit));
    }
    const std::size_t room = limit - fixed;
    if (contexts.size() > room) contexts.remove_prefix(contexts.size() - room);
    return contexts;
}

}  // namespace

SequenceExample format_example(const PubMedQARecord& record, std::size_t max_seq_len, const QaTemplate& tmpl) {
    record.validate();
    const std::string joined = join_contexts(record.contexts);
    const std::string_view label = to_string(record.final_decision);
    const std::size_t fixed = tmpl.render("", record.question, label).size() + 2;  // BOS, EOS
    const std::string_view contexts = fit_contexts(joined, fixed, max_seq_len, record.id);

    SequenceExample ex;
    ex.id = record.id;
    ex.label = record.final_decision;
    ex.ids.push_back(ByteTokenizer::kBos);
    const auto body = ByteTokenizer::encode(tmpl.render(contexts, record.question, label));
    ex.ids.insert(ex.ids.end(), body.begin(), body.end());
    ex.ids.push_back(ByteTokenizer::kEos);
    ex.question_start = 1 + tmpl.context_prefix.size() + contexts.size() + 1;
    ex.loss_mask.assign(ex.ids.size(), 0);
    for (std::size_t i = ex.ids.size() - 1 - label.size(); i < ex.ids.size(); ++i) ex.loss_mask[i] = 1;
    return ex;
}

TrainingSequence to_training(const SequenceExample& example) {
    if (example.ids.size() < 2) throw Error(ErrorKind::Contract, "example " + example.id + " is too short to train on");
    TrainingSequence seq;
    seq.inputs.assign(example.ids.begin(), example.ids.end() - 1);
    seq.targets.assign(example.ids.begin() + 1, example.ids.end());
    seq.mask.assign(example.loss_mask.begin() + 1, example.loss_mask.end());
    seq.question_start = example.question_start;
    return seq;
}

Prompt format_prompt(const PubMedQARecord& record, std::size_t max_seq_len, std::size_t reserve, const QaTemplate& tmpl) {
    record.validate();
    if (reserve >= max_seq_len) {
        throw Error(ErrorKind::SequenceLength, "no room to generate: reserve " + std::to_string(reserve) +
                                                   " >= max_seq_len " + std::to_string(max_seq_len));
    }
    const std::string joined = join_contexts(record.contexts);
    const std::size_t fixed = tmpl.render("", record.question, "").size() + 1;  // BOS
    const std::string_view contexts = fit_contexts(joined, fixed, max_seq_len - reserve, record.id);

    Prompt p;
    p.id = record.id;
    p.label = record.final_decision;
    p.ids.push_back(ByteTokenizer::kBos);
    const auto body = ByteTokenizer::encode(tmpl.render(contexts, record.question, ""));
    p.ids.insert(p.ids.end(), body.begin(), body.end());
    p.question_start = 1 + tmpl.context_prefix.size() + contexts.size() + 1;
    return p;
}

}  // namespace pqft
