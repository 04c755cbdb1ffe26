// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <set>

#include "pqft/corpus.hpp"
#include "pqft/error.hpp"
#include "pqft/rng.hpp"
#include "pqft/synthetic.hpp"

using namespace pqft;

namespace {

constexpr const char* kFixture = R"({
  "21645374": {
    "QUESTION": "Do mitochondria play a role in remodelling lace plant leaves?",
    "CONTEXTS": ["Programmed cell death is ubiquitous.", "The lace plant forms perforations."],
    "LONG_ANSWER": "Results depict mitochondrial dynamics.",
    "final_decision": "Yes"
  },
  "16418930": {
    "QUESTION": "Landolt C and snellen e acuity: differences in strabismus amblyopia?",
    "CONTEXTS": ["Assessment of visual acuity depends on the optotypes used."],
    "LONG_ANSWER": "Using the charts interchangeably is not advisable.",
    "final_decision": "no"
  }
})";

Label kind_label(std::size_t i) { return static_cast<Label>(i % 3); }

std::vector<PubMedQARecord> numbered(std::size_t n) {
    std::vector<PubMedQARecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        PubMedQARecord r;
        r.id = std::to_string(1000 + i);
        r.question = "q" + std::to_string(i) + "?";
        r.final_decision = kind_label(i);
        out.push_back(r);
    }
    return out;
}

std::set<std::string> ids_of(const std::vector<PubMedQARecord>& part) {
    std::set<std::string> out;
    for (const auto& r : part) out.insert(r.id);
    return out;
}

}  // namespace

TEST_CASE("load: fields map from the upstream schema in document order") {
    const auto records = parse_pubmedqa(kFixture);
    REQUIRE(records.size() == 2);
    CHECK(records[0].id == "21645374");
    CHECK(records[0].question == "Do mitochondria play a role in remodelling lace plant leaves?");
    CHECK(records[0].contexts.size() == 2);
    CHECK(records[0].long_answer == "Results depict mitochondrial dynamics.");
    CHECK(records[0].final_decision == Label::Yes);
    CHECK(records[1].id == "16418930");
    CHECK(records[1].final_decision == Label::No);
    CHECK(parse_pubmedqa(render_pubmedqa(records)) == records);
}

TEST_CASE("load: unknown label names the PMID, syntax errors carry an offset") {
    try {
        parse_pubmedqa(R"({"777": {"QUESTION": "q?", "CONTEXTS": [], "LONG_ANSWER": "", "final_decision": "unknown"}})");
        FAIL("expected a record error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Record);
        CHECK(std::string(e.what()).find("777") != std::string::npos);
    }
    try {
        parse_pubmedqa(R"({"1": {"QUESTION": "q?",, }})");
        FAIL("expected a format error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Format);
        CHECK(std::string(e.what()).find("byte 25") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_pubmedqa(R"({"1": {"QUESTION": "", "CONTEXTS": [], "final_decision": "yes"}})"), Error);
    CHECK_THROWS_AS(load_pubmedqa("/nonexistent/pqa.json"), Error);
}

TEST_CASE("split sizes follow the 45/5/rest rule") {
    const auto s = split(numbered(1000), 7);
    CHECK(s.train.size() == 450);
    CHECK(s.validation.size() == 50);
    CHECK(s.test.size() == 500);
    const auto sizes = split_sizes(100);
    CHECK(sizes.train == 45);
    CHECK(sizes.validation == 5);
    CHECK(sizes.test == 50);
    // floor(0.45·37) = 16, floor(0.05·37) = 1
    CHECK(split_sizes(37).train == 16);
    CHECK(split_sizes(37).validation == 1);
    CHECK(split_sizes(37).test == 20);
}

TEST_CASE("split: deterministic, disjoint, covering") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.below(300);
        const auto records = numbered(n);
        const std::uint64_t seed = rng.next_u64();
        const auto a = split(records, seed);
        const auto b = split(records, seed);
        CHECK(render_manifest(a) == render_manifest(b));
        const auto tr = ids_of(a.train), va = ids_of(a.validation), te = ids_of(a.test);
        std::set<std::string> all;
        all.insert(tr.begin(), tr.end());
        all.insert(va.begin(), va.end());
        all.insert(te.begin(), te.end());
        CHECK(all.size() == n);
        CHECK(all == ids_of(records));
        const auto back = apply_manifest(render_manifest(a), records);
        CHECK(render_manifest(back) == render_manifest(a));
        CHECK(back.train == a.train);
    }
    CHECK(render_manifest(split(numbered(50), 1)) != render_manifest(split(numbered(50), 2)));
}

TEST_CASE("split rejects duplicate ids") {
    auto records = numbered(10);
    records[3].id = records[7].id;
    CHECK_THROWS_AS(split(records, 1), Error);
}

TEST_CASE("tokenizer round-trips random byte strings") {
    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        std::string s(rng.below(64), '\0');
        for (char& c : s) c = static_cast<char>(rng.below(256));
        const auto ids = ByteTokenizer::encode(s);
        CHECK(std::all_of(ids.begin(), ids.end(), [](int id) { return id >= 0 && id < 256; }));
        CHECK(ByteTokenizer::decode(ids) == s);
    }
    CHECK(ByteTokenizer::kBos >= 256);
    CHECK(ByteTokenizer::kEos >= 256);
    CHECK(ByteTokenizer::kPad >= 256);
    const std::vector<int> bad{300};
    CHECK_THROWS_AS(ByteTokenizer::decode(bad), Error);
}

TEST_CASE("format_example: template, mask, question_start") {
    const auto records = parse_pubmedqa(kFixture);
    const auto ex = format_example(records[1], 256);
    const std::string text = ByteTokenizer::decode(ex.ids);
    CHECK(text == "context: Assessment of visual acuity depends on the optotypes used. question: Landolt C and snellen e "
                  "acuity: differences in strabismus amblyopia? answer: no");
    CHECK(ex.ids.front() == ByteTokenizer::kBos);
    CHECK(ex.ids.back() == ByteTokenizer::kEos);
    std::vector<int> masked;
    for (std::size_t i = 0; i < ex.ids.size(); ++i)
        if (ex.loss_mask[i]) masked.push_back(ex.ids[i]);
    CHECK(masked == std::vector<int>{'n', 'o', ByteTokenizer::kEos});
    const std::vector<int> tail(ex.ids.begin() + static_cast<std::ptrdiff_t>(ex.question_start),
                                ex.ids.begin() + static_cast<std::ptrdiff_t>(ex.question_start) + 9);
    CHECK(ByteTokenizer::decode(tail) == "question:");

    const auto seq = to_training(ex);
    CHECK(seq.inputs.size() == ex.ids.size() - 1);
    CHECK(seq.targets.back() == ByteTokenizer::kEos);
    CHECK(std::count(seq.mask.begin(), seq.mask.end(), 1) == 3);

    const auto prompt = format_prompt(records[1], 256, 16);
    CHECK(ByteTokenizer::decode(prompt.ids) + "no" == text);
    CHECK(prompt.question_start == ex.question_start);
}

TEST_CASE("format_example: left truncation keeps question and answer") {
    PubMedQARecord r;
    r.id = "5";
    r.question = "Is it?";
    r.contexts = {std::string(200, 'a') + "TAIL"};
    r.final_decision = Label::Maybe;
    // BOS + "context: " + ctx + " question: Is it? answer: maybe" + EOS
    const std::size_t fixed = 1 + 9 + 1 + 16 + 1 + 13 + 1;
    REQUIRE(fixed == 42);
    const auto ex = format_example(r, 64);
    CHECK(ex.ids.size() == 64);
    const std::string text = ByteTokenizer::decode(ex.ids);
    CHECK(text == "context: " + std::string(64 - fixed - 4, 'a') + "TAIL question: Is it? answer: maybe");
    CHECK(ByteTokenizer::decode(std::span(ex.ids).subspan(ex.question_start, 9)) == "question:");
    try {
        format_example(r, 41);
        FAIL("expected oversize");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Oversize);
    }
    CHECK(format_example(r, 42).ids.size() == 42);
}

TEST_CASE("question_start property over synthetic records") {
    const auto records = synthesize_pubmedqa(200, 5);
    Rng rng(9);
    for (const auto& r : records) {
        const std::size_t limit = 80 + rng.below(180);
        SequenceExample ex;
        try {
            ex = format_example(r, limit);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Oversize);
            continue;
        }
        CHECK(ex.ids.size() <= limit);
        CHECK(ByteTokenizer::decode(std::span(ex.ids).subspan(ex.question_start, 9)) == "question:");
        CHECK(std::count(ex.loss_mask.begin(), ex.loss_mask.end(), 1) == static_cast<long>(to_string(r.final_decision).size() + 1));
    }
}

TEST_CASE("synthetic records are balanced, valid, and seeded") {
    const auto a = synthesize_pubmedqa(99, 1);
    const auto b = synthesize_pubmedqa(99, 1);
    CHECK(a == b);
    std::array<int, 3> counts{};
    for (const auto& r : a) {
        r.validate();
        ++counts[static_cast<std::size_t>(r.final_decision)];
        CHECK(format_example(r, 256).ids.size() <= 256);
    }
    CHECK(counts == std::array<int, 3>{33, 33, 33});
    CHECK(ids_of(a).size() == 99);
    CHECK(synthesize_pubmedqa(99, 2) != a);
}
