// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "pqft/error.hpp"
#include "pqft/evaluator.hpp"
#include "pqft/rng.hpp"
#include "pqft/synthetic.hpp"

using namespace pqft;

namespace {

std::vector<Prediction> make(std::initializer_list<std::pair<Label, Label>> gold_pred) {
    std::vector<Prediction> out;
    int i = 0;
    for (auto [g, p] : gold_pred) out.push_back({std::to_string(i++), "", p, g});
    return out;
}

// Per-class counts taken straight from the prediction list.
double oracle_macro_f1(const std::vector<Prediction>& ps) {
    double sum = 0.0;
    for (Label c : {Label::Yes, Label::No, Label::Maybe}) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (const auto& p : ps) {
            if (p.gold == c && p.predicted == c) ++tp;
            if (p.gold != c && p.predicted == c) ++fp;
            if (p.gold == c && p.predicted != c) ++fn;
        }
        const double precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        sum += precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    return sum / 3.0;
}

double oracle_accuracy(const std::vector<Prediction>& ps) {
    std::size_t hits = 0;
    for (const auto& p : ps) hits += p.gold == p.predicted;
    return static_cast<double>(hits) / static_cast<double>(ps.size());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("hard match extraction") {
    CHECK(hard_match_label("yes") == Label::Yes);
    CHECK(hard_match_label("Maybe, the evidence is mixed.") == Label::Maybe);
    CHECK(hard_match_label("the study is inconclusive") == Label::Invalid);
    CHECK(hard_match_label("  NO!") == Label::No);
    CHECK(hard_match_label("yesterday no") == Label::No);
    CHECK(hard_match_label("") == Label::Invalid);
    Rng rng(2);
    const std::string alphabet = "yesnomaYESNOMAbe .,!?;:'-\t";
    for (int trial = 0; trial < 500; ++trial) {
        std::string s(rng.below(30), ' ');
        for (char& c : s) c = alphabet[rng.below(alphabet.size())];
        const std::string once = normalize_answer(s);
        CHECK(normalize_answer(once) == once);
        CHECK(hard_match_label(once) == hard_match_label(s));
    }
}

TEST_CASE("metrics on the hand fixture") {
    const auto ps = make({{Label::Yes, Label::Yes}, {Label::Yes, Label::No}, {Label::No, Label::No}, {Label::Maybe, Label::Maybe}});
    CHECK(accuracy(ps) == 0.75);
    const auto m = class_metrics(confusion_matrix(ps));
    CHECK(m[0].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m[1].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m[2].f1 == 1.0);
    CHECK(macro_f1(ps) == doctest::Approx(7.0 / 9.0).epsilon(1e-12));

    const auto perfect = make({{Label::Yes, Label::Yes}, {Label::No, Label::No}, {Label::Maybe, Label::Maybe}});
    CHECK(macro_f1(perfect) == 1.0);
    CHECK(accuracy(perfect) == 1.0);

    const auto invalid = make({{Label::Yes, Label::Invalid}, {Label::Yes, Label::Yes}});
    const auto im = class_metrics(confusion_matrix(invalid));
    CHECK(im[0].precision == 1.0);
    CHECK(im[0].recall == 0.5);
    CHECK(im[1].f1 == 0.0);

    try {
        macro_f1(std::vector<Prediction>{});
        FAIL("expected degenerate-input error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateBatch);
    }
}

TEST_CASE("metrics match a brute-force oracle on random prediction sets") {
    Rng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Prediction> ps(1 + rng.below(60));
        for (auto& p : ps) {
            p.gold = static_cast<Label>(rng.below(3));
            p.predicted = static_cast<Label>(rng.below(4));
        }
        CHECK(macro_f1(ps) == oracle_macro_f1(ps));
        CHECK(accuracy(ps) == oracle_accuracy(ps));

        EvalReport r;
        score_report(r, ps);
        std::size_t total = 0, trace = 0, invalid = 0;
        for (std::size_t g = 0; g < 3; ++g) {
            for (std::size_t p = 0; p < 4; ++p) total += r.confusion[g][p];
            trace += r.confusion[g][g];
            invalid += r.confusion[g][3];
        }
        CHECK(total == ps.size());
        const std::size_t errors = ps.size() - trace - invalid;
        CHECK(r.accuracy + static_cast<double>(errors + invalid) / static_cast<double>(ps.size()) == doctest::Approx(1.0));
    }
}

TEST_CASE("report serialization and table layout") {
    EvalReport r;
    r.model = "toy-slm";
    r.accuracy = 0.754;
    r.macro_f1 = 0.520;
    const std::vector<EvalReport> one{r};
    CHECK(render_table(one) == slurp(std::string(PQFT_GOLDEN_DIR) + "/report_table.md"));

    EvalReport full;
    full.model = "m";
    full.adapter = "lora";
    full.strategy = "rewriteQA";
    full.seed = 9;
    score_report(full, make({{Label::Yes, Label::No}, {Label::Maybe, Label::Maybe}, {Label::No, Label::Invalid}}));
    const EvalReport back = EvalReport::from_json(full.to_json());
    CHECK(back.to_json() == full.to_json());
    CHECK(back.confusion == full.confusion);
    CHECK(back.strategy == "rewriteQA");
    CHECK(render_table(std::vector<EvalReport>{full, r}).find("| m | rewriteQA | 0.333 |") != std::string::npos);
    CHECK_THROWS_AS(EvalReport::from_json("{"), Error);
}

TEST_CASE("evaluate: untrained model sits in the chance band, runs are reproducible") {
    ModelConfig mc;
    mc.n_layers = 2;
    const ModelWeights w = init_weights(mc, 77);
    const auto records = synthesize_pubmedqa(60, 4);
    EvalOptions opts;
    opts.decode.num_beams = 3;
    const EvalResult a = evaluate(w, {}, records, opts);
    CHECK(a.report.total == 60);
    CHECK(a.report.decode_failures == 0);
    CHECK(a.report.accuracy >= 0.15);
    CHECK(a.report.accuracy <= 0.55);
    for (const auto& p : a.predictions) CHECK(p.predicted != Label::Invalid);

    opts.workers = 3;
    const EvalResult b = evaluate(w, {}, records, opts);
    CHECK(a.report.to_json() == b.report.to_json());
    for (std::size_t i = 0; i < records.size(); ++i) CHECK(a.predictions[i].text == b.predictions[i].text);
}

TEST_CASE("evaluate: decode failures are counted and scored invalid") {
    ModelConfig mc;
    mc.n_layers = 1;
    mc.max_seq_len = 128;
    const ModelWeights w = init_weights(mc, 1);
    auto records = synthesize_pubmedqa(3, 2);
    records[1].question = std::string(130, 'x') + "?";
    EvalOptions opts;
    opts.decode.num_beams = 2;
    opts.decode.max_new_tokens = 6;
    const EvalResult r = evaluate(w, {}, records, opts);
    CHECK(r.report.decode_failures == 1);
    CHECK(r.predictions[1].predicted == Label::Invalid);
    CHECK_THROWS_AS(evaluate(w, {}, std::vector<PubMedQARecord>{}, opts), Error);
}
