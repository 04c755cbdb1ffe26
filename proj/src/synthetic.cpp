// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/synthetic.hpp"

#include <array>
#include <cctype>
#include <string_view>

namespace pqft {

namespace {

constexpr std::array<std::string_view, 16> kInterventions{
    "aspirin", "metformin", "statins", "exercise", "vitamin D", "early surgery", "zinc", "caffeine",
    "melatonin", "probiotics", "iron", "yoga", "fasting", "insulin", "lithium", "massage"};
constexpr std::array<std::string_view, 10> kOutcomes{
    "mortality", "pain scores", "blood pressure", "relapse", "sleep quality",
    "infection rates", "bone density", "recovery time", "memory loss", "weight gain"};
constexpr std::array<std::string_view, 8> kPopulations{
    "adults", "children", "older women", "smokers", "athletes", "nurses", "diabetics", "veterans"};
constexpr std::array<std::string_view, 4> kVerbs{"reduce", "improve", "affect", "change"};

constexpr std::array<std::string_view, 3> kYes{"clearly lowered", "strongly improved", "markedly reduced"};
constexpr std::array<std::string_view, 3> kNo{"did not change", "had no effect on", "failed to alter"};
constexpr std::array<std::string_view, 3> kMaybe{"may have altered", "possibly affected", "had unclear effects on"};

template <std::size_t N>
std::string_view pick(Rng& rng, const std::array<std::string_view, N>& items) {
    return items[static_cast<std::size_t>(rng.below(N))];
}

std::string capitalize(std::string_view s) {
    std::string out(s);
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

}  // namespace

PubMedQARecord synthesize_record(Rng& rng, Label label, std::string id) {
    const std::string iv(pick(rng, kInterventions));
    const std::string oc(pick(rng, kOutcomes));
    const std::string pop(pick(rng, kPopulations));
    const std::string verb(pick(rng, kVerbs));
    const auto cohort = 20 + rng.below(480);
    const auto months = 3 + rng.below(34);

    std::string_view cue;
    std::string answer;
    switch (label) {
        case Label::Yes:
            cue = pick(rng, kYes);
            answer = capitalize(iv) + " is beneficial for " + oc + ".";
            break;
        case Label::No:
            cue = pick(rng, kNo);
            answer = capitalize(iv) + " offers no benefit for " + oc + ".";
            break;
        default:
            cue = pick(rng, kMaybe);
            answer = "The benefit of " + iv + " for " + oc + " is uncertain.";
            break;
    }

    PubMedQARecord r;
    r.id = std::move(id);
    r.question = "Does " + iv + " " + verb + " " + oc + " in " + pop + "?";
    std::string background = "We followed " + std::to_string(cohort) + " " + pop + " for " + std::to_string(months) + " months.";
    std::string finding = capitalize(iv) + " " + std::string(cue) + " " + oc + ".";
    if (rng.below(2) == 0) {
        r.contexts = {std::move(background), std::move(finding)};
    } else {
        r.contexts = {std::move(finding), std::move(background)};
    }
    r.long_answer = std::move(answer);
    r.final_decision = label;
    return r;
}

std::vector<PubMedQARecord> synthesize_pubmedqa(std::size_t n, std::uint64_t seed, std::uint64_t id_start) {
    std::vector<Label> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<Label>(i % kNumClasses);
    Rng rng(seed);
    rng.shuffle(std::span<Label>(labels));
    std::vector<PubMedQARecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(synthesize_record(rng, labels[i], std::to_string(id_start + i)));
    return out;
}

}  // namespace pqft
