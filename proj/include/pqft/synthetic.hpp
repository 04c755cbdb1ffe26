// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pqft/corpus.hpp"
#include "pqft/rng.hpp"

namespace pqft {

// Small PubMedQA-shaped records whose decision is carried by the wording of
// one context sentence ("clearly lowered" / "did not change" / "were
// unclear"). Used as training fixtures and by the offline generation mock.
PubMedQARecord synthesize_record(Rng& rng, Label label, std::string id);

// n records with labels balanced across the three classes (counts differ by at
// most one), ids numbered from id_start.
std::vector<PubMedQARecord> synthesize_pubmedqa(std::size_t n, std::uint64_t seed, std::uint64_t id_start = 10000000);

}  // namespace pqft
