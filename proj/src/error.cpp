// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/error.hpp"

namespace pqft {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension error";
        case ErrorKind::Contract: return "contract error";
        case ErrorKind::DegenerateBatch: return "degenerate-batch error";
        case ErrorKind::SequenceLength: return "sequence-length error";
        case ErrorKind::Vocabulary: return "vocabulary error";
        case ErrorKind::Configuration: return "configuration error";
        case ErrorKind::CorruptFile: return "corrupt-file error";
        case ErrorKind::VersionMismatch: return "version-mismatch error";
        case ErrorKind::ShapeMismatch: return "shape-mismatch error";
        case ErrorKind::Format: return "format error";
        case ErrorKind::Record: return "record error";
        case ErrorKind::Oversize: return "oversize error";
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::Validation: return "validation error";
        case ErrorKind::Transport: return "transport error";
        case ErrorKind::NumericFailure: return "numeric failure";
        case ErrorKind::Leakage: return "leakage error";
        case ErrorKind::Io: return "io error";
    }
    return "error";
}

}  // namespace pqft
