// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pqft {

enum class ErrorKind {
    Dimension,       // tensor shape disagreement
    Contract,        // caller violated a precondition
    DegenerateBatch, // empty loss mask / empty prediction list
    SequenceLength,
    Vocabulary,
    Configuration,
    CorruptFile,
    VersionMismatch,
    ShapeMismatch,
    Format,          // unparseable input document
    Record,          // a single record failed validation
    Oversize,
    Parse,           // generation text missing a field
    Validation,      // generation text with an invalid label
    Transport,
    NumericFailure,
    Leakage,
    Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

}  // namespace pqft
