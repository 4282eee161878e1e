// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace egogs {

enum class ErrorKind {
    InvalidInput,
    ContractViolation,
    InvalidAnnotation,
    EmptyObject,
    ObjectLost,
    OutOfRange,
    Load,
    Parse,
    Divergence,
};

const char *to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (and the CLI)
/// can report the failing stage without parsing messages.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

inline const char *to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::ContractViolation: return "contract-violation";
    case ErrorKind::InvalidAnnotation: return "invalid-annotation";
    case ErrorKind::EmptyObject: return "empty-object";
    case ErrorKind::ObjectLost: return "object-lost";
    case ErrorKind::OutOfRange: return "out-of-range";
    case ErrorKind::Load: return "load";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Divergence: return "divergence";
    }
    return "unknown";
}

} // namespace egogs
