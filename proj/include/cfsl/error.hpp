#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfsl {

enum class ErrorCode {
    ShapeMismatch,
    ZeroRow,
    IndexOutOfRange,
    BadMagic,
    UnsupportedVersion,
    UnsupportedDtype,
    TruncatedPayload,
    SizeOverflow,
    NonFinite,
    IoFailure,
    BadManifest,
    UnknownItem,
    InsufficientClasses,
    InsufficientItems,
    ClassListMismatch,
    EmptySupport,
    EmptyClass,
    EmptyQuerySet,
    InvalidTables,
    PositivityViolation,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures surface as this exception; `code()` is what tests and
// the CLI dispatch on, `what()` carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace cfsl
