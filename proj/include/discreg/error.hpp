#pragma once

#include <stdexcept>
#include <string>

namespace discreg {

enum class ErrorKind {
    invalid_argument,
    missing_file,
    bad_header,
    length_mismatch,
    non_finite,
    dim_mismatch,
    channel_mismatch,
    too_small,
    degenerate,
    config,
    budget,
    io,
};

const char* to_string(ErrorKind kind);

/// Every module reports failures through this one exception type; `kind()`
/// lets callers tell a garbled sidecar from a short payload without parsing
/// the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace discreg
