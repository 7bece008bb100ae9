#pragma once

#include <stdexcept>
#include <string>

namespace nrc {

enum class ErrorKind {
    InvalidArgument,
    OutOfRange,
    MissingInput,
    SchemaMismatch,
    ReplayMismatch,
    Divergence,
    FitFailure,
    Io,
};

/// Base error for the library; the kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace nrc
