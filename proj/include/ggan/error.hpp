#pragma once

#include <stdexcept>
#include <string>

namespace ggan {

/// Error categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    Usage = 1,
    Parse = 2,
    DataMismatch = 3,
    Config = 4,
    Numeric = 5,
    ArtifactMismatch = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace ggan
