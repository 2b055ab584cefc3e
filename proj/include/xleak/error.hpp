#pragma once

#include <stdexcept>
#include <string>

namespace xleak {

enum class ErrorKind {
    input_shape,
    class_out_of_range,
    unsupported_layer,
    unsupported_architecture,
    invalid_argument,
    parse,
    io,
    config,
    training_diverged,
    singular_design,
    undefined_baseline,
};

const char* error_kind_name(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it onto an exit code without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) throw Error(kind, message);
}

}  // namespace xleak
