#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geoprobe {

enum class ErrorKind {
    format,
    unsupported_layout,
    dtype,
    byte_length,
    io,
    manifest,
    split,
    empty_pool,
    ablation,
    insufficient_data,
    singular,
    numeric,
    dimension,
    training,
    bootstrap,
    unsupported,
    experiment,
    head,
    alignment,
    invalid_argument,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace geoprobe
