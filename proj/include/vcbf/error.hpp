#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vcbf {

// Every failure the library reports carries one of these kinds. The CLI maps
// them onto exit codes, so keep the list in sync with cli.cpp.
enum class ErrorKind {
    DomainError,
    HyperparameterOutOfRange,
    DegenerateData,
    QuadratureFailure,
    UnbalancedData,
    TooFewGroups,
    TooFewReplicates,
    MalformedRow,
    NonFiniteValue,
    NoDeterministicLimit,
    InvalidArgument,
    IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace vcbf
