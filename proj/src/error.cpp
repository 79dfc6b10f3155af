#include "vcbf/error.hpp"

namespace vcbf {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::DomainError: return "DomainError";
        case ErrorKind::HyperparameterOutOfRange: return "HyperparameterOutOfRange";
        case ErrorKind::DegenerateData: return "DegenerateData";
        case ErrorKind::QuadratureFailure: return "QuadratureFailure";
        case ErrorKind::UnbalancedData: return "UnbalancedData";
        case ErrorKind::TooFewGroups: return "TooFewGroups";
        case ErrorKind::TooFewReplicates: return "TooFewReplicates";
        case ErrorKind::MalformedRow: return "MalformedRow";
        case ErrorKind::NonFiniteValue: return "NonFiniteValue";
        case ErrorKind::NoDeterministicLimit: return "NoDeterministicLimit";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace vcbf
