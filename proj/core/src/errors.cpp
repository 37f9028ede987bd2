#include "hvi/types.hpp"

namespace hvi {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::NonCoercive: return "NonCoercive";
    case ErrorCode::TimeOutOfRange: return "TimeOutOfRange";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::TauTooLarge: return "TauTooLarge";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::BoundaryHit: return "BoundaryHit";
    case ErrorCode::InvalidTagging: return "InvalidTagging";
    case ErrorCode::InvalidMesh: return "InvalidMesh";
    case ErrorCode::DirichletMismatch: return "DirichletMismatch";
    case ErrorCode::EmptyContactBoundary: return "EmptyContactBoundary";
    case ErrorCode::SmallnessViolated: return "SmallnessViolated";
    case ErrorCode::UnknownLaw: return "UnknownLaw";
    case ErrorCode::NotNested: return "NotNested";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what, std::optional<int> step)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), step_(step)
{
}

Error Error::at_step(int step) const
{
    std::string msg = what();
    const auto prefix = std::string(to_string(code_)) + ": ";
    if (msg.rfind(prefix, 0) == 0) {
        msg.erase(0, prefix.size());
    }
    return Error(code_, msg + " (step " + std::to_string(step) + ")", step);
}

Error Error::with_context(const std::string& context) const
{
    std::string msg = what();
    const auto prefix = std::string(to_string(code_)) + ": ";
    if (msg.rfind(prefix, 0) == 0) {
        msg.erase(0, prefix.size());
    }
    return Error(code_, context + ": " + msg, step_);
}

} // namespace hvi
