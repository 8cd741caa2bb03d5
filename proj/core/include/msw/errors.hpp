#pragma once

#include <stdexcept>
#include <string>

namespace msw {

/// Failure classes surfaced by the numerical pipeline. The CLI maps these
/// onto process exit codes.
enum class ErrorKind {
    Config,
    NearCriticalMu,
    NewtonDivergence,
    DegenerateCritical,
    StepFailure,
    BudgetExceeded,
    ContinuationStall,
    FoldDegenerate,
    NotFound,
    NonRegularLambda,
    TangentialConnection,
    AmbiguousDecay,
    GraphInconsistency,
    TraceFailure,
    BijectionMismatch,
    NoExit,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace msw
