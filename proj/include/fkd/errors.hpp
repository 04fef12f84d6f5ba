#pragma once

#include <stdexcept>
#include <string>

namespace fkd {

// Machine-readable failure categories. The CLI maps these onto exit codes:
// validation-type failures exit 2, numerical failures exit 3.
enum class ErrorCategory {
    ConfigParse,
    UnknownPreset,
    ParamOutOfRange,
    AssumptionViolation,
    EvaluationFailure,
    Compatibility,
    BoundaryPoint,
    BoundaryDataMissing,
    MissingHolderData,
    OutOfRange,
    QuadratureFailure,
    Inconclusive,
    InconsistentClassification,
    ConditionLikelyViolated,
    RegressionIllConditioned,
    GridTooCoarse,
    NonMonotoneStencil,
    SolverDiverged,
    MaxIterations,
};

const char* category_name(ErrorCategory c);

// True for config/validation failures, false for numerical ones.
bool is_validation_error(ErrorCategory c);

class EngineError : public std::runtime_error {
public:
    EngineError(ErrorCategory cat, const std::string& msg)
        : std::runtime_error(std::string(category_name(cat)) + ": " + msg), cat_(cat) {}

    ErrorCategory category() const { return cat_; }

private:
    ErrorCategory cat_;
};

[[noreturn]] inline void fail(ErrorCategory cat, const std::string& msg) {
    throw EngineError(cat, msg);
}

} // namespace fkd
