#include "fkd/errors.hpp"

namespace fkd {

const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::ConfigParse: return "config/parse";
        case ErrorCategory::UnknownPreset: return "config/unknown-preset";
        case ErrorCategory::ParamOutOfRange: return "config/param-out-of-range";
        case ErrorCategory::AssumptionViolation: return "validation/assumption";
        case ErrorCategory::EvaluationFailure: return "validation/evaluation";
        case ErrorCategory::Compatibility: return "compatibility/missing-field";
        case ErrorCategory::BoundaryPoint: return "domain/boundary-point";
        case ErrorCategory::BoundaryDataMissing: return "domain/boundary-data-missing";
        case ErrorCategory::MissingHolderData: return "model/missing-holder-data";
        case ErrorCategory::OutOfRange: return "domain/out-of-range";
        case ErrorCategory::QuadratureFailure: return "numeric/quadrature-failure";
        case ErrorCategory::Inconclusive: return "numeric/inconclusive";
        case ErrorCategory::InconsistentClassification: return "numeric/inconsistent-classification";
        case ErrorCategory::ConditionLikelyViolated: return "numeric/condition-likely-violated";
        case ErrorCategory::RegressionIllConditioned: return "numeric/regression-ill-conditioned";
        case ErrorCategory::GridTooCoarse: return "numeric/grid-too-coarse";
        case ErrorCategory::NonMonotoneStencil: return "numeric/non-monotone-stencil";
        case ErrorCategory::SolverDiverged: return "numeric/solver-diverged";
        case ErrorCategory::MaxIterations: return "numeric/max-iterations";
    }
    return "unknown";
}

bool is_validation_error(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::ConfigParse:
        case ErrorCategory::UnknownPreset:
        case ErrorCategory::ParamOutOfRange:
        case ErrorCategory::AssumptionViolation:
        case ErrorCategory::EvaluationFailure:
        case ErrorCategory::Compatibility:
        case ErrorCategory::BoundaryPoint:
        case ErrorCategory::BoundaryDataMissing:
        case ErrorCategory::MissingHolderData:
        case ErrorCategory::OutOfRange:
            return true;
        default:
            return false;
    }
}

} // namespace fkd
