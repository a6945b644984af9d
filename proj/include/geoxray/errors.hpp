#pragma once

#include <stdexcept>
#include <string>

namespace geoxray {

struct GeoxrayError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric evaluation produced a non-positive-definite matrix.
struct PositivityViolation : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

// A diffeomorphism mapped a point outside the evaluable pad of a metric.
struct DomainEscape : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

// Boundary-normal gauge construction lost injectivity on the collar.
struct GaugeNotInjective : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

// A geodesic failed to reach the boundary before the trapping timeout.
struct TrappedGeodesic : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

// Boundary-crossing refinement stalled.
struct StepUnderflow : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

// Shooting scan found no bracketing pair of fan directions.
struct NoBracket : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

// Linear solver exceeded its iteration budget.
struct SolverStall : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

// Conjugate-integration loop residuals exceeded tolerance.
struct PathInconsistency : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

// Normal-operator CG residual plateaued before the target.
struct CGStagnation : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

// The extended disk failed the simplicity certification.
struct NonSimpleExtension : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

// Precondition of a gauge experiment: boundary distances differ.
struct DistanceMismatch : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

// A distance oracle failed inside Richardson extrapolation.
struct OracleFailure : GeoxrayError {
  using GeoxrayError::GeoxrayError;
};

}  // namespace geoxray
