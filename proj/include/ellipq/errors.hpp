// Error taxonomy: every failure mode of the library is a distinct exception type,
// so callers (and the CLI) can report precisely what went wrong.
#pragma once

#include <stdexcept>
#include <string>

namespace ellipq {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define ELLIPQ_DEFINE_ERROR(NAME)                                   \
  struct NAME : Error {                                             \
    explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
  }

// Evaluation requested too close to a pole/zero of a theta ratio or phase factor.
ELLIPQ_DEFINE_ERROR(PoleProximity);
// A contour sample landed on (or blew up near) a pole, or no safe radius exists.
ELLIPQ_DEFINE_ERROR(ContourError);
// Doubling the contour node count changed the result beyond tolerance.
ELLIPQ_DEFINE_ERROR(AdaptivityFailure);
// Iterated residue requested beyond the supported nesting depth.
ELLIPQ_DEFINE_ERROR(DepthLimit);
// Target weight is not reachable from the given highest weights.
ELLIPQ_DEFINE_ERROR(UnreachableWeight);
// Residue pairing matrix is numerically singular (non-generic parameters).
ELLIPQ_DEFINE_ERROR(SingularPairing);
// Requested construction method does not exist for these arguments.
ELLIPQ_DEFINE_ERROR(MethodUnavailable);
// Quotient reduction attempted while the invariant-subspace property fails.
ELLIPQ_DEFINE_ERROR(InvarianceViolated);
// Term count of a combinatorial sum exceeds the safety bound.
ELLIPQ_DEFINE_ERROR(CombinatorialOverflow);
// Newton iteration failed to converge from a given start.
ELLIPQ_DEFINE_ERROR(ConvergenceFailure);
// Newton Jacobian is numerically singular.
ELLIPQ_DEFINE_ERROR(JacobianSingular);
// Fewer Bethe solutions found than the completeness count requires.
ELLIPQ_DEFINE_ERROR(SolutionDeficit);
// Parameter configuration is degenerate for the requested computation.
ELLIPQ_DEFINE_ERROR(SingularConfiguration);
// Invalid or inconsistent configuration input.
ELLIPQ_DEFINE_ERROR(ConfigError);
// Unknown check name passed to the registry.
ELLIPQ_DEFINE_ERROR(UnknownCheck);

#undef ELLIPQ_DEFINE_ERROR

}  // namespace ellipq
