#pragma once

#include <stdexcept>
#include <string>

namespace treemfe {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Lattice / chain construction violates a structural requirement
// (e.g. d_tilde < exp(r*dt) < u_tilde fails, or a transition row is not stochastic).
struct InvalidParams : Error {
    using Error::Error;
};

// Config document does not match the schema (unknown or missing field).
struct SchemaError : Error {
    using Error::Error;
};

// Config parsed but a model invariant fails; message names the field path.
struct InvariantError : Error {
    using Error::Error;
};

struct IndexOutOfRange : Error {
    using Error::Error;
};

// A forward probability slice drifted away from total mass 1.
struct ProbabilityLeak : Error {
    using Error::Error;
};

// Pivot below relative threshold in a dense solve.
struct SingularMatrix : Error {
    using Error::Error;
};

// Laurent expansion requested for an invertible matrix.
struct NotSingular : Error {
    using Error::Error;
};

// Resolvent pole of order >= 2: left and right kernel vectors are orthogonal.
struct HigherOrderPole : Error {
    using Error::Error;
};

// Continuity probe requires a simple pole.
struct SimplePoleRequired : Error {
    using Error::Error;
};

// Interaction regime admits no equilibrium (kernel dimension >= 2) or the
// requested solver does not cover the classified regime.
struct RegimeError : Error {
    explicit RegimeError(const std::string& msg, int kernel_dim_ = 0)
        : Error(msg), kernel_dim(kernel_dim_) {}
    int kernel_dim;
};

// Non-degeneracy condition of the singular branch fails, or the aggregate
// risk tolerance vanishes in the regular branch.
struct DegeneracyError : Error {
    using Error::Error;
};

// Exogenous transition probability outside (0,1).
struct ProbabilityBound : Error {
    using Error::Error;
};

// Path-dependent mode requested with n_steps above the configured cap.
struct PathModeCapExceeded : Error {
    using Error::Error;
};

struct InvalidPath : Error {
    using Error::Error;
};

// Clearing experiment mis-specified (fewer than two sizes, too few reps).
struct ExperimentError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace treemfe
