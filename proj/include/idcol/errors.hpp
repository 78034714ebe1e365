#pragma once

#include <stdexcept>
#include <string>

namespace idcol {

// Base class for all idcol errors. Solver non-convergence is not an error
// (solve() returns a Solution with converged=false); exceptions are reserved
// for inputs on which the requested quantity is not defined.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape evaluation left the representable range (overflow/underflow).
struct DomainError : Error {
    using Error::Error;
};

// bounding_radii requires phi(0) < 0.
struct NotContainingOrigin : Error {
    using Error::Error;
};

// No sign change found along a ray within the search budget.
struct BracketFailure : Error {
    using Error::Error;
};

// The contact problem is undefined for coincident body-frame origins.
struct CoincidentOrigins : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

// Sensitivities and kinematics require a converged Solution.
struct NotConverged : Error {
    using Error::Error;
};

// 1/rcond(J_c) exceeds the degeneracy threshold; the configuration is too
// degenerate for IFT. Smooth the shapes (lower beta/n) or reject the gradient.
struct SingularJacobian : Error {
    using Error::Error;
};

struct VanishingGradient : Error {
    using Error::Error;
};

// JSON / scene file problems; message carries line/column where available.
struct ParseError : Error {
    using Error::Error;
};

} // namespace idcol
