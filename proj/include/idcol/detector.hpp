#pragma once

#include <memory>
#include <optional>
#include <utility>

#include "idcol/se3.hpp"
#include "idcol/shapes.hpp"

namespace idcol::detector {

using se3::Matrix6d;
using se3::Pose;
using se3::Vector6d;
using shapes::BoundingRadii;
using shapes::ShapeSpec;

// A shape pair prepared for contact queries. Bounding radii are precomputed
// once per body; the pair also caches the geometrically scaled instance used
// inside solve() (all lengths divided by max(r1_out, r2_out)).
struct ContactPair {
    ShapeSpec shape1, shape2;
    BoundingRadii radii1, radii2;

    ContactPair(ShapeSpec s1, ShapeSpec s2, BoundingRadii r1, BoundingRadii r2);

    double geometric_scale() const { return scale_; }
    const ContactPair& scaled_pair() const;

  private:
    double scale_ = 1.0;
    // Scaled twin, built lazily-on-construction; null for the twin itself.
    std::shared_ptr<const ContactPair> scaled_;
    ContactPair() = default;
};

// Radii computed with bounding_radii defaults unless overridden.
ContactPair make_contact_pair(ShapeSpec s1, ShapeSpec s2, int n_dirs = 256,
                              double safety = 0.95);

// The six unknowns z = (x, s, lambda1, lambda2) with alpha = e^s.
struct Unknowns {
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    double s = 0.0;
    double lambda1 = 0.0, lambda2 = 0.0;

    double alpha() const { return std::exp(s); }
    Vector6d as_vector() const;
    static Unknowns from_vector(const Vector6d& v);
};

struct ArmijoParams {
    double c1 = 1e-4;
    double shrink = 0.5;
    int max_backtracks = 20;
};

enum class ContinuationMode { Auto, Off, On };

struct SolverConfig {
    double tol = 1e-10;       // on ||f_c||, geometrically scaled units
    int k_max = 50;           // Newton iterations per attempt
    int n_attempts = 3;       // restart budget N_a
    double f_s = 2.0;         // surrogate separating factor, >= 1
    ArmijoParams armijo;
    double lm_damping = 1e-6; // initial Levenberg damping, x10 on rejection
    double max_ds = 1.0;      // step limit on |delta s|
    double max_dx_factor = 0.5; // ||delta x|| <= factor * (r1_out + r2_out)
    ContinuationMode continuation = ContinuationMode::Auto;
    bool use_surrogate = true; // diagnostic knob; direct solves for testing
};

struct Solution {
    Unknowns unknowns;
    double alpha = 0.0;
    bool converged = false;
    int iterations = 0;
    double residual_norm = std::numeric_limits<double>::infinity();

    // J_c at the solution in original units, s-parameterized, retained for
    // IFT reuse together with its LU factorization and condition estimate.
    Matrix6d jac = Matrix6d::Zero();
    Eigen::PartialPivLU<Matrix6d> jac_lu;
    double jac_cond = std::numeric_limits<double>::infinity();
};

// Surrogate problem: relative translation rescaled so the outer bounding
// spheres are separated by the factor f_S; solution maps back by
// recovery_scale = alpha_min / f_S.
struct SurrogateProblem {
    Eigen::Vector3d scaled_translation = Eigen::Vector3d::Zero(); // r_S
    double recovery_scale = 1.0;                                  // alpha_min/f_S
    double alpha_min_s = 1.0, alpha_max_s = 1.0;
};

// KKT residual [phi1; phi2; l1 phi1_x + l2 phi2_x; 1 + l1 phi1_a + l2 phi2_a]
// with phi1 evaluated at x/alpha and phi2 at R^T (x - r)/alpha.
// Throws CoincidentOrigins when ||r|| < 1e-12 max(r_out).
Vector6d residual(const Unknowns& z, const ContactPair& pair, const Pose& pose);

// Jacobian of the residual in z = (x, s, l1, l2); the s-column carries the
// chain factor alpha relative to the alpha-parameterized Jacobian.
Matrix6d residual_jacobian(const Unknowns& z, const ContactPair& pair,
                           const Pose& pose);

// (alpha_min, alpha_max) = ||r|| / (r1_out + r2_out), ||r|| / (r1_in + r2_in).
std::pair<double, double> scaling_bounds(const ContactPair& pair,
                                         const Eigen::Vector3d& r);

SurrogateProblem build_surrogate(const ContactPair& pair, const Pose& pose,
                                 double f_s);

// Geometric cold start for the surrogate problem:
//   alpha_0 = sqrt(alpha_min_s alpha_max_s), x_0 = alpha_0 r1_out r_hat,
//   lambda_i from the stationarity conditions at (x_0, alpha_0).
// (x_0 sits on body 1's outer sphere after the initial scaling; for
// sphere-sphere pairs with exact radii the cold start is the exact solution.)
Unknowns cold_start(const ContactPair& pair, const SurrogateProblem& surrogate,
                    const Eigen::Matrix3d& rotation);

// Full pipeline: geometric scaling -> surrogate -> safeguarded Newton with
// restarts -> continuation fallback -> recovery. Never throws on
// non-convergence; returns the best iterate with diagnostics.
Solution solve(const ContactPair& pair, const Pose& pose,
               const SolverConfig& config = {},
               const std::optional<Unknowns>& warm = std::nullopt);

} // namespace idcol::detector
