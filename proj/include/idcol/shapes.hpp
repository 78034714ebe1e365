#pragma once

#include <Eigen/Dense>
#include <span>
#include <variant>
#include <vector>

#include "idcol/errors.hpp"

namespace idcol::shapes {

using Eigen::Matrix3d;
using Eigen::Vector3d;

// ---------------------------------------------------------------------------
// Shape specifications
//
// Each spec describes one strictly convex implicit body phi(y) <= 0 in its
// own frame, with the origin strictly interior. Specs are immutable values.
// ---------------------------------------------------------------------------

struct SmoothMaxParams {
    double beta = 20.0; // LogSumExp sharpness, dimensionless, > 0
};

// LogSumExp blend of half-space constraints (a_i^T y - b_i)/L. Normals are
// unit length (normalized on validation), all offsets b_i > 0 so the origin
// is strictly interior.
struct SmoothPolytopeSpec {
    std::vector<Vector3d> normals;
    std::vector<double> offsets;
    double char_length = 1.0; // L, nondimensionalizes the constraints
    SmoothMaxParams smax;
};

// LogSumExp blend of a linearly tapered side surface and two cap planes.
// Axis is y1, axial extent [-ext_below, ext_above].
struct TruncatedConeSpec {
    double r_bottom = 1.0;
    double r_top = 1.0;
    double ext_below = 1.0; // a
    double ext_above = 1.0; // b
    SmoothMaxParams smax;
};

// phi = (sum_i ((y_i/s_i)^2 + eps)^n)^(1/2n) - 1. eps > 0 restores positive
// curvature on the coordinate planes for n > 1.
struct SuperellipsoidSpec {
    Vector3d semi_axes = Vector3d::Ones(); // (a, b, c)
    int exponent = 1;                      // n >= 1
    double reg_eps = 0.0;                  // required > 0 when n > 1
};

// phi = (((y1/h)^2 + eps)^n + ((y2^2+y3^2)/R^2 + eps)^n)^(1/2n) - 1.
struct SuperellipticCylinderSpec {
    double radius = 1.0;      // R
    double half_length = 1.0; // h
    int exponent = 1;         // n >= 1
    double reg_eps = 0.0;
};

using ShapeSpec = std::variant<SmoothPolytopeSpec, TruncatedConeSpec,
                               SuperellipsoidSpec, SuperellipticCylinderSpec>;

// Value, gradient and Hessian of phi at one point, body frame.
struct ShapeEval {
    double value = 0.0;
    Vector3d gradient = Vector3d::Zero();
    Matrix3d hessian = Matrix3d::Zero();
};

// Concentric bounding spheres, body-frame origin center.
struct BoundingRadii {
    double r_in = 0.0;  // sphere(r_in) inside the body
    double r_out = 0.0; // body inside sphere(r_out)
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Checks the spec invariants; for polytopes also normalizes the rows of A
// (and rescales b accordingly) so normals are unit length. Throws
// idcol::Error on violation.
void validate(SmoothPolytopeSpec& spec);
void validate(const TruncatedConeSpec& spec);
void validate(const SuperellipsoidSpec& spec);
void validate(const SuperellipticCylinderSpec& spec);
void validate(ShapeSpec& spec);

// Overflow-safe LogSumExp blend:
//   value = m + (1/beta) log sum exp(beta (phi_i - m)),  m = max_i phi_i
//   grad  = sum w_i grad_i
//   hess  = sum w_i H_i + beta (sum w_i g_i g_i^T - g g^T)
ShapeEval smooth_max(std::span<const ShapeEval> components, SmoothMaxParams params);

// Analytic phi, grad phi, hess phi of the regularized family at y.
// Throws DomainError if the evaluation leaves the representable range.
ShapeEval eval_shape(const SmoothPolytopeSpec& spec, const Vector3d& y);
ShapeEval eval_shape(const TruncatedConeSpec& spec, const Vector3d& y);
ShapeEval eval_shape(const SuperellipsoidSpec& spec, const Vector3d& y);
ShapeEval eval_shape(const SuperellipticCylinderSpec& spec, const Vector3d& y);
ShapeEval eval_shape(const ShapeSpec& spec, const Vector3d& y);

// phi only; cheaper, and defined even where the gradient is singular
// (e.g. the center of an unregularized ellipsoid).
double eval_value(const ShapeSpec& spec, const Vector3d& y);

// Root of phi along t*dir (dir unit, from the interior origin), by bracketing
// and bisection. Used by bounding_radii and the ray-sampling tools.
double ray_root(const ShapeSpec& spec, const Vector3d& dir);

// Samples n_dirs quasi-uniform (Fibonacci sphere) directions, finds the
// surface along each ray, and pads with the safety factor so the containment
// invariants hold despite sampling: r_out = max_d t_d / safety,
// r_in = safety * min_d t_d.
BoundingRadii bounding_radii(const ShapeSpec& spec, int n_dirs = 256,
                             double safety = 0.95);

// The same body uniformly scaled by c about its origin: phi'(y) = phi(y/c).
ShapeSpec scaled(const ShapeSpec& spec, double c);

// Smoother instance for continuation: beta and n halved `level` times
// (floors beta at 5, n at 1); eps unchanged. level 0 returns the spec as is.
ShapeSpec smoothed(const ShapeSpec& spec, int level);

// True if the spec is sharp enough that the solver enables continuation by
// default (n >= 4 or beta >= 30).
bool continuation_suggested(const ShapeSpec& spec);

// Characteristic-length default for polytopes: circumradius of the exact
// polytope (max over vertices is not available from half-spaces, so we use
// the max over face support points b_i, which is exact for boxes and a
// usable scale otherwise). Used by the JSON loader when L is omitted.
double default_char_length(const SmoothPolytopeSpec& spec);

// Convenience constructor: axis-aligned box with half extents h.
SmoothPolytopeSpec make_box(const Vector3d& half_extents, double beta = 20.0,
                            double char_length = 0.0);

} // namespace idcol::shapes
