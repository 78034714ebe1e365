#pragma once

#include <Eigen/Dense>

#include "idcol/errors.hpp"
#include "idcol/shapes.hpp"

namespace idcol::se3 {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix36d = Eigen::Matrix<double, 3, 6>;

// Twists and wrenches are 6-vectors with the angular block first:
// twist = [w; v], wrench = [moment; force].

// Rigid transform g = (R, r). Rotations are stored as orthonormal matrices;
// orthonormality is checked on ingestion, never silently re-normalized.
struct Pose {
    Matrix3d R = Matrix3d::Identity();
    Vector3d r = Vector3d::Zero();

    Pose inverse() const { return {R.transpose(), -(R.transpose() * r)}; }
    Pose operator*(const Pose& o) const { return {R * o.R, R * o.r + r}; }

    // ||R^T R - I|| and det check against tol (default 1e-9); throws.
    void require_orthonormal(double tol = 1e-9) const;
};

// Maps configuration rates to the relative body twist, (g^-1 dg)^vee = J dq.
struct GeometricJacobian {
    Eigen::Matrix<double, 6, Eigen::Dynamic> matrix;

    GeometricJacobian() = default;
    explicit GeometricJacobian(const MatrixXd& m) {
        if (m.rows() != 6)
            throw DimensionMismatch("GeometricJacobian must have 6 rows");
        matrix = m;
    }
    Eigen::Index dofs() const { return matrix.cols(); }
    static GeometricJacobian identity() {
        return GeometricJacobian(MatrixXd::Identity(6, 6));
    }
};

inline Matrix3d skew(const Vector3d& v) {
    Matrix3d m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

// Rodrigues formula.
Matrix3d exp_so3(const Vector3d& w);

// exp of the twist [w; v]: rotation exp_so3(w), translation V(w) v with the
// SO(3) left Jacobian V.
Pose exp_se3(const Vector6d& twist);

// Ad_g = [R 0; skew(r) R], maps body twists into the parent frame.
Matrix6d adjoint(const Pose& g);

// Wrench transport Ad_g^T: takes a wrench about the parent-frame origin into
// the frame posed at g. For the relative pose g of body 2 in body 1's frame,
// coadjoint(g) maps body-1-frame wrenches to the body-2 frame.
// Satisfies coadjoint(g1*g2) = coadjoint(g2)*coadjoint(g1).
Matrix6d coadjoint(const Pose& g);

// For V = [w; v]: -[skew(w) skew(v); skew(v) 0]. Appears in the derivative
// of transported wrenches: d(Ad^T F)/dq picks up coadjoint_bar(F) J.
Matrix6d coadjoint_bar(const Vector6d& v);

// ---------------------------------------------------------------------------
// Transformed-surface calculus: partials of phi(R^T (x - r)/alpha).
// ---------------------------------------------------------------------------

// All first and second order partials in (x, alpha), evaluated from the
// local ShapeEval at y = R^T (x - r)/alpha:
//   phi_x  = (1/a) R grad
//   phi_a  = -(1/a) y^T grad
//   phi_xx = (1/a^2) R hess R^T
//   phi_xa = -(1/a^2) R (grad + hess y)
//   phi_aa = (1/a^2) (2 y^T grad + y^T hess y)
struct SurfacePartials {
    double phi = 0.0;
    Vector3d phi_x = Vector3d::Zero();
    double phi_alpha = 0.0;
    Matrix3d phi_xx = Matrix3d::Zero();
    Vector3d phi_xalpha = Vector3d::Zero();
    double phi_alphaalpha = 0.0;
};

SurfacePartials surface_partials(const shapes::ShapeEval& eval,
                                 const Matrix3d& rotation, const Vector3d& y,
                                 double alpha);

// Partials with respect to the configuration q through the pose, with
// y_q = [skew(y), -(1/a) I] J:
//   phi_q  = grad^T [skew(y), -(1/a) I] J
//   phi_xq = (1/a) R [hess skew(y) - skew(grad), -(1/a) hess] J
//   phi_aq = -(1/a) (grad + hess y)^T [skew(y), -(1/a) I] J
struct ConfigPartials {
    Eigen::RowVectorXd phi_q;
    MatrixXd phi_xq;
    Eigen::RowVectorXd phi_alphaq;
};

ConfigPartials config_partials(const shapes::ShapeEval& eval, const Pose& pose,
                               const Vector3d& y, double alpha,
                               const GeometricJacobian& jac);

} // namespace idcol::se3
