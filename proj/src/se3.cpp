#include "idcol/se3.hpp"

#include <cmath>

namespace idcol::se3 {

void Pose::require_orthonormal(double tol) const {
    const double defect = (R.transpose() * R - Matrix3d::Identity()).norm();
    if (defect > tol || std::abs(R.determinant() - 1.0) > tol)
        throw Error("Pose: rotation is not orthonormal (defect " +
                    std::to_string(defect) + ")");
}

Matrix3d exp_so3(const Vector3d& w) {
    const double theta = w.norm();
    const Matrix3d W = skew(w);
    if (theta < 1e-8) {
        // second-order series, accurate to ~1e-16 here
        return Matrix3d::Identity() + W + 0.5 * (W * W);
    }
    const double s = std::sin(theta) / theta;
    const double c = (1.0 - std::cos(theta)) / (theta * theta);
    return Matrix3d::Identity() + s * W + c * (W * W);
}

Pose exp_se3(const Vector6d& twist) {
    const Vector3d w = twist.head<3>();
    const Vector3d v = twist.tail<3>();
    const double theta = w.norm();
    const Matrix3d W = skew(w);
    Matrix3d V;
    if (theta < 1e-8) {
        V = Matrix3d::Identity() + 0.5 * W + (1.0 / 6.0) * (W * W);
    } else {
        const double t2 = theta * theta;
        V = Matrix3d::Identity() + ((1.0 - std::cos(theta)) / t2) * W +
            ((theta - std::sin(theta)) / (t2 * theta)) * (W * W);
    }
    return Pose{exp_so3(w), V * v};
}

Matrix6d adjoint(const Pose& g) {
    Matrix6d ad = Matrix6d::Zero();
    ad.topLeftCorner<3, 3>() = g.R;
    ad.bottomRightCorner<3, 3>() = g.R;
    ad.bottomLeftCorner<3, 3>() = skew(g.r) * g.R;
    return ad;
}

Matrix6d coadjoint(const Pose& g) {
    return adjoint(g).transpose();
}

Matrix6d coadjoint_bar(const Vector6d& v) {
    Matrix6d out = Matrix6d::Zero();
    const Matrix3d w_tilde = skew(v.head<3>());
    const Matrix3d v_tilde = skew(v.tail<3>());
    out.topLeftCorner<3, 3>() = -w_tilde;
    out.topRightCorner<3, 3>() = -v_tilde;
    out.bottomLeftCorner<3, 3>() = -v_tilde;
    return out;
}

SurfacePartials surface_partials(const shapes::ShapeEval& eval,
                                 const Matrix3d& rotation, const Vector3d& y,
                                 double alpha) {
    if (!(alpha > 0.0)) throw Error("surface_partials: alpha must be > 0");
    const double inv_a = 1.0 / alpha;
    const double inv_a2 = inv_a * inv_a;
    const Vector3d& g = eval.gradient;
    const Matrix3d& H = eval.hessian;

    SurfacePartials p;
    p.phi = eval.value;
    p.phi_x = inv_a * (rotation * g);
    p.phi_alpha = -inv_a * y.dot(g);
    p.phi_xx = inv_a2 * (rotation * H * rotation.transpose());
    p.phi_xalpha = -inv_a2 * (rotation * (g + H * y));
    p.phi_alphaalpha = inv_a2 * (2.0 * y.dot(g) + y.dot(H * y));
    return p;
}

ConfigPartials config_partials(const shapes::ShapeEval& eval, const Pose& pose,
                               const Vector3d& y, double alpha,
                               const GeometricJacobian& jac) {
    if (!(alpha > 0.0)) throw Error("config_partials: alpha must be > 0");
    if (jac.matrix.rows() != 6)
        throw DimensionMismatch("config_partials: Jacobian must have 6 rows");
    const double inv_a = 1.0 / alpha;
    const Vector3d& g = eval.gradient;
    const Matrix3d& H = eval.hessian;
    const Matrix3d y_tilde = skew(y);

    // y_q = [skew(y), -(1/a) I] J
    Matrix36d y_factor;
    y_factor.leftCols<3>() = y_tilde;
    y_factor.rightCols<3>() = -inv_a * Matrix3d::Identity();
    const MatrixXd y_q = y_factor * jac.matrix;

    ConfigPartials out;
    out.phi_q = g.transpose() * y_q;

    Matrix36d xq_factor;
    xq_factor.leftCols<3>() = H * y_tilde - skew(g);
    xq_factor.rightCols<3>() = -inv_a * H;
    out.phi_xq = inv_a * (pose.R * (xq_factor * jac.matrix));

    out.phi_alphaq = -inv_a * ((g + H * y).transpose() * y_q);
    return out;
}

} // namespace idcol::se3
