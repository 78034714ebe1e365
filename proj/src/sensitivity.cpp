#include "idcol/sensitivity.hpp"

#include <cmath>

namespace idcol::sensitivity {

using se3::skew;

namespace {

void require_converged(const Solution& solution, const char* who) {
    if (!solution.converged)
        throw NotConverged(std::string(who) + ": solution did not converge");
}

} // namespace

ResidualConfigPartial residual_config_partial(const Solution& solution,
                                              const ContactPair& pair,
                                              const Pose& pose,
                                              const GeometricJacobian& jac) {
    require_converged(solution, "residual_config_partial");
    const double alpha = solution.alpha;
    const Vector3d y2 =
        pose.R.transpose() * (solution.unknowns.x - pose.r) / alpha;
    const shapes::ShapeEval e2 = shapes::eval_shape(pair.shape2, y2);

    // phi1 carries no q dependence: row 0 stays zero. The remaining rows are
    // the Eq-(19) factors for phi2, with the lambda2 weights of the
    // stationarity rows.
    const se3::ConfigPartials cp = se3::config_partials(
        e2, pose, y2, alpha, GeometricJacobian::identity());

    ResidualConfigPartial out;
    out.G_c.row(1) = cp.phi_q;
    out.G_c.block<3, 6>(2, 0) = solution.unknowns.lambda2 * cp.phi_xq;
    out.G_c.row(5) = solution.unknowns.lambda2 * cp.phi_alphaq;
    out.G_c_J = out.G_c * jac.matrix;
    return out;
}

SensitivityBundle solution_sensitivity(const Solution& solution,
                                       const ContactPair& pair,
                                       const Pose& pose,
                                       const GeometricJacobian& jac) {
    require_converged(solution, "solution_sensitivity");
    if (!(solution.jac_cond < 1e12))
        throw SingularJacobian(
            "solution_sensitivity: J_c condition estimate " +
            std::to_string(solution.jac_cond) +
            " exceeds 1e12; smooth the shapes or reject the gradient");

    const ResidualConfigPartial rcp =
        residual_config_partial(solution, pair, pose, jac);

    // IFT in (x, alpha, lambda) variables: the retained factorization is
    // s-parameterized, so the solved s-row is converted via
    // dalpha/dq = alpha * ds/dq.
    SensitivityBundle bundle;
    bundle.T_c = solution.jac_lu.solve(-rcp.G_c);
    bundle.T_c.row(3) *= solution.alpha;
    bundle.dz_dq = bundle.T_c * jac.matrix;
    return bundle;
}

ContactKinematics contact_kinematics(const Solution& solution, const Pose& pose,
                                     const ContactPair& pair) {
    require_converged(solution, "contact_kinematics");
    const double alpha = solution.alpha;
    const Vector3d& x = solution.unknowns.x;

    ContactKinematics kin;
    kin.p1 = x / alpha;
    kin.p2 = (1.0 - 1.0 / alpha) * pose.r + x / alpha;
    kin.gap = (1.0 - 1.0 / alpha) * pose.r.norm();

    const Vector3d grad = shapes::eval_shape(pair.shape1, kin.p1).gradient;
    const double norm = grad.norm();
    if (norm < 1e-12)
        throw VanishingGradient("contact_kinematics: ||grad phi1|| < 1e-12");
    kin.normal = grad / norm;
    return kin;
}

KinematicsSensitivity kinematics_sensitivity(const SensitivityBundle& bundle,
                                             const ContactKinematics& kin,
                                             const Solution& solution,
                                             const Pose& pose,
                                             const ContactPair& pair,
                                             const GeometricJacobian& jac) {
    require_converged(solution, "kinematics_sensitivity");
    const double alpha = solution.alpha;
    const Vector3d& x = solution.unknowns.x;
    const double inv_a = 1.0 / alpha;
    const double inv_a2 = inv_a * inv_a;

    const MatrixXd dx_dq = bundle.dx_dq();
    const RowVectorXd dalpha_dq = bundle.dalpha_dq();
    const MatrixXd dr_dq = pose.R * jac.matrix.bottomRows(3);

    KinematicsSensitivity out;
    out.dp1_dq = inv_a * dx_dq - (inv_a2 * x) * dalpha_dq;
    out.dp2_dq =
        (inv_a2 * pose.r) * dalpha_dq + (1.0 - inv_a) * dr_dq + out.dp1_dq;
    out.dgap_dq = (pose.r.norm() * inv_a2) * dalpha_dq +
                  (1.0 - inv_a) * (pose.r.normalized().transpose() * dr_dq);

    // The normal is the body-1 surface normal at the witness point p1, so
    // the chain passes through dp1/dq; (I - n n^T) = -skew(n)^2.
    const shapes::ShapeEval e1 = shapes::eval_shape(pair.shape1, kin.p1);
    const Matrix3d n_tilde = skew(kin.normal);
    out.dnormal_dq =
        -(n_tilde * n_tilde) * e1.hessian * out.dp1_dq / e1.gradient.norm();
    return out;
}

ContactWrench contact_wrench(const ContactKinematics& kin,
                             const Solution& solution, const Pose& pose,
                             double stiffness, double exponent) {
    require_converged(solution, "contact_wrench");
    const double delta = std::max(-kin.gap, 0.0);

    ContactWrench w;
    w.fn = delta > 0.0 ? stiffness * std::pow(delta, exponent) : 0.0;
    if (w.fn > 0.0) {
        Vector6d basis;
        basis.head<3>() = skew(solution.unknowns.x) * kin.normal;
        basis.tail<3>() = kin.normal;
        w.F_c1 = -w.fn * basis;
        w.F_c2 = -(se3::coadjoint(pose) * w.F_c1);
    }
    return w;
}

WrenchSensitivity wrench_sensitivity(const ContactWrench& wrench,
                                     const KinematicsSensitivity& kin_sens,
                                     const ContactKinematics& kin,
                                     const SensitivityBundle& bundle,
                                     const Solution& solution, const Pose& pose,
                                     const ContactPair& pair,
                                     const GeometricJacobian& jac,
                                     double stiffness, double exponent) {
    require_converged(solution, "wrench_sensitivity");
    (void)pair;
    const Eigen::Index n = jac.dofs();
    const double delta = std::max(-kin.gap, 0.0);

    WrenchSensitivity out;
    if (delta <= 0.0) {
        out.dF1_dq = MatrixXd::Zero(6, n);
        out.dF2_dq = MatrixXd::Zero(6, n);
        out.boundary = exponent > 1.0 ? WrenchBoundary::Contactless
                                      : WrenchBoundary::NonDifferentiable;
        return out;
    }

    const RowVectorXd dfn_dq = -stiffness * exponent *
                               std::pow(delta, exponent - 1.0) *
                               kin_sens.dgap_dq;
    const Vector3d fvec = -wrench.fn * kin.normal;
    const MatrixXd dfvec_dq =
        -(kin.normal * dfn_dq) - wrench.fn * kin_sens.dnormal_dq;

    out.dF1_dq.resize(6, n);
    out.dF1_dq.topRows(3) = -skew(fvec) * bundle.dx_dq() +
                            skew(solution.unknowns.x) * dfvec_dq;
    out.dF1_dq.bottomRows(3) = dfvec_dq;
    out.dF2_dq = -(se3::coadjoint(pose) * out.dF1_dq) -
                 se3::coadjoint_bar(wrench.F_c2) * jac.matrix;
    return out;
}

} // namespace idcol::sensitivity
