#pragma once

#include "idcol/detector.hpp"

namespace idcol::sensitivity {

using detector::ContactPair;
using detector::Solution;
using se3::GeometricJacobian;
using se3::Matrix6d;
using se3::Pose;
using se3::Vector6d;
using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::Vector3d;

// IFT sensitivity of the six unknowns: T_c solves J_c T_c = -G_c, and
// dz_dq = T_c J with rows (x, alpha, lambda1, lambda2). The IFT is applied
// in (x, alpha, lambda) variables; the solver's s-parameterization is
// converted at the boundary.
struct SensitivityBundle {
    Matrix6d T_c = Matrix6d::Zero();
    MatrixXd dz_dq; // rows: x (0..2), alpha (3), lambda1, lambda2

    MatrixXd dx_dq() const { return dz_dq.topRows(3); }
    RowVectorXd dalpha_dq() const { return dz_dq.row(3); }
};

// Witness points, gap and unit normal, all in the body-1 frame:
//   p1 = x*/a*, p2 = (1 - 1/a*) r + x*/a*, d_D = (1 - 1/a*) ||r||,
//   n = grad phi1(x*/a*) / ||grad phi1||.
struct ContactKinematics {
    Vector3d p1 = Vector3d::Zero();
    Vector3d p2 = Vector3d::Zero();
    double gap = 0.0;
    Vector3d normal = Vector3d::Zero();
};

struct KinematicsSensitivity {
    RowVectorXd dgap_dq;
    MatrixXd dnormal_dq; // 3 x n, columnwise orthogonal to the normal
    MatrixXd dp1_dq, dp2_dq;
};

// Penalty (Hertz) contact wrench pair, moment-then-force ordering:
//   delta = max(-d_D, 0), fn = k delta^p,
//   F_c1 = -[skew(x*) n; n] fn,  F_c2 = -coadjoint(g) F_c1.
struct ContactWrench {
    Vector6d F_c1 = Vector6d::Zero();
    Vector6d F_c2 = Vector6d::Zero();
    double fn = 0.0;
};

enum class WrenchBoundary {
    None,              // delta > 0, sensitivities well defined
    Contactless,       // delta = 0 with p > 1: sensitivities are exact zeros
    NonDifferentiable, // delta = 0 with p <= 1: force kink, zeros returned
};

struct WrenchSensitivity {
    MatrixXd dF1_dq, dF2_dq; // 6 x n
    WrenchBoundary boundary = WrenchBoundary::None;
};

// G_c (6x6 pose-only factor, rows [0; a^T; l2 B; l2 c^T]) and its product
// with J. phi1 carries no q dependence, so the first row is zero.
// Throws NotConverged on unconverged solutions.
struct ResidualConfigPartial {
    Matrix6d G_c = Matrix6d::Zero();
    MatrixXd G_c_J;
};

ResidualConfigPartial residual_config_partial(const Solution& solution,
                                              const ContactPair& pair,
                                              const Pose& pose,
                                              const GeometricJacobian& jac);

// Solves J_c T_c = -G_c reusing the factorization retained in the Solution.
// Throws SingularJacobian when the retained J_c condition estimate exceeds
// 1e12.
SensitivityBundle solution_sensitivity(const Solution& solution,
                                       const ContactPair& pair,
                                       const Pose& pose,
                                       const GeometricJacobian& jac);

ContactKinematics contact_kinematics(const Solution& solution, const Pose& pose,
                                     const ContactPair& pair);

// Chain-rule derivatives of gap, normal and witness points. grad/hess of
// phi1 are evaluated at p1 = x*/a* consistently with the normal definition,
// so the chain passes through dp1_dq.
KinematicsSensitivity kinematics_sensitivity(const SensitivityBundle& bundle,
                                             const ContactKinematics& kin,
                                             const Solution& solution,
                                             const Pose& pose,
                                             const ContactPair& pair,
                                             const GeometricJacobian& jac);

ContactWrench contact_wrench(const ContactKinematics& kin,
                             const Solution& solution, const Pose& pose,
                             double stiffness, double exponent);

WrenchSensitivity wrench_sensitivity(const ContactWrench& wrench,
                                     const KinematicsSensitivity& kin_sens,
                                     const ContactKinematics& kin,
                                     const SensitivityBundle& bundle,
                                     const Solution& solution, const Pose& pose,
                                     const ContactPair& pair,
                                     const GeometricJacobian& jac,
                                     double stiffness, double exponent);

} // namespace idcol::sensitivity
