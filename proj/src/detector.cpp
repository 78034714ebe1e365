#include "idcol/detector.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace idcol::detector {

using Eigen::Matrix3d;
using Eigen::Vector3d;
using se3::SurfacePartials;

// ---------------------------------------------------------------------------
// ContactPair
// ---------------------------------------------------------------------------

ContactPair::ContactPair(ShapeSpec s1, ShapeSpec s2, BoundingRadii r1,
                         BoundingRadii r2)
    : shape1(std::move(s1)), shape2(std::move(s2)), radii1(r1), radii2(r2) {
    shapes::validate(shape1);
    shapes::validate(shape2);
    if (!(r1.r_in > 0.0 && r1.r_in <= r1.r_out) ||
        !(r2.r_in > 0.0 && r2.r_in <= r2.r_out))
        throw Error("ContactPair: invalid bounding radii");

    scale_ = std::max(radii1.r_out, radii2.r_out);
    auto twin = std::shared_ptr<ContactPair>(new ContactPair());
    const double inv = 1.0 / scale_;
    twin->shape1 = shapes::scaled(shape1, inv);
    twin->shape2 = shapes::scaled(shape2, inv);
    twin->radii1 = {radii1.r_in * inv, radii1.r_out * inv};
    twin->radii2 = {radii2.r_in * inv, radii2.r_out * inv};
    twin->scale_ = 1.0;
    scaled_ = std::move(twin);
}

const ContactPair& ContactPair::scaled_pair() const {
    return scaled_ ? *scaled_ : *this;
}

ContactPair make_contact_pair(ShapeSpec s1, ShapeSpec s2, int n_dirs,
                              double safety) {
    shapes::validate(s1);
    shapes::validate(s2);
    const BoundingRadii r1 = shapes::bounding_radii(s1, n_dirs, safety);
    const BoundingRadii r2 = shapes::bounding_radii(s2, n_dirs, safety);
    return ContactPair(std::move(s1), std::move(s2), r1, r2);
}

Vector6d Unknowns::as_vector() const {
    Vector6d v;
    v << x, s, lambda1, lambda2;
    return v;
}

Unknowns Unknowns::from_vector(const Vector6d& v) {
    return Unknowns{v.head<3>(), v[3], v[4], v[5]};
}

// ---------------------------------------------------------------------------
// Residual and Jacobian
// ---------------------------------------------------------------------------

namespace {

// Shape pair view that lets the solver substitute smoothed or scaled specs
// without rebuilding a ContactPair.
struct PairGeom {
    const ShapeSpec* s1;
    const ShapeSpec* s2;
    BoundingRadii r1, r2;
};

PairGeom geom_of(const ContactPair& pair) {
    return {&pair.shape1, &pair.shape2, pair.radii1, pair.radii2};
}

void check_origins(const PairGeom& pg, const Vector3d& r) {
    if (r.norm() < 1e-12 * std::max(pg.r1.r_out, pg.r2.r_out))
        throw CoincidentOrigins("contact query with coincident body origins");
}

struct PairPartials {
    SurfacePartials p1, p2;
};

PairPartials eval_partials(const Unknowns& z, const PairGeom& pg,
                           const Pose& pose) {
    const double alpha = z.alpha();
    const Vector3d y1 = z.x / alpha;
    const Vector3d y2 = pose.R.transpose() * (z.x - pose.r) / alpha;
    PairPartials pp;
    pp.p1 = se3::surface_partials(shapes::eval_shape(*pg.s1, y1),
                                  Matrix3d::Identity(), y1, alpha);
    pp.p2 = se3::surface_partials(shapes::eval_shape(*pg.s2, y2), pose.R, y2,
                                  alpha);
    return pp;
}

Vector6d assemble_residual(const Unknowns& z, const PairPartials& pp) {
    Vector6d f;
    f[0] = pp.p1.phi;
    f[1] = pp.p2.phi;
    f.segment<3>(2) = z.lambda1 * pp.p1.phi_x + z.lambda2 * pp.p2.phi_x;
    f[5] = 1.0 + z.lambda1 * pp.p1.phi_alpha + z.lambda2 * pp.p2.phi_alpha;
    return f;
}

// Jacobian in z = (x, s, l1, l2); the s-column is the alpha-column of
// Eq-structure [phi_zp rows; weighted Hessian block with gradient columns]
// scaled by alpha ((.)_s = (.)_alpha * alpha).
Matrix6d assemble_jacobian(const Unknowns& z, const PairPartials& pp) {
    const double alpha = z.alpha();
    const SurfacePartials& p1 = pp.p1;
    const SurfacePartials& p2 = pp.p2;

    Matrix6d J = Matrix6d::Zero();
    J.block<1, 3>(0, 0) = p1.phi_x.transpose();
    J(0, 3) = p1.phi_alpha * alpha;
    J.block<1, 3>(1, 0) = p2.phi_x.transpose();
    J(1, 3) = p2.phi_alpha * alpha;

    J.block<3, 3>(2, 0) = z.lambda1 * p1.phi_xx + z.lambda2 * p2.phi_xx;
    J.block<3, 1>(2, 3) =
        (z.lambda1 * p1.phi_xalpha + z.lambda2 * p2.phi_xalpha) * alpha;
    J.block<3, 1>(2, 4) = p1.phi_x;
    J.block<3, 1>(2, 5) = p2.phi_x;

    J.block<1, 3>(5, 0) =
        (z.lambda1 * p1.phi_xalpha + z.lambda2 * p2.phi_xalpha).transpose();
    J(5, 3) =
        (z.lambda1 * p1.phi_alphaalpha + z.lambda2 * p2.phi_alphaalpha) * alpha;
    J(5, 4) = p1.phi_alpha;
    J(5, 5) = p2.phi_alpha;
    return J;
}

} // namespace

Vector6d residual(const Unknowns& z, const ContactPair& pair, const Pose& pose) {
    const PairGeom pg = geom_of(pair);
    check_origins(pg, pose.r);
    return assemble_residual(z, eval_partials(z, pg, pose));
}

Matrix6d residual_jacobian(const Unknowns& z, const ContactPair& pair,
                           const Pose& pose) {
    const PairGeom pg = geom_of(pair);
    check_origins(pg, pose.r);
    return assemble_jacobian(z, eval_partials(z, pg, pose));
}

std::pair<double, double> scaling_bounds(const ContactPair& pair,
                                         const Vector3d& r) {
    const PairGeom pg = geom_of(pair);
    check_origins(pg, r);
    const double d = r.norm();
    return {d / (pg.r1.r_out + pg.r2.r_out), d / (pg.r1.r_in + pg.r2.r_in)};
}

SurrogateProblem build_surrogate(const ContactPair& pair, const Pose& pose,
                                 double f_s) {
    if (!(f_s >= 1.0)) throw Error("build_surrogate: f_S must be >= 1");
    const PairGeom pg = geom_of(pair);
    check_origins(pg, pose.r);
    const double out_sum = pg.r1.r_out + pg.r2.r_out;
    const double in_sum = pg.r1.r_in + pg.r2.r_in;
    const double alpha_min = pose.r.norm() / out_sum;

    SurrogateProblem s;
    s.scaled_translation = f_s * out_sum * pose.r.normalized();
    s.recovery_scale = alpha_min / f_s;
    s.alpha_min_s = f_s;
    s.alpha_max_s = f_s * out_sum / in_sum;
    return s;
}

namespace {

// Cold start at a given log-scaling s0, with x along `dir` (normally the
// unit relative translation) on body 1's outer sphere after the initial
// scaling; multipliers come from substituting into the stationarity
// conditions.
Unknowns cold_start_at(const PairGeom& pg, const SurrogateProblem& surrogate,
                       const Matrix3d& rotation, double s0,
                       const Vector3d& dir) {
    const Vector3d r_s = surrogate.scaled_translation;
    const double alpha0 = std::exp(s0);

    Unknowns z;
    z.x = alpha0 * pg.r1.r_out * dir;
    z.s = s0;

    const Vector3d y1 = z.x / alpha0;
    const Vector3d y2 = rotation.transpose() * (z.x - r_s) / alpha0;
    const Vector3d phi1_x =
        shapes::eval_shape(*pg.s1, y1).gradient / alpha0;
    const Vector3d phi2_x =
        rotation * shapes::eval_shape(*pg.s2, y2).gradient / alpha0;

    const double den1 = r_s.dot(phi1_x);
    const double den2 = r_s.dot(phi2_x);
    z.lambda1 = std::abs(den1) < 1e-12 ? 1.0 : alpha0 / den1;
    z.lambda2 = std::abs(den2) < 1e-12 ? 1.0 : -alpha0 / den2;
    return z;
}

} // namespace

Unknowns cold_start(const ContactPair& pair, const SurrogateProblem& surrogate,
                    const Matrix3d& rotation) {
    const double s0 =
        0.5 * std::log(surrogate.alpha_max_s * surrogate.alpha_min_s);
    return cold_start_at(geom_of(pair), surrogate, rotation, s0,
                         surrogate.scaled_translation.normalized());
}

// ---------------------------------------------------------------------------
// Safeguarded Newton solver
// ---------------------------------------------------------------------------

namespace {

struct BestIterate {
    Unknowns z;
    double fnorm = std::numeric_limits<double>::infinity();
};

enum class NewtonOutcome { Converged, MaxIters, Stalled, NonFinite };

struct NewtonResult {
    NewtonOutcome outcome = NewtonOutcome::MaxIters;
    Unknowns z;
    double fnorm = std::numeric_limits<double>::infinity();
};

// One Newton run on the (surrogate) problem given by pg/pose. `best` is only
// updated when `track_best` (i.e. the shapes are the target instance).
NewtonResult run_newton(Unknowns z, const PairGeom& pg, const Pose& pose,
                        double s_lo, double s_hi, const SolverConfig& cfg,
                        bool track_best, BestIterate& best, int& total_iters) {
    const double max_dx = cfg.max_dx_factor * (pg.r1.r_out + pg.r2.r_out);
    const double mu_max = 1e10;

    z.s = std::clamp(z.s, s_lo, s_hi);

    auto try_residual = [&](const Unknowns& zt, Vector6d& f) {
        PairPartials pp = eval_partials(zt, pg, pose);
        f = assemble_residual(zt, pp);
        return f.allFinite();
    };

    NewtonResult res;
    for (int k = 0; k < cfg.k_max; ++k) {
        PairPartials pp = eval_partials(z, pg, pose);
        const Vector6d f = assemble_residual(z, pp);
        if (!f.allFinite()) return {NewtonOutcome::NonFinite, z, res.fnorm};

        const double fnorm = f.norm();
        if (fnorm < res.fnorm) {
            res.fnorm = fnorm;
            res.z = z;
        }
        if (track_best && fnorm < best.fnorm) {
            best.fnorm = fnorm;
            best.z = z;
        }
        if (fnorm < cfg.tol) {
            res.outcome = NewtonOutcome::Converged;
            res.z = z;
            res.fnorm = fnorm;
            return res;
        }

        const Matrix6d J = assemble_jacobian(z, pp);
        if (!J.allFinite()) return {NewtonOutcome::NonFinite, z, res.fnorm};
        ++total_iters;

        // Newton step; LM fallback on ill-conditioning (cheap U-diagonal
        // rcond proxy) or on line-search rejection.
        Eigen::PartialPivLU<Matrix6d> lu(J);
        Vector6d step = lu.solve(-f);
        const auto udiag = lu.matrixLU().diagonal().cwiseAbs();
        const double cond_proxy =
            udiag.minCoeff() > 0.0
                ? udiag.maxCoeff() / udiag.minCoeff()
                : std::numeric_limits<double>::infinity();
        bool lm_mode = !step.allFinite() || cond_proxy > 1e12;

        const Vector6d grad_m = J.transpose() * f; // gradient of 0.5||f||^2
        double mu = cfg.lm_damping;
        bool accepted = false;
        while (!accepted) {
            if (lm_mode) {
                Matrix6d A = J.transpose() * J;
                Vector6d d = A.diagonal();
                const double floor = 1e-12 * d.maxCoeff() + 1e-300;
                d = d.cwiseMax(floor);
                A.diagonal() += mu * d;
                step = A.ldlt().solve(-grad_m);
            }
            if (step.allFinite()) {
                // trust-region style step limits, direction preserving
                double t = 1.0;
                const double ds = std::abs(step[3]);
                if (ds > cfg.max_ds) t = std::min(t, cfg.max_ds / ds);
                const double dx = step.head<3>().norm();
                if (dx > max_dx) t = std::min(t, max_dx / dx);
                const Vector6d limited = t * step;

                const double slope = grad_m.dot(limited);
                if (slope < 0.0) {
                    double eta = 1.0;
                    const double m0 = 0.5 * fnorm * fnorm;
                    for (int bt = 0; bt <= cfg.armijo.max_backtracks; ++bt) {
                        const Unknowns zt =
                            Unknowns::from_vector(z.as_vector() + eta * limited);
                        Vector6d ft;
                        if (try_residual(zt, ft) &&
                            0.5 * ft.squaredNorm() <=
                                m0 + cfg.armijo.c1 * eta * slope) {
                            z = zt;
                            z.s = std::clamp(z.s, s_lo, s_hi);
                            accepted = true;
                            break;
                        }
                        eta *= cfg.armijo.shrink;
                    }
                }
            }
            if (!accepted) {
                // damped LM fallback update: enable/strengthen damping
                if (!lm_mode) {
                    lm_mode = true;
                } else {
                    mu *= 10.0;
                    if (mu > mu_max)
                        return {NewtonOutcome::Stalled, res.z, res.fnorm};
                }
            }
        }
    }
    return res; // MaxIters, best-of-run in res
}

// Cold start plus the restart perturbation of attempt j:
// s0 <- s0 + j * 0.25 * (log a_max_s - log a_min_s), sign alternating.
Unknowns restart_start(const PairGeom& pg, const SurrogateProblem& surr,
                       const Matrix3d& rotation, int j) {
    double s0 = 0.5 * std::log(surr.alpha_max_s * surr.alpha_min_s);
    if (j > 0) {
        const double range =
            std::log(surr.alpha_max_s) - std::log(surr.alpha_min_s);
        s0 += (j % 2 == 1 ? 1.0 : -1.0) * j * 0.25 * range;
    }
    return cold_start_at(pg, surr, rotation, s0,
                         surr.scaled_translation.normalized());
}

struct StageResult {
    bool converged = false;
    Unknowns z;
};

// Runs up to n_attempts on one shape instance: the optional initial guess
// first, then cold starts with perturbed s0.
StageResult stage_solve(const PairGeom& pg, const Pose& pose,
                        const SurrogateProblem& surr, const SolverConfig& cfg,
                        const std::optional<Unknowns>& init, bool is_target,
                        int max_attempts, BestIterate& best, int& total_iters) {
    const double margin_hi = is_target ? 0.1 : 1.6;
    const double s_lo = std::log(surr.alpha_min_s) - 0.1;
    const double s_hi = std::log(surr.alpha_max_s) + margin_hi;

    for (int a = 0; a < max_attempts; ++a) {
        Unknowns z0;
        if (a == 0 && init) {
            z0 = *init;
            if (!z0.as_vector().allFinite()) continue;
        } else {
            const int j = init ? a - 1 : a;
            z0 = restart_start(pg, surr, pose.R, j);
        }
        const NewtonResult r =
            run_newton(z0, pg, pose, s_lo, s_hi, cfg, is_target, best,
                       total_iters);
        if (r.outcome == NewtonOutcome::Converged) return {true, r.z};
    }
    return {};
}

bool continuation_enabled(const SolverConfig& cfg, const ContactPair& pair) {
    // Continuation only ever runs after the direct attempts have failed, so
    // in Auto mode the fallback is available for every pair: a failed solve
    // is itself the evidence that the instance is sharp enough to need it.
    (void)pair;
    return cfg.continuation != ContinuationMode::Off;
}

// beta or n, whichever drives the sharpness of this family.
double sharpness_of(const ShapeSpec& spec) {
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, shapes::SmoothPolytopeSpec> ||
                          std::is_same_v<T, shapes::TruncatedConeSpec>)
                return s.smax.beta;
            else
                return static_cast<double>(s.exponent);
        },
        spec);
}

} // namespace

Solution solve(const ContactPair& pair, const Pose& pose,
               const SolverConfig& config,
               const std::optional<Unknowns>& warm) {
    pose.require_orthonormal();
    const PairGeom pg_orig = geom_of(pair);
    check_origins(pg_orig, pose.r);

    // Geometric scaling: all lengths divided by max(r1_out, r2_out).
    const double scale = pair.geometric_scale();
    const ContactPair& spair = pair.scaled_pair();
    const Pose spose{pose.R, pose.r / scale};
    const PairGeom pg = geom_of(spair);

    // Surrogate rescaling of the translation (identity when disabled).
    SurrogateProblem surr;
    if (config.use_surrogate) {
        surr = build_surrogate(spair, spose, config.f_s);
    } else {
        const auto [amin, amax] = scaling_bounds(spair, spose.r);
        surr.scaled_translation = spose.r;
        surr.recovery_scale = 1.0;
        surr.alpha_min_s = amin;
        surr.alpha_max_s = amax;
    }
    const Pose pose_s{pose.R, surr.scaled_translation};

    // Map a warm start (original units) into surrogate coordinates.
    std::optional<Unknowns> init;
    if (warm && warm->as_vector().allFinite()) {
        const double k = scale * surr.recovery_scale;
        Unknowns zw;
        zw.x = warm->x / k;
        zw.s = warm->s - std::log(surr.recovery_scale);
        zw.lambda1 = warm->lambda1 / surr.recovery_scale;
        zw.lambda2 = warm->lambda2 / surr.recovery_scale;
        init = zw;
    }

    BestIterate best;
    int total_iters = 0;
    StageResult target = stage_solve(pg, pose_s, surr, config, init,
                                     /*is_target=*/true, config.n_attempts,
                                     best, total_iters);

    // Continuation fallback: solve a smoother instance first, then sharpen
    // stepwise, warm-starting each stage.
    if (!target.converged && continuation_enabled(config, pair)) {
        std::vector<std::pair<ShapeSpec, ShapeSpec>> levels;
        double prev1 = sharpness_of(*pg.s1), prev2 = sharpness_of(*pg.s2);
        for (int level = 1; level <= 8; ++level) {
            auto s1 = shapes::smoothed(*pg.s1, level);
            auto s2 = shapes::smoothed(*pg.s2, level);
            const double c1 = sharpness_of(s1), c2 = sharpness_of(s2);
            if (c1 == prev1 && c2 == prev2) break; // both at their floors
            prev1 = c1;
            prev2 = c2;
            levels.emplace_back(std::move(s1), std::move(s2));
        }
        for (std::size_t li = 0; li < levels.size() && !target.converged;
             ++li) {
            PairGeom pg_smooth{&levels[li].first, &levels[li].second, pg.r1,
                               pg.r2};
            StageResult stage =
                stage_solve(pg_smooth, pose_s, surr, config, std::nullopt,
                            /*is_target=*/false, config.n_attempts, best,
                            total_iters);
            if (!stage.converged) continue;
            // sharpen back toward the target
            bool ok = true;
            for (int lj = static_cast<int>(li); ok && lj >= 0; --lj) {
                const bool at_target = (lj == 0);
                PairGeom pg_stage =
                    at_target ? pg
                              : PairGeom{&levels[lj - 1].first,
                                         &levels[lj - 1].second, pg.r1, pg.r2};
                StageResult next = stage_solve(
                    pg_stage, pose_s, surr, config, stage.z, at_target,
                    /*max_attempts=*/1, best, total_iters);
                ok = next.converged;
                if (ok) stage = next;
            }
            if (ok) target = stage;
        }
    }

    // Recovery to original scale: alpha and lambda by the surrogate factor,
    // x additionally by the geometric scale.
    const Unknowns& zs = target.converged ? target.z : best.z;
    const double rec = surr.recovery_scale;
    Solution sol;
    sol.unknowns.x = scale * rec * zs.x;
    sol.unknowns.s = zs.s + std::log(rec);
    sol.unknowns.lambda1 = rec * zs.lambda1;
    sol.unknowns.lambda2 = rec * zs.lambda2;
    sol.alpha = sol.unknowns.alpha();
    sol.converged = target.converged;
    sol.iterations = total_iters;
    sol.residual_norm =
        target.converged
            ? assemble_residual(zs, eval_partials(zs, pg, pose_s)).norm()
            : best.fnorm;

    // Retain J_c at the solution in original units for IFT reuse.
    sol.jac = residual_jacobian(sol.unknowns, pair, pose);
    sol.jac_lu.compute(sol.jac);
    const Matrix6d inv = sol.jac_lu.inverse();
    if (inv.allFinite()) {
        sol.jac_cond = sol.jac.cwiseAbs().rowwise().sum().maxCoeff() *
                       inv.cwiseAbs().rowwise().sum().maxCoeff();
    }
    return sol;
}

} // namespace idcol::detector
