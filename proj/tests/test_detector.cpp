#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "idcol/detector.hpp"
#include "support/ellipsoid_oracle.hpp"
#include "support/oracles.hpp"

using namespace idcol;
using namespace idcol::detector;
using Eigen::Matrix3d;
using Eigen::Vector3d;
using oracles::rel_err;
using se3::Pose;
using se3::Vector6d;

namespace {

ContactPair unit_spheres() {
    return make_contact_pair(oracles::unit_sphere(), oracles::unit_sphere(),
                             256, 1.0);
}

// Exact tangency solution for unit spheres at separation d, multipliers from
// the stationarity conditions (the independent derivation, not the solver).
Unknowns sphere_solution(const ContactPair& pair, const Pose& pose) {
    const double d = pose.r.norm();
    const Vector3d r_hat = pose.r / d;
    Unknowns z;
    z.s = std::log(d / 2.0);
    z.x = (d / 2.0) * r_hat;
    const double alpha = z.alpha();
    // phi_i x from the analytic sphere gradient, lambda via Eq.(10c)/(10d)
    const Vector3d phi1_x = r_hat / alpha;
    const Vector3d phi2_x = -r_hat / alpha;
    z.lambda1 = alpha / pose.r.dot(phi1_x);
    z.lambda2 = -alpha / pose.r.dot(phi2_x);
    return z;
}

ContactPair ellipsoid_pair() {
    shapes::SuperellipsoidSpec e1;
    e1.semi_axes = Vector3d(1.0, 0.8, 0.6);
    e1.exponent = 1;
    shapes::SuperellipsoidSpec e2;
    e2.semi_axes = Vector3d(0.7, 0.7, 1.2);
    e2.exponent = 1;
    return make_contact_pair(e1, e2);
}

} // namespace

TEST_CASE("residual") {
    const ContactPair pair = unit_spheres();
    const Pose pose{Matrix3d::Identity(), Vector3d(3, 0, 0)};

    SUBCASE("analytic sphere tangency solution zeroes the residual") {
        const Unknowns z = sphere_solution(pair, pose);
        CHECK(z.lambda1 == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(residual(z, pair, pose).norm() < 1e-12);
    }
    SUBCASE("zero multipliers: the alpha-stationarity row is exactly 1") {
        Unknowns z;
        z.x = Vector3d(1.0, 0.2, 0.0);
        z.s = 0.1;
        const Vector6d f = residual(z, pair, pose);
        CHECK(f[5] == 1.0);
    }
    SUBCASE("matches FD of the Lagrangian in (x, alpha)") {
        std::mt19937 rng(41);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        const ContactPair mixed = make_contact_pair(
            oracles::cone_frustum(), oracles::superellipsoid());
        for (int trial = 0; trial < 20; ++trial) {
            const Pose g = oracles::random_pose(rng, 2.0);
            Unknowns z;
            z.x = Vector3d(0.8 + u(rng), u(rng), u(rng));
            z.s = 0.3 * u(rng);
            z.lambda1 = 1.0 + u(rng);
            z.lambda2 = 1.0 + u(rng);

            auto lagrangian = [&](const Vector3d& x, double alpha) {
                return alpha +
                       z.lambda1 * shapes::eval_value(mixed.shape1, x / alpha) +
                       z.lambda2 * shapes::eval_value(
                                       mixed.shape2,
                                       g.R.transpose() * (x - g.r) / alpha);
            };
            const Vector6d f = residual(z, mixed, g);
            const double alpha = z.alpha();
            CHECK(f[0] == doctest::Approx(shapes::eval_value(mixed.shape1,
                                                             z.x / alpha))
                              .epsilon(1e-12));
            const Vector3d grad_x = oracles::fd_gradient(
                [&](const Vector3d& x) { return lagrangian(x, alpha); }, z.x,
                1e-6);
            CHECK(rel_err(Vector3d(f.segment<3>(2)), grad_x, 1e-6) < 1e-5);
            const double dL_da = oracles::fd_derivative(
                [&](double a) { return lagrangian(z.x, a); }, alpha, 1e-6);
            CHECK(f[5] == doctest::Approx(dL_da).epsilon(1e-5));
        }
    }
    SUBCASE("coincident origins throw") {
        CHECK_THROWS_AS(
            residual(Unknowns{}, pair, Pose{Matrix3d::Identity(), Vector3d::Zero()}),
            CoincidentOrigins);
    }
}

TEST_CASE("residual_jacobian") {
    std::mt19937 rng(43);
    std::uniform_real_distribution<double> u(-0.4, 0.4);

    SUBCASE("matches FD of the residual in all 36 entries") {
        for (const auto& [s1, s2] : oracles::benchmark_pairs()) {
            const ContactPair pair = make_contact_pair(s1, s2);
            const Pose pose = oracles::random_pose(
                rng, pair.radii1.r_out + pair.radii2.r_out);
            Unknowns z;
            z.x = 0.5 * pose.r + Vector3d(u(rng), u(rng), u(rng));
            z.s = 0.3 * u(rng);
            z.lambda1 = 0.8 + u(rng);
            z.lambda2 = 0.8 + u(rng);

            const se3::Matrix6d J = residual_jacobian(z, pair, pose);
            se3::Matrix6d fd;
            const double h = 1e-6;
            for (int c = 0; c < 6; ++c) {
                Vector6d zp = z.as_vector(), zm = z.as_vector();
                zp[c] += h;
                zm[c] -= h;
                fd.col(c) = (residual(Unknowns::from_vector(zp), pair, pose) -
                             residual(Unknowns::from_vector(zm), pair, pose)) /
                            (2.0 * h);
            }
            CHECK(rel_err(J, fd, 1e-6) < 1e-5);
        }
    }
    SUBCASE("nonsingular at the sphere solution") {
        const ContactPair pair = unit_spheres();
        const Pose pose{Matrix3d::Identity(), Vector3d(3, 0, 0)};
        const se3::Matrix6d J =
            residual_jacobian(sphere_solution(pair, pose), pair, pose);
        Eigen::FullPivLU<se3::Matrix6d> lu(J);
        CHECK(lu.isInvertible());
        CHECK(J.norm() * lu.inverse().norm() < 1e6);
    }
    SUBCASE("zero multipliers: Hessian block vanishes, gradient columns remain") {
        const ContactPair pair = unit_spheres();
        const Pose pose{Matrix3d::Identity(), Vector3d(2.4, 0.3, 0)};
        Unknowns z;
        z.x = Vector3d(1.1, 0.1, 0.0);
        z.s = 0.1;
        const se3::Matrix6d J = residual_jacobian(z, pair, pose);
        CHECK(J.block<3, 4>(2, 0).norm() == 0.0);
        CHECK(J.block<1, 4>(5, 0).norm() == 0.0);
        // the multiplier columns are the stacked phi_i gradients in (x, a)
        CHECK(J.block<3, 1>(2, 4).norm() > 0.1);
        CHECK(J.block<3, 1>(2, 5).norm() > 0.1);
    }
}

TEST_CASE("scaling_bounds") {
    const ContactPair spheres = unit_spheres();
    const auto [lo, hi] = scaling_bounds(spheres, Vector3d(3, 0, 0));
    CHECK(lo == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(hi == doctest::Approx(1.5).epsilon(1e-12));

    ContactPair pair(oracles::unit_sphere(), oracles::unit_sphere(),
                     {0.5, 1.0}, {0.5, 1.0});
    const auto [lo2, hi2] = scaling_bounds(pair, Vector3d(0, 2, 0));
    CHECK(lo2 == doctest::Approx(1.0));
    CHECK(hi2 == doctest::Approx(2.0));

    SUBCASE("bounds bracket the solved alpha over random poses") {
        std::mt19937 rng(47);
        for (const auto& [s1, s2] : oracles::benchmark_pairs()) {
            const ContactPair p = make_contact_pair(s1, s2);
            const double span = p.radii1.r_out + p.radii2.r_out;
            for (int i = 0; i < 40; ++i) {
                const Pose pose = oracles::random_pose(rng, 1.3 * span);
                const Solution sol = solve(p, pose);
                REQUIRE(sol.converged);
                const auto [amin, amax] = scaling_bounds(p, pose.r);
                CHECK(sol.alpha >= amin * (1.0 - 1e-10));
                CHECK(sol.alpha <= amax * (1.0 + 1e-10));
            }
        }
    }
}

TEST_CASE("build_surrogate") {
    SUBCASE("f_S = 1 with exact unit spheres: tangent outer spheres") {
        const ContactPair pair = unit_spheres();
        const Pose pose{Matrix3d::Identity(), Vector3d(0.3, 0.1, 0)};
        const SurrogateProblem s = build_surrogate(pair, pose, 1.0);
        CHECK(s.scaled_translation.norm() == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(s.alpha_min_s == doctest::Approx(1.0));
    }
    SUBCASE("surrogate bounds are pose independent") {
        std::mt19937 rng(53);
        const ContactPair pair =
            make_contact_pair(oracles::poly_cube(), oracles::cylinder());
        const SurrogateProblem ref =
            build_surrogate(pair, oracles::random_pose(rng, 1.0), 2.0);
        for (int i = 0; i < 100; ++i) {
            const SurrogateProblem s =
                build_surrogate(pair, oracles::random_pose(rng, 3.0), 2.0);
            CHECK(s.alpha_min_s == ref.alpha_min_s);
            CHECK(s.alpha_max_s == ref.alpha_max_s);
        }
    }
    SUBCASE("surrogate-recovered solutions equal direct solves") {
        std::mt19937 rng(59);
        for (const auto& [s1, s2] : oracles::benchmark_pairs()) {
            const ContactPair pair = make_contact_pair(s1, s2);
            const double span = pair.radii1.r_out + pair.radii2.r_out;
            SolverConfig direct;
            direct.use_surrogate = false;
            int compared = 0;
            for (int i = 0; i < 60 && compared < 15; ++i) {
                // well-conditioned band around contact; without the surrogate
                // the Newton iteration may also land on a spurious KKT root
                // (negative multipliers) -- those samples are exactly the
                // ill-conditioned cases the surrogate exists for, skip them
                Pose pose = oracles::random_pose(rng, 1.0);
                pose.r *= span / pose.r.norm();
                const Solution with = solve(pair, pose);
                const Solution without = solve(pair, pose, direct);
                if (!with.converged || !without.converged) continue;
                if (without.unknowns.lambda1 < 0.0 ||
                    without.unknowns.lambda2 < 0.0)
                    continue;
                ++compared;
                CHECK(with.alpha ==
                      doctest::Approx(without.alpha).epsilon(1e-8));
                CHECK(rel_err(with.unknowns.x, without.unknowns.x) < 1e-8);
                CHECK(with.unknowns.lambda1 ==
                      doctest::Approx(without.unknowns.lambda1).epsilon(1e-7));
                CHECK(with.unknowns.lambda2 ==
                      doctest::Approx(without.unknowns.lambda2).epsilon(1e-7));
            }
            CHECK(compared >= 15);
        }
    }
}

TEST_CASE("cold_start") {
    SUBCASE("exact for unit spheres at any separating factor") {
        const ContactPair pair = unit_spheres();
        std::mt19937 rng(61);
        for (double f_s : {1.0, 1.5, 2.0, 5.0}) {
            const Pose pose = oracles::random_pose(rng, 2.6);
            const SurrogateProblem surr = build_surrogate(pair, pose, f_s);
            const Unknowns z0 = cold_start(pair, surr, pose.R);
            const Pose surr_pose{pose.R, surr.scaled_translation};
            CHECK(residual(z0, pair, surr_pose).norm() < 1e-11);
        }
    }
    SUBCASE("s0 is the log-midpoint of the surrogate bounds") {
        const ContactPair pair =
            make_contact_pair(oracles::poly_cube(), oracles::cone_frustum());
        const Pose pose{Matrix3d::Identity(), Vector3d(1.2, 0.4, -0.2)};
        const SurrogateProblem surr = build_surrogate(pair, pose, 2.0);
        const Unknowns z0 = cold_start(pair, surr, pose.R);
        CHECK(z0.s == doctest::Approx(0.5 * (std::log(surr.alpha_min_s) +
                                             std::log(surr.alpha_max_s)))
                          .epsilon(1e-14));
    }
    SUBCASE("multipliers start positive across pairs and poses") {
        std::mt19937 rng(67);
        for (const auto& [s1, s2] : oracles::benchmark_pairs()) {
            const ContactPair pair = make_contact_pair(s1, s2);
            const double span = pair.radii1.r_out + pair.radii2.r_out;
            for (int i = 0; i < 100; ++i) {
                const Pose pose = oracles::random_pose(rng, span);
                const SurrogateProblem surr = build_surrogate(pair, pose, 2.0);
                const Unknowns z0 = cold_start(pair, surr, pose.R);
                CHECK(z0.lambda1 > 0.0);
                CHECK(z0.lambda2 > 0.0);
            }
        }
    }
}

TEST_CASE("solve: spheres") {
    const ContactPair pair = unit_spheres();
    SUBCASE("separation") {
        const Solution sol =
            solve(pair, Pose{Matrix3d::Identity(), Vector3d(3, 0, 0)});
        CHECK(sol.converged);
        CHECK(sol.alpha == doctest::Approx(1.5).epsilon(1e-10));
        CHECK((sol.unknowns.x - Vector3d(1.5, 0, 0)).norm() < 1e-9);
        CHECK(sol.iterations <= 1);
    }
    SUBCASE("penetration") {
        const Solution sol =
            solve(pair, Pose{Matrix3d::Identity(), Vector3d(1.5, 0, 0)});
        CHECK(sol.converged);
        CHECK(sol.alpha == doctest::Approx(0.75).epsilon(1e-10));
    }
}

TEST_CASE("solve: KKT certificate on random poses for all family pairs") {
    std::mt19937 rng(71);
    for (const auto& [s1, s2] : oracles::benchmark_pairs()) {
        const ContactPair pair = make_contact_pair(s1, s2);
        const double span = pair.radii1.r_out + pair.radii2.r_out;
        for (int i = 0; i < 50; ++i) {
            const Pose pose = oracles::random_pose(rng, 1.2 * span);
            const Solution sol = solve(pair, pose);
            REQUIRE(sol.converged);
            CHECK(sol.residual_norm < 1e-10);
            CHECK(sol.unknowns.lambda1 >= -1e-10);
            CHECK(sol.unknowns.lambda2 >= -1e-10);
        }
    }
}

TEST_CASE("solve: symmetry under swapping the bodies") {
    std::mt19937 rng(73);
    const ContactPair ab =
        make_contact_pair(oracles::superellipsoid(), oracles::cone_frustum());
    const ContactPair ba =
        make_contact_pair(oracles::cone_frustum(), oracles::superellipsoid());
    for (int i = 0; i < 25; ++i) {
        const Pose g = oracles::random_pose(rng, 1.1 * (ab.radii1.r_out +
                                                        ab.radii2.r_out));
        const Solution s1 = solve(ab, g);
        const Solution s2 = solve(ba, g.inverse());
        REQUIRE(s1.converged);
        REQUIRE(s2.converged);
        CHECK(s1.alpha == doctest::Approx(s2.alpha).epsilon(1e-8));
        // witness points map onto each other under g: x2 = R^T (x1 - a r)
        // with the shared point of the swapped problem scaled consistently
        const Vector3d x_mapped =
            g.R.transpose() * (s1.unknowns.x - s1.alpha * g.r / s1.alpha) *
            1.0; // x* and r live in the same (scaled) frame: p2 check below
        const Vector3d p2_direct = (1.0 - 1.0 / s1.alpha) * g.r +
                                   s1.unknowns.x / s1.alpha;
        const Vector3d p1_swapped_in_1 =
            g.R * (s2.unknowns.x / s2.alpha) + g.r;
        CHECK((p2_direct - p1_swapped_in_1).norm() < 1e-7);
        (void)x_mapped;
    }
}

TEST_CASE("solve: frame invariance of the relative pose") {
    std::mt19937 rng(79);
    const ContactPair pair =
        make_contact_pair(oracles::poly_cube(), oracles::cylinder());
    for (int i = 0; i < 20; ++i) {
        const Pose g1w = oracles::random_pose(rng, 5.0);
        const Pose g2w = oracles::random_pose(rng, 5.0);
        const Pose world = oracles::random_pose(rng, 10.0);
        const Pose rel_a = g1w.inverse() * g2w;
        const Pose rel_b = (world * g1w).inverse() * (world * g2w);
        if (rel_a.r.norm() < 0.3 * (pair.radii1.r_out + pair.radii2.r_out))
            continue;
        const Solution sa = solve(pair, rel_a);
        Pose rel_b_fixed = rel_b; // rounding may leave R slightly off-manifold
        Eigen::JacobiSVD<Matrix3d> svd(rel_b.R, Eigen::ComputeFullU |
                                                    Eigen::ComputeFullV);
        rel_b_fixed.R = svd.matrixU() * svd.matrixV().transpose();
        const Solution sb = solve(pair, rel_b_fixed);
        if (!sa.converged || !sb.converged) continue;
        CHECK(std::abs(sa.alpha - sb.alpha) < 1e-10);
    }
}

TEST_CASE("solve: scaling consistency") {
    // Jointly scaling both shapes and the translation by c leaves alpha (and
    // the multipliers) invariant and scales x by c.
    std::mt19937 rng(83);
    const double c = 3.7;
    for (const auto& [s1, s2] : oracles::benchmark_pairs()) {
        const ContactPair pair = make_contact_pair(s1, s2);
        const ContactPair big = make_contact_pair(shapes::scaled(s1, c),
                                                  shapes::scaled(s2, c));
        const double span = pair.radii1.r_out + pair.radii2.r_out;
        for (int i = 0; i < 10; ++i) {
            const Pose pose = oracles::random_pose(rng, 1.1 * span);
            const Pose scaled_pose{pose.R, c * pose.r};
            const Solution small_sol = solve(pair, pose);
            const Solution big_sol = solve(big, scaled_pose);
            REQUIRE(small_sol.converged);
            REQUIRE(big_sol.converged);
            CHECK(big_sol.alpha == doctest::Approx(small_sol.alpha).epsilon(1e-9));
            CHECK(rel_err(big_sol.unknowns.x, c * small_sol.unknowns.x) < 1e-8);
            CHECK(big_sol.unknowns.lambda1 ==
                  doctest::Approx(small_sol.unknowns.lambda1).epsilon(1e-7));
            CHECK(big_sol.unknowns.lambda2 ==
                  doctest::Approx(small_sol.unknowns.lambda2).epsilon(1e-7));
        }
    }
}

TEST_CASE("solve: ellipsoid pair agrees with the brute-force oracles") {
    std::mt19937 rng(89);
    const ContactPair pair = ellipsoid_pair();
    const double span = pair.radii1.r_out + pair.radii2.r_out;
    const shapes::SuperellipsoidSpec& e1 =
        std::get<shapes::SuperellipsoidSpec>(pair.shape1);
    const shapes::SuperellipsoidSpec& e2 =
        std::get<shapes::SuperellipsoidSpec>(pair.shape2);
    for (int i = 0; i < 20; ++i) {
        const Pose pose = oracles::random_pose(rng, 1.2 * span);
        const Solution sol = solve(pair, pose);
        REQUIRE(sol.converged);
        const double dual =
            oracles::ellipsoid_alpha_dual(e1.semi_axes, pose, e2.semi_axes);
        CHECK(sol.alpha == doctest::Approx(dual).epsilon(1e-8));
        const double grid =
            oracles::ellipsoid_alpha_grid(e1.semi_axes, pose, e2.semi_axes);
        CHECK(sol.alpha == doctest::Approx(grid).epsilon(1e-4));
    }
}

TEST_CASE("solve: warm start stays in the Newton basin along a sweep") {
    const ContactPair pair =
        make_contact_pair(oracles::cone_frustum(), oracles::superellipsoid());
    const double span = pair.radii1.r_out + pair.radii2.r_out;
    std::optional<Unknowns> warm;
    int warm_solves = 0, fast = 0;
    for (int k = 0; k < 600; ++k) {
        const double t = 0.002 * k;
        Pose pose;
        pose.R = se3::exp_so3(Vector3d(0.8 * std::sin(t), 0.6 * t, 0.3));
        pose.r = span * Vector3d(1.0 + 0.3 * std::sin(2.0 * t),
                                 0.25 * std::sin(3.0 * t),
                                 0.2 * std::cos(t));
        const Solution sol = solve(pair, pose, {}, warm);
        REQUIRE(sol.converged);
        if (warm) {
            ++warm_solves;
            if (sol.iterations <= 5) ++fast;
        }
        warm = sol.unknowns;
    }
    CHECK(fast >= static_cast<int>(0.95 * warm_solves));
}

TEST_CASE("solve: failure contract returns diagnostics without throwing") {
    const ContactPair pair = unit_spheres();
    SolverConfig cfg;
    cfg.tol = 1e-300; // unattainable at a generic pose
    cfg.k_max = 3;
    cfg.n_attempts = 1;
    cfg.continuation = ContinuationMode::Off;
    const Solution sol = solve(
        pair, Pose{se3::exp_so3(Vector3d(0.1, -0.2, 0.3)),
                   Vector3d(2.47, 0.13, -0.21)},
        cfg);
    CHECK_FALSE(sol.converged);
    CHECK(std::isfinite(sol.residual_norm));
    CHECK(std::isfinite(sol.alpha));
    CHECK(sol.alpha > 0.0);
}

TEST_CASE("solve: coincident origins throw") {
    const ContactPair pair = unit_spheres();
    CHECK_THROWS_AS(
        solve(pair, Pose{Matrix3d::Identity(), Vector3d(1e-15, 0, 0)}),
        CoincidentOrigins);
}
