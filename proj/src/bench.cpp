#include "idcol/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "idcol/sensitivity.hpp"

namespace idcol::bench {

using detector::Solution;
using detector::solve;
using detector::Unknowns;
using Eigen::Vector3d;
using se3::Vector6d;

SweepSpec::SweepSpec(ContactPair p) : pair(std::move(p)) {
    frequencies << 1.0, std::sqrt(2.0), std::sqrt(3.0), std::sqrt(5.0),
        std::sqrt(7.0), std::sqrt(11.0);
    const double r_sum = pair.radii1.r_out + pair.radii2.r_out;
    center_distance = r_sum;
    amplitudes = Vector3d(0.55, 0.45, 0.35) * r_sum;

    // Step tau so that successive poses move at most 5% of the larger outer
    // radius (translation speed plus worst-case rotational surface speed).
    const double r_max = std::max(pair.radii1.r_out, pair.radii2.r_out);
    const double v_trans =
        (amplitudes.array() * frequencies.head<3>().array()).matrix().norm();
    const double v_rot = M_PI * frequencies.tail<3>().norm() * pair.radii2.r_out;
    dtau = 0.05 * r_max / (v_trans + v_rot);
}

Pose pose_at(const SweepSpec& spec, std::int64_t t) {
    const double tau = static_cast<double>(t) * spec.dtau;
    Vector3d r = spec.center_distance * spec.dir0;
    for (int i = 0; i < 3; ++i)
        r[i] += spec.amplitudes[i] * std::sin(spec.frequencies[i] * tau);
    Vector3d theta;
    for (int i = 0; i < 3; ++i)
        theta[i] = M_PI * std::sin(spec.frequencies[i + 3] * tau);
    return Pose{se3::exp_so3(theta), r};
}

SweepReport run_sweep(const SweepSpec& spec, const SolverConfig& config,
                      int jobs) {
    SweepReport report;
    const std::int64_t n = spec.n_poses;
    if (n <= 0) return report;
    report.rows.resize(static_cast<std::size_t>(n));

    auto solve_range = [&](std::int64_t begin, std::int64_t end) {
        std::optional<Unknowns> warm;
        for (std::int64_t t = begin; t < end; ++t) {
            const Pose pose = pose_at(spec, t);
            const auto t0 = std::chrono::steady_clock::now();
            const Solution sol = solve(spec.pair, pose, config, warm);
            const auto t1 = std::chrono::steady_clock::now();
            auto& row = report.rows[static_cast<std::size_t>(t)];
            row.alpha = sol.alpha;
            row.converged = sol.converged;
            row.iterations = sol.iterations;
            row.runtime_ns =
                std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
                    .count();
            row.gap = (1.0 - 1.0 / sol.alpha) * pose.r.norm();
            if (spec.warm_start)
                warm = sol.converged ? std::optional<Unknowns>(sol.unknowns)
                                     : std::nullopt;
        }
    };

    if (!spec.warm_start && jobs > 1) {
        const int workers = std::min<std::int64_t>(jobs, n);
        std::vector<std::thread> pool;
        const std::int64_t chunk = (n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const std::int64_t begin = w * chunk;
            const std::int64_t end = std::min(n, begin + chunk);
            if (begin < end) pool.emplace_back(solve_range, begin, end);
        }
        for (auto& th : pool) th.join();
    } else {
        solve_range(0, n);
    }

    report.alpha_min = std::numeric_limits<double>::infinity();
    report.alpha_max = -std::numeric_limits<double>::infinity();
    double iter_sum = 0.0;
    for (std::int64_t t = 0; t < n; ++t) {
        const auto& row = report.rows[static_cast<std::size_t>(t)];
        if (row.converged) {
            ++report.n_converged;
            report.alpha_min = std::min(report.alpha_min, row.alpha);
            report.alpha_max = std::max(report.alpha_max, row.alpha);
        } else {
            ++report.n_failed;
            report.failure_poses.push_back(t);
        }
        iter_sum += row.iterations;
        report.iterations_max = std::max(report.iterations_max, row.iterations);
    }
    report.iterations_mean = iter_sum / static_cast<double>(n);

    // Timing stats exclude a warm-up batch.
    const std::int64_t warmup = std::min<std::int64_t>(100, n / 10);
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(n - warmup));
    for (std::int64_t t = warmup; t < n; ++t)
        times.push_back(static_cast<double>(
            report.rows[static_cast<std::size_t>(t)].runtime_ns));
    if (!times.empty()) {
        std::sort(times.begin(), times.end());
        report.runtime_mean_ns =
            std::accumulate(times.begin(), times.end(), 0.0) / times.size();
        report.runtime_median_ns = times[times.size() / 2];
        const std::size_t p99 = std::min(
            times.size() - 1,
            static_cast<std::size_t>(std::ceil(0.99 * times.size())) - 1);
        report.runtime_p99_ns = times[p99];
    }
    return report;
}

double AuditReport::overall() const {
    return std::max({dz, gap, normal, p1, p2, F1, F2});
}

namespace {

struct FdQuantities {
    Vector6d z; // (x, alpha, lambda1, lambda2)
    double gap = 0.0;
    Vector3d normal = Vector3d::Zero();
    Vector3d p1 = Vector3d::Zero(), p2 = Vector3d::Zero();
    Vector6d F1 = Vector6d::Zero(), F2 = Vector6d::Zero();
};

double rel_err(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
    const double scale = std::max(
        {analytic.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff(), 1e-12});
    return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

} // namespace

AuditReport gradient_audit(const ContactPair& pair, int n_samples,
                           double fd_step, const SolverConfig& config) {
    constexpr double stiffness = 1e4;
    constexpr double exponent = 1.5;

    SolverConfig cfg = config;
    cfg.tol = std::min(config.tol, 1e-12); // FD noise floor needs tight solves
    const se3::GeometricJacobian jac = se3::GeometricJacobian::identity();

    SweepSpec sweep(pair);
    sweep.warm_start = false;

    auto quantities = [&](const Pose& pose,
                          const std::optional<Unknowns>& warm,
                          FdQuantities& q) -> bool {
        const Solution sol = solve(pair, pose, cfg, warm);
        if (!sol.converged) return false;
        q.z << sol.unknowns.x, sol.alpha, sol.unknowns.lambda1,
            sol.unknowns.lambda2;
        const auto kin = sensitivity::contact_kinematics(sol, pose, pair);
        q.gap = kin.gap;
        q.normal = kin.normal;
        q.p1 = kin.p1;
        q.p2 = kin.p2;
        const auto w =
            sensitivity::contact_wrench(kin, sol, pose, stiffness, exponent);
        q.F1 = w.F_c1;
        q.F2 = w.F_c2;
        return true;
    };

    AuditReport report;
    // prime stride from an asymmetric start: spreads the samples over the
    // ergodic trajectory (the t = 0 pose is constructed axis-aligned and
    // often degenerate)
    const std::int64_t stride = 997;
    std::int64_t t = 101;
    const int wrench_floor = std::min(5, n_samples);
    while ((report.samples < n_samples ||
            report.wrench_samples < wrench_floor) &&
           t < 20000 * stride) {
        const Pose pose = pose_at(sweep, t);
        t += stride;

        const Solution sol = solve(pair, pose, cfg);
        if (!sol.converged) continue;
        if (!(sol.jac_cond < 1e8)) {
            ++report.skipped_degenerate;
            continue;
        }
        const auto kin = sensitivity::contact_kinematics(sol, pose, pair);
        const auto bundle =
            sensitivity::solution_sensitivity(sol, pair, pose, jac);
        const auto ksens = sensitivity::kinematics_sensitivity(
            bundle, kin, sol, pose, pair, jac);
        const auto wrench =
            sensitivity::contact_wrench(kin, sol, pose, stiffness, exponent);

        // The wrench map has a kink at delta = 0; audit it only safely inside
        // the penetrating regime.
        const double delta = std::max(-kin.gap, 0.0);
        const bool audit_wrench =
            delta > 1e-3 * (pair.radii1.r_out + pair.radii2.r_out);
        std::optional<sensitivity::WrenchSensitivity> wsens;
        if (audit_wrench)
            wsens = sensitivity::wrench_sensitivity(
                wrench, ksens, kin, bundle, sol, pose, pair, jac, stiffness,
                exponent);

        Eigen::MatrixXd fd_z(6, 6), fd_gap(1, 6), fd_normal(3, 6), fd_p1(3, 6),
            fd_p2(3, 6), fd_F1(6, 6), fd_F2(6, 6);
        bool ok = true;
        for (int i = 0; i < 6 && ok; ++i) {
            Vector6d dq = Vector6d::Zero();
            dq[i] = fd_step;
            const Pose pose_p = pose * se3::exp_se3(dq);
            const Pose pose_m = pose * se3::exp_se3(-dq);
            FdQuantities qp, qm;
            ok = quantities(pose_p, sol.unknowns, qp) &&
                 quantities(pose_m, sol.unknowns, qm);
            if (!ok) break;
            const double inv = 1.0 / (2.0 * fd_step);
            fd_z.col(i) = (qp.z - qm.z) * inv;
            fd_gap(0, i) = (qp.gap - qm.gap) * inv;
            fd_normal.col(i) = (qp.normal - qm.normal) * inv;
            fd_p1.col(i) = (qp.p1 - qm.p1) * inv;
            fd_p2.col(i) = (qp.p2 - qm.p2) * inv;
            fd_F1.col(i) = (qp.F1 - qm.F1) * inv;
            fd_F2.col(i) = (qp.F2 - qm.F2) * inv;
        }
        if (!ok) continue;

        report.dz = std::max(report.dz, rel_err(bundle.dz_dq, fd_z));
        report.gap = std::max(report.gap, rel_err(ksens.dgap_dq, fd_gap));
        report.normal =
            std::max(report.normal, rel_err(ksens.dnormal_dq, fd_normal));
        report.p1 = std::max(report.p1, rel_err(ksens.dp1_dq, fd_p1));
        report.p2 = std::max(report.p2, rel_err(ksens.dp2_dq, fd_p2));
        if (wsens) {
            report.F1 = std::max(report.F1, rel_err(wsens->dF1_dq, fd_F1));
            report.F2 = std::max(report.F2, rel_err(wsens->dF2_dq, fd_F2));
            ++report.wrench_samples;
        }
        ++report.samples;
    }
    return report;
}

} // namespace idcol::bench
