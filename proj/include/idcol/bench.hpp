#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idcol/detector.hpp"

namespace idcol::bench {

using detector::ContactPair;
using detector::SolverConfig;
using se3::Pose;

// Deterministic ergodic SE(3) sweep. Translation oscillates about
// center_distance * dir0 and the orientation follows exponential coordinates
// pi * sin(w_i tau); the six frequencies are mutually incommensurate
// (square roots of distinct primes), so the trajectory never repeats.
// Everything is seed-free and platform-reproducible.
struct SweepSpec {
    ContactPair pair;
    std::int64_t n_poses = 0;
    double center_distance = 0.0; // defaulted from the pair when <= 0
    Eigen::Vector3d amplitudes = Eigen::Vector3d::Zero(); // defaulted when 0
    Eigen::Matrix<double, 6, 1> frequencies;  // 3 translational, 3 rotational
    bool warm_start = true;
    Eigen::Vector3d dir0 = Eigen::Vector3d::UnitX();
    double dtau = 0.0; // defaulted so successive poses move <= 5% of r_out

    explicit SweepSpec(ContactPair p);
};

struct SweepReport {
    std::int64_t n_converged = 0, n_failed = 0;
    double runtime_mean_ns = 0.0, runtime_median_ns = 0.0, runtime_p99_ns = 0.0;
    double iterations_mean = 0.0;
    int iterations_max = 0;
    double alpha_min = 0.0, alpha_max = 0.0;
    std::vector<std::int64_t> failure_poses;

    // Per-pose details for CSV emission (alpha, converged, iterations,
    // runtime, gap), index-aligned with the sweep.
    struct Row {
        double alpha = 0.0;
        bool converged = false;
        int iterations = 0;
        std::int64_t runtime_ns = 0;
        double gap = 0.0;
    };
    std::vector<Row> rows;
};

Pose pose_at(const SweepSpec& spec, std::int64_t t);

// Solves every pose of the sweep, warm-starting from the previous solution
// when spec.warm_start. Timing excludes a warm-up batch of
// min(100, n/10) queries. Cold sweeps may shard across `jobs` workers.
SweepReport run_sweep(const SweepSpec& spec, const SolverConfig& config,
                      int jobs = 1);

// Worst relative error of every exposed derivative against central finite
// differences of full re-solves along the sweep. The FD step perturbs the
// relative pose through the free-body Jacobian J = I6.
struct AuditReport {
    double dz = 0.0;     // all six rows of dz*/dq
    double gap = 0.0;    //  d d_D / dq
    double normal = 0.0; //  d n / dq
    double p1 = 0.0, p2 = 0.0;
    double F1 = 0.0, F2 = 0.0; // wrench rows, penetrating samples only
    int samples = 0;
    int wrench_samples = 0;
    // Poses whose contact Jacobian condition exceeds 1e8: the sensitivity
    // linear regime there is narrower than any FD step that clears solver
    // noise, so they cannot be FD-audited (smooth the shapes instead).
    int skipped_degenerate = 0;

    double overall() const;
};

AuditReport gradient_audit(const ContactPair& pair, int n_samples,
                           double fd_step,
                           const SolverConfig& config = SolverConfig{});

} // namespace idcol::bench
