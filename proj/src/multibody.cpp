#include "idcol/multibody.hpp"

#include <cmath>
#include <map>

#include "idcol/sensitivity.hpp"

namespace idcol::multibody {

using detector::Solution;
using detector::Unknowns;

std::vector<RigidBody> bodies_from_scene(const io::Scene& scene) {
    std::map<std::string, shapes::BoundingRadii> radii_cache;
    std::vector<RigidBody> bodies;
    for (const auto& sb : scene.bodies) {
        RigidBody body;
        body.name = sb.name;
        body.shape = scene.shape_by_name(sb.shape);
        auto it = radii_cache.find(sb.shape);
        if (it == radii_cache.end())
            it = radii_cache.emplace(sb.shape, shapes::bounding_radii(body.shape))
                     .first;
        body.radii = it->second;
        body.mass = sb.mass;
        body.inertia_diag = sb.inertia_diag;
        body.pose = sb.pose;
        body.w_body = sb.velocity.head<3>();
        body.v_world = sb.pose.R * sb.velocity.tail<3>();
        bodies.push_back(std::move(body));
    }
    return bodies;
}

namespace {

double kinetic_energy(const std::vector<RigidBody>& bodies) {
    double ke = 0.0;
    for (const auto& b : bodies)
        ke += 0.5 * b.mass * b.v_world.squaredNorm() +
              0.5 * b.w_body.dot(b.inertia_diag.asDiagonal() * b.w_body);
    return ke;
}

Vector3d linear_momentum(const std::vector<RigidBody>& bodies) {
    Vector3d p = Vector3d::Zero();
    for (const auto& b : bodies) p += b.mass * b.v_world;
    return p;
}

} // namespace

SimResult simulate(std::vector<RigidBody> bodies, const SimConfig& config) {
    const int n = static_cast<int>(bodies.size());
    SimResult result;
    result.initial_kinetic = kinetic_energy(bodies);
    result.initial_momentum = linear_momentum(bodies);
    for (const auto& b : bodies) result.momentum_scale += b.mass * b.v_world.norm();

    // Narrow-phase state per unordered pair.
    struct PairState {
        std::unique_ptr<ContactPair> pair;
        std::optional<Unknowns> warm;
    };
    std::vector<PairState> pairs;
    pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            pairs.push_back(
                {std::make_unique<ContactPair>(bodies[i].shape, bodies[j].shape,
                                               bodies[i].radii, bodies[j].radii),
                 std::nullopt});

    const int steps = static_cast<int>(std::ceil(config.duration / config.dt));
    std::vector<Vector3d> force_w(n), torque_b(n);
    std::vector<int> contact_count(n);

    for (int step = 0; step < steps; ++step) {
        const double t = step * config.dt;
        for (int i = 0; i < n; ++i) {
            force_w[i] = bodies[i].mass * config.gravity;
            torque_b[i].setZero();
            contact_count[i] = 0;
        }

        std::size_t pidx = 0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j, ++pidx) {
                PairState& ps = pairs[pidx];
                const RigidBody& a = bodies[i];
                const RigidBody& b = bodies[j];
                // Outer-sphere broad phase: no wrench is possible unless the
                // outer spheres overlap (alpha* >= ||r|| / (r1out + r2out)).
                const double dist = (b.pose.r - a.pose.r).norm();
                if (dist >= a.radii.r_out + b.radii.r_out) continue;

                const Pose rel = a.pose.inverse() * b.pose;
                const Solution sol =
                    detector::solve(*ps.pair, rel, config.solver, ps.warm);
                if (!sol.converged) {
                    ++result.solver_failures;
                    ps.warm.reset();
                    continue;
                }
                ps.warm = sol.unknowns;
                const auto kin =
                    sensitivity::contact_kinematics(sol, rel, *ps.pair);
                const auto wrench = sensitivity::contact_wrench(
                    kin, sol, rel, config.stiffness, config.exponent);
                if (wrench.fn == 0.0) continue;

                torque_b[i] += wrench.F_c1.head<3>();
                force_w[i] += a.pose.R * wrench.F_c1.tail<3>();
                torque_b[j] += wrench.F_c2.head<3>();
                force_w[j] += b.pose.R * wrench.F_c2.tail<3>();
                ++contact_count[i];
                ++contact_count[j];
            }
        }

        // Semi-implicit Euler; orientation updated multiplicatively so the
        // state never hits a coordinate singularity.
        for (int i = 0; i < n; ++i) {
            RigidBody& body = bodies[i];
            body.v_world += config.dt / body.mass * force_w[i];
            const Vector3d Iw = body.inertia_diag.asDiagonal() * body.w_body;
            const Vector3d wdot = body.inertia_diag.cwiseInverse().asDiagonal() *
                                  (torque_b[i] - body.w_body.cross(Iw));
            body.w_body += config.dt * wdot;
            body.pose.r += config.dt * body.v_world;
            body.pose.R = body.pose.R * se3::exp_so3(config.dt * body.w_body);
        }

        const double drift =
            (linear_momentum(bodies) - result.initial_momentum).norm();
        result.max_momentum_drift = std::max(result.max_momentum_drift, drift);

        if (config.sample_stride > 0 && step % config.sample_stride == 0) {
            for (int i = 0; i < n; ++i) {
                TrajectoryRow row;
                row.t = t + config.dt;
                row.body = i;
                row.pose = bodies[i].pose;
                row.twist.head<3>() = bodies[i].w_body;
                row.twist.tail<3>() = bodies[i].pose.R.transpose() * bodies[i].v_world;
                row.contacts = contact_count[i];
                result.trajectory.push_back(row);
            }
        }

        if (kinetic_energy(bodies) >
            1e3 * std::max(result.initial_kinetic, 1e-12)) {
            result.blew_up = true;
            break;
        }
    }

    result.final_kinetic = kinetic_energy(bodies);
    result.final_bodies = std::move(bodies);
    return result;
}

} // namespace idcol::multibody
