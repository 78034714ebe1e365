#pragma once

#include <string>
#include <vector>

#include "idcol/detector.hpp"
#include "idcol/json_io.hpp"

namespace idcol::multibody {

using detector::ContactPair;
using detector::SolverConfig;
using se3::Pose;
using se3::Vector6d;
using Eigen::Vector3d;

struct RigidBody {
    std::string name;
    shapes::ShapeSpec shape;
    shapes::BoundingRadii radii;
    double mass = 1.0;
    Vector3d inertia_diag = Vector3d::Constant(0.1);
    Pose pose;                          // world
    Vector3d v_world = Vector3d::Zero();
    Vector3d w_body = Vector3d::Zero();
};

struct SimConfig {
    double dt = 1e-3;
    double duration = 1.0;
    double stiffness = 1e4;
    double exponent = 1.5;
    Vector3d gravity = Vector3d::Zero();
    SolverConfig solver;
    int sample_stride = 10; // trajectory rows every this many steps
};

struct TrajectoryRow {
    double t = 0.0;
    int body = 0;
    Pose pose;
    Vector6d twist; // body frame [w; v]
    int contacts = 0;
};

struct SimResult {
    bool blew_up = false;           // kinetic energy exceeded 1e3x initial
    int solver_failures = 0;
    double initial_kinetic = 0.0, final_kinetic = 0.0;
    Vector3d initial_momentum = Vector3d::Zero();
    double max_momentum_drift = 0.0; // max ||p(t) - p(0)||
    double momentum_scale = 0.0;     // sum_i m_i ||v_i(0)||
    std::vector<TrajectoryRow> trajectory;
    std::vector<RigidBody> final_bodies;
};

// Free 6-DOF rigid bodies under penalty contact, semi-implicit Euler with a
// multiplicative (exponential) orientation update each step. All-pairs
// outer-sphere broad phase, warm-started narrow phase per surviving pair.
SimResult simulate(std::vector<RigidBody> bodies, const SimConfig& config);

// Builds the body list from a scene (bounding radii computed per shape).
std::vector<RigidBody> bodies_from_scene(const io::Scene& scene);

} // namespace idcol::multibody
