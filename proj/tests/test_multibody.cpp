#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "idcol/multibody.hpp"
#include "support/oracles.hpp"

using namespace idcol;
using namespace idcol::multibody;
using Eigen::Vector3d;

#ifndef IDCOL_SCENE_DIR
#define IDCOL_SCENE_DIR "."
#endif

namespace {

RigidBody make_sphere_body(const std::string& name, const Vector3d& pos,
                           const Vector3d& v_world) {
    RigidBody b;
    b.name = name;
    b.shape = oracles::unit_sphere();
    b.radii = shapes::bounding_radii(b.shape);
    b.mass = 1.0;
    b.inertia_diag = Vector3d::Constant(0.4);
    b.pose.r = pos;
    b.v_world = v_world;
    return b;
}

} // namespace

TEST_CASE("single free body follows the ballistic closed form") {
    RigidBody body = make_sphere_body("solo", Vector3d(0, 0, 0),
                                      Vector3d(0.3, -0.1, 0.2));
    body.w_body = Vector3d(0.5, 0.0, 0.0);
    SimConfig cfg;
    cfg.duration = 1.0;
    cfg.dt = 1e-3;
    const SimResult res = simulate({body}, cfg);
    REQUIRE_FALSE(res.blew_up);
    const RigidBody& end = res.final_bodies[0];
    CHECK((end.pose.r - Vector3d(0.3, -0.1, 0.2)).norm() < 1e-9);
    // constant body rate about a fixed axis: R(t) = exp(w t)
    const Eigen::Matrix3d expected = se3::exp_so3(Vector3d(0.5, 0, 0));
    CHECK((end.pose.R - expected).norm() < 1e-9);
    CHECK(res.solver_failures == 0);
}

TEST_CASE("two spheres head on: symmetric rebound, momentum conserved") {
    const double v0 = 1.0;
    std::vector<RigidBody> bodies = {
        make_sphere_body("L", Vector3d(-1.6, 0, 0), Vector3d(v0, 0, 0)),
        make_sphere_body("R", Vector3d(1.6, 0, 0), Vector3d(-v0, 0, 0)),
    };
    SimConfig cfg;
    cfg.duration = 2.5;
    cfg.dt = 5e-4;
    cfg.stiffness = 1e4;
    cfg.exponent = 1.5;
    const SimResult res = simulate(bodies, cfg);
    REQUIRE_FALSE(res.blew_up);
    CHECK(res.solver_failures == 0);
    CHECK(res.max_momentum_drift < 1e-6 * res.momentum_scale);

    const Vector3d vL = res.final_bodies[0].v_world;
    const Vector3d vR = res.final_bodies[1].v_world;
    CHECK((vL + vR).norm() < 1e-9); // total momentum was zero
    CHECK(vL.x() < 0.0);            // bounced back
    CHECK(vR.x() > 0.0);
    // frictionless central impact stays on the line of centers
    CHECK(std::abs(vL.y()) < 1e-12);
    CHECK(std::abs(vL.z()) < 1e-12);
}

TEST_CASE("zoo scene loads and runs a short gravity-free segment") {
    const io::Scene scene =
        io::load_scene(std::string(IDCOL_SCENE_DIR) + "/zoo10.json");
    CHECK(scene.bodies.size() == 10);
    auto bodies = bodies_from_scene(scene);
    CHECK(bodies.size() == 10);

    SimConfig cfg;
    cfg.duration = 0.5;
    cfg.dt = 1e-3;
    cfg.stiffness = scene.contact_k;
    cfg.exponent = scene.contact_p;
    cfg.solver = scene.solver;
    const SimResult res = simulate(std::move(bodies), cfg);
    REQUIRE_FALSE(res.blew_up);
    CHECK(res.solver_failures == 0);
    CHECK(res.max_momentum_drift < 1e-6 * res.momentum_scale);
    for (const auto& b : res.final_bodies) {
        CHECK(b.pose.r.allFinite());
        CHECK(b.v_world.allFinite());
    }
}
