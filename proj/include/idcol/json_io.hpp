#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "idcol/detector.hpp"
#include "idcol/sensitivity.hpp"

namespace idcol::io {

using nlohmann::json;

// Parse with line/column diagnostics folded into ParseError.
json parse_json(const std::string& text);
json load_json_file(const std::string& path);

// Shape schema:
//   {"kind": "polytope" | "truncated_cone" | "superellipsoid" |
//            "superelliptic_cylinder",
//    "params": {...family parameters...}, "beta": ..., "n": ..., "eps": ...}
// beta defaults to 20, n to 8; eps defaults to 1e-6 for n > 1 and 0 for
// n = 1. A missing or non-positive r_top is regularized to 1e-3 r_bottom.
shapes::ShapeSpec shape_from_json(const json& j);
json shape_to_json(const shapes::ShapeSpec& spec);

// {"R": [[3x3 row-major]], "r": [x, y, z]}; orthonormality is checked.
se3::Pose pose_from_json(const json& j);
json pose_to_json(const se3::Pose& pose);

// Row-major 6 x n nested array.
se3::GeometricJacobian jacobian_from_json(const json& j);

json matrix_to_json(const Eigen::MatrixXd& m); // row-major nested arrays
json solution_to_json(const detector::Solution& sol);
json kinematics_to_json(const sensitivity::ContactKinematics& kin);

detector::SolverConfig solver_config_from_json(const json& j);

struct SceneBody {
    std::string name;
    std::string shape; // name into Scene::shapes
    se3::Pose pose;
    double mass = 1.0;
    Eigen::Vector3d inertia_diag = Eigen::Vector3d::Constant(0.1);
    se3::Vector6d velocity = se3::Vector6d::Zero(); // body twist [w; v]
};

struct Scene {
    std::vector<std::pair<std::string, shapes::ShapeSpec>> shapes;
    std::vector<SceneBody> bodies;
    double contact_k = 1e4;
    double contact_p = 1.5;
    detector::SolverConfig solver;

    const shapes::ShapeSpec& shape_by_name(const std::string& name) const;
    const SceneBody& body_by_name(const std::string& name) const;
};

Scene scene_from_json(const json& j);
Scene load_scene(const std::string& path);

} // namespace idcol::io
