#include "idcol/json_io.hpp"

#include <fstream>
#include <sstream>

namespace idcol::io {

namespace {

[[noreturn]] void parse_fail(const std::string& msg) { throw ParseError(msg); }

// nlohmann reports a byte offset; convert to line/column for diagnostics.
std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

const json& require(const json& j, const char* field, const char* context) {
    auto it = j.find(field);
    if (it == j.end())
        parse_fail(std::string(context) + ": missing required field '" +
                   field + "'");
    return *it;
}

Eigen::Vector3d vec3_from(const json& j, const char* context) {
    if (!j.is_array() || j.size() != 3)
        parse_fail(std::string(context) + ": expected a 3-array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

} // namespace

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte);
        parse_fail("JSON parse error at line " + std::to_string(line) +
                   ", column " + std::to_string(col) + ": " + e.what());
    }
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) parse_fail("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json(ss.str());
}

shapes::ShapeSpec shape_from_json(const json& j) {
    const std::string kind =
        require(j, "kind", "shape").get<std::string>();
    const json params =
        j.contains("params") ? j.at("params") : json::object();
    const double beta = j.value("beta", 20.0);
    const int n = j.value("n", 8);
    const double eps = j.value("eps", n > 1 ? 1e-6 : 0.0);

    shapes::ShapeSpec spec;
    if (kind == "polytope") {
        shapes::SmoothPolytopeSpec s;
        const json& normals = require(params, "normals", "polytope");
        const json& offsets = require(params, "offsets", "polytope");
        if (!normals.is_array() || !offsets.is_array() ||
            normals.size() != offsets.size())
            parse_fail("polytope: normals/offsets must be arrays of equal length");
        for (std::size_t i = 0; i < normals.size(); ++i) {
            s.normals.push_back(vec3_from(normals[i], "polytope normal"));
            s.offsets.push_back(offsets[i].get<double>());
        }
        s.smax.beta = beta;
        s.char_length = params.value("char_length", 0.0);
        if (s.char_length <= 0.0) s.char_length = default_char_length(s);
        spec = std::move(s);
    } else if (kind == "truncated_cone") {
        shapes::TruncatedConeSpec s;
        s.r_bottom = require(params, "r_bottom", "truncated_cone").get<double>();
        s.r_top = params.value("r_top", 0.0);
        if (s.r_top <= 0.0) s.r_top = 1e-3 * s.r_bottom; // true-cone regularization
        s.ext_below = require(params, "ext_below", "truncated_cone").get<double>();
        s.ext_above = require(params, "ext_above", "truncated_cone").get<double>();
        s.smax.beta = beta;
        spec = s;
    } else if (kind == "superellipsoid") {
        shapes::SuperellipsoidSpec s;
        s.semi_axes = vec3_from(require(params, "semi_axes", "superellipsoid"),
                                "superellipsoid semi_axes");
        s.exponent = n;
        s.reg_eps = eps;
        spec = s;
    } else if (kind == "superelliptic_cylinder") {
        shapes::SuperellipticCylinderSpec s;
        s.radius =
            require(params, "radius", "superelliptic_cylinder").get<double>();
        s.half_length =
            require(params, "half_length", "superelliptic_cylinder").get<double>();
        s.exponent = n;
        s.reg_eps = eps;
        spec = s;
    } else {
        parse_fail("unknown shape kind '" + kind + "'");
    }

    try {
        shapes::validate(spec);
    } catch (const Error& e) {
        parse_fail(std::string("invalid shape: ") + e.what());
    }
    return spec;
}

json shape_to_json(const shapes::ShapeSpec& spec) {
    json j;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            json params;
            if constexpr (std::is_same_v<T, shapes::SmoothPolytopeSpec>) {
                j["kind"] = "polytope";
                json normals = json::array(), offsets = json::array();
                for (std::size_t i = 0; i < s.normals.size(); ++i) {
                    normals.push_back(vec_to_json(s.normals[i]));
                    offsets.push_back(s.offsets[i]);
                }
                params["normals"] = normals;
                params["offsets"] = offsets;
                params["char_length"] = s.char_length;
                j["beta"] = s.smax.beta;
            } else if constexpr (std::is_same_v<T, shapes::TruncatedConeSpec>) {
                j["kind"] = "truncated_cone";
                params["r_bottom"] = s.r_bottom;
                params["r_top"] = s.r_top;
                params["ext_below"] = s.ext_below;
                params["ext_above"] = s.ext_above;
                j["beta"] = s.smax.beta;
            } else if constexpr (std::is_same_v<T, shapes::SuperellipsoidSpec>) {
                j["kind"] = "superellipsoid";
                params["semi_axes"] = vec_to_json(s.semi_axes);
                j["n"] = s.exponent;
                j["eps"] = s.reg_eps;
            } else {
                j["kind"] = "superelliptic_cylinder";
                params["radius"] = s.radius;
                params["half_length"] = s.half_length;
                j["n"] = s.exponent;
                j["eps"] = s.reg_eps;
            }
            j["params"] = params;
        },
        spec);
    return j;
}

se3::Pose pose_from_json(const json& j) {
    se3::Pose pose;
    const json& Rj = require(j, "R", "pose");
    if (!Rj.is_array() || Rj.size() != 3)
        parse_fail("pose: R must be a 3x3 nested array");
    for (int r = 0; r < 3; ++r) {
        if (!Rj[r].is_array() || Rj[r].size() != 3)
            parse_fail("pose: R must be a 3x3 nested array");
        for (int c = 0; c < 3; ++c) pose.R(r, c) = Rj[r][c].get<double>();
    }
    pose.r = vec3_from(require(j, "r", "pose"), "pose r");
    try {
        pose.require_orthonormal();
    } catch (const Error& e) {
        parse_fail(e.what());
    }
    return pose;
}

json pose_to_json(const se3::Pose& pose) {
    json Rj = json::array();
    for (int r = 0; r < 3; ++r) {
        json row = json::array();
        for (int c = 0; c < 3; ++c) row.push_back(pose.R(r, c));
        Rj.push_back(row);
    }
    return json{{"R", Rj}, {"r", vec_to_json(pose.r)}};
}

se3::GeometricJacobian jacobian_from_json(const json& j) {
    if (!j.is_array() || j.size() != 6)
        parse_fail("jacobian: expected 6 rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) parse_fail("jacobian: rows must be non-empty arrays");
    Eigen::MatrixXd m(6, static_cast<Eigen::Index>(cols));
    for (int r = 0; r < 6; ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            parse_fail("jacobian: ragged rows");
        for (std::size_t c = 0; c < cols; ++c)
            m(r, static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
    return se3::GeometricJacobian(m);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

json solution_to_json(const detector::Solution& sol) {
    return json{{"x", vec_to_json(sol.unknowns.x)},
                {"alpha", sol.alpha},
                {"lambda1", sol.unknowns.lambda1},
                {"lambda2", sol.unknowns.lambda2},
                {"converged", sol.converged},
                {"iterations", sol.iterations},
                {"residual_norm", sol.residual_norm}};
}

json kinematics_to_json(const sensitivity::ContactKinematics& kin) {
    return json{{"p1", vec_to_json(kin.p1)},
                {"p2", vec_to_json(kin.p2)},
                {"gap", kin.gap},
                {"normal", vec_to_json(kin.normal)}};
}

detector::SolverConfig solver_config_from_json(const json& j) {
    detector::SolverConfig cfg;
    cfg.tol = j.value("tol", cfg.tol);
    cfg.k_max = j.value("k_max", cfg.k_max);
    cfg.n_attempts = j.value("n_attempts", cfg.n_attempts);
    cfg.f_s = j.value("f_s", cfg.f_s);
    cfg.lm_damping = j.value("lm_damping", cfg.lm_damping);
    cfg.max_ds = j.value("max_ds", cfg.max_ds);
    cfg.max_dx_factor = j.value("max_dx_factor", cfg.max_dx_factor);
    if (j.contains("armijo")) {
        const json& a = j.at("armijo");
        cfg.armijo.c1 = a.value("c1", cfg.armijo.c1);
        cfg.armijo.shrink = a.value("shrink", cfg.armijo.shrink);
        cfg.armijo.max_backtracks =
            a.value("max_backtracks", cfg.armijo.max_backtracks);
    }
    const std::string cont = j.value("continuation", "auto");
    if (cont == "auto")
        cfg.continuation = detector::ContinuationMode::Auto;
    else if (cont == "off")
        cfg.continuation = detector::ContinuationMode::Off;
    else if (cont == "on")
        cfg.continuation = detector::ContinuationMode::On;
    else
        parse_fail("solver.continuation must be one of auto/off/on");
    return cfg;
}

const shapes::ShapeSpec& Scene::shape_by_name(const std::string& name) const {
    for (const auto& [n, s] : shapes)
        if (n == name) return s;
    throw ParseError("scene: unknown shape '" + name + "'");
}

const SceneBody& Scene::body_by_name(const std::string& name) const {
    for (const auto& b : bodies)
        if (b.name == name) return b;
    throw ParseError("scene: unknown body '" + name + "'");
}

Scene scene_from_json(const json& j) {
    Scene scene;
    for (const json& sj : require(j, "shapes", "scene")) {
        const std::string name = require(sj, "name", "shape").get<std::string>();
        for (const auto& [existing, unused] : scene.shapes)
            if (existing == name)
                parse_fail("scene: duplicate shape name '" + name + "'");
        scene.shapes.emplace_back(name, shape_from_json(sj));
    }
    if (j.contains("bodies")) {
        for (const json& bj : j.at("bodies")) {
            SceneBody body;
            body.name = require(bj, "name", "body").get<std::string>();
            body.shape = require(bj, "shape", "body").get<std::string>();
            scene.shape_by_name(body.shape); // existence check
            if (bj.contains("pose")) body.pose = pose_from_json(bj.at("pose"));
            body.mass = bj.value("mass", 1.0);
            if (bj.contains("inertia"))
                body.inertia_diag = vec3_from(bj.at("inertia"), "body inertia");
            if (bj.contains("velocity")) {
                const json& v = bj.at("velocity");
                if (!v.is_array() || v.size() != 6)
                    parse_fail("body velocity: expected a 6-array twist [w; v]");
                for (int i = 0; i < 6; ++i) body.velocity[i] = v[i].get<double>();
            }
            scene.bodies.push_back(std::move(body));
        }
    }
    if (j.contains("contact")) {
        scene.contact_k = j.at("contact").value("k", scene.contact_k);
        scene.contact_p = j.at("contact").value("p", scene.contact_p);
    }
    if (j.contains("solver"))
        scene.solver = solver_config_from_json(j.at("solver"));
    return scene;
}

Scene load_scene(const std::string& path) {
    return scene_from_json(load_json_file(path));
}

} // namespace idcol::io
