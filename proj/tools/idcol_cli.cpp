#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "idcol/bench.hpp"
#include "idcol/json_io.hpp"
#include "idcol/multibody.hpp"
#include "idcol/sensitivity.hpp"

namespace {

using namespace idcol;
using io::json;

enum class LogLevel { Off = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("IDCOL_LOG");
        if (!env) return LogLevel::Off;
        const std::string v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "info") return LogLevel::Info;
        return LogLevel::Off;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[idcol] " << msg << "\n";
}

constexpr int kExitParse = 2;
constexpr int kExitNoConverge = 3;
constexpr int kExitIo = 4;
constexpr int kExitBlowup = 5;

struct CliError {
    int code;
    std::string message;
};

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Resolve a --pair A,B entry against scene shapes, falling back to bodies.
const shapes::ShapeSpec& resolve_shape(const io::Scene& scene,
                                       const std::string& name) {
    for (const auto& [n, s] : scene.shapes)
        if (n == name) return s;
    return scene.shape_by_name(scene.body_by_name(name).shape);
}

std::pair<std::string, std::string> split_pair(const std::string& pair) {
    const auto comma = pair.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == pair.size())
        throw CliError{kExitParse, "--pair expects two names: A,B"};
    return {pair.substr(0, comma), pair.substr(comma + 1)};
}

detector::ContactPair pair_from_scene(const io::Scene& scene,
                                      const std::string& pair_arg) {
    const auto [a, b] = split_pair(pair_arg);
    return detector::make_contact_pair(resolve_shape(scene, a),
                                       resolve_shape(scene, b));
}

// ---------------------------------------------------------------------------
// query
// ---------------------------------------------------------------------------

int cmd_query(const std::string& scene_path, const std::string& pair_arg,
              const std::string& pose_json, bool grad,
              const std::string& jacobian_path) {
    const io::Scene scene = io::load_scene(scene_path);
    const auto [name_a, name_b] = split_pair(pair_arg);

    se3::Pose pose;
    if (!pose_json.empty()) {
        pose = io::pose_from_json(io::parse_json(pose_json));
    } else {
        const auto& body_a = scene.body_by_name(name_a);
        const auto& body_b = scene.body_by_name(name_b);
        pose = body_a.pose.inverse() * body_b.pose;
    }

    detector::ContactPair pair = pair_from_scene(scene, pair_arg);
    const detector::Solution sol = detector::solve(pair, pose, scene.solver);
    log_info("query solved: alpha=" + fmt17(sol.alpha) +
             " iters=" + std::to_string(sol.iterations));

    json out;
    out["solution"] = io::solution_to_json(sol);
    if (sol.converged) {
        const auto kin = sensitivity::contact_kinematics(sol, pose, pair);
        out["kinematics"] = io::kinematics_to_json(kin);
        if (grad) {
            se3::GeometricJacobian jac = se3::GeometricJacobian::identity();
            if (!jacobian_path.empty())
                jac = io::jacobian_from_json(io::load_json_file(jacobian_path));
            const auto bundle =
                sensitivity::solution_sensitivity(sol, pair, pose, jac);
            const auto ks = sensitivity::kinematics_sensitivity(
                bundle, kin, sol, pose, pair, jac);
            const auto wrench = sensitivity::contact_wrench(
                kin, sol, pose, scene.contact_k, scene.contact_p);
            const auto ws = sensitivity::wrench_sensitivity(
                wrench, ks, kin, bundle, sol, pose, pair, jac, scene.contact_k,
                scene.contact_p);
            json g;
            g["dz_dq"] = io::matrix_to_json(bundle.dz_dq);
            g["dgap_dq"] = io::matrix_to_json(ks.dgap_dq);
            g["dnormal_dq"] = io::matrix_to_json(ks.dnormal_dq);
            g["dp1_dq"] = io::matrix_to_json(ks.dp1_dq);
            g["dp2_dq"] = io::matrix_to_json(ks.dp2_dq);
            g["dF1_dq"] = io::matrix_to_json(ws.dF1_dq);
            g["dF2_dq"] = io::matrix_to_json(ws.dF2_dq);
            out["sensitivities"] = g;
        }
    }
    std::cout << out.dump(2) << "\n";
    return sol.converged ? 0 : kExitNoConverge;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

void write_sweep_csv(const bench::SweepReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw CliError{kExitIo, "cannot open output file: " + path};
    out << "pose_index,alpha,converged,iterations,runtime_ns,gap\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& row = report.rows[i];
        out << i << ',' << fmt17(row.alpha) << ',' << (row.converged ? 1 : 0)
            << ',' << row.iterations << ',' << row.runtime_ns << ','
            << fmt17(row.gap) << "\n";
    }
    if (!out.good()) throw CliError{kExitIo, "write failed: " + path};
}

json sweep_summary(const bench::SweepReport& r, std::int64_t n) {
    json s;
    s["n_poses"] = n;
    s["n_converged"] = r.n_converged;
    s["n_failed"] = r.n_failed;
    s["convergence_rate"] =
        n > 0 ? static_cast<double>(r.n_converged) / static_cast<double>(n) : 0.0;
    s["runtime_mean_ns"] = r.runtime_mean_ns;
    s["runtime_median_ns"] = r.runtime_median_ns;
    s["runtime_p99_ns"] = r.runtime_p99_ns;
    s["iterations_mean"] = r.iterations_mean;
    s["iterations_max"] = r.iterations_max;
    s["alpha_min"] = r.alpha_min;
    s["alpha_max"] = r.alpha_max;
    json failures = json::array();
    for (std::size_t i = 0; i < r.failure_poses.size() && i < 100; ++i)
        failures.push_back(r.failure_poses[i]);
    s["failure_poses"] = failures;
    return s;
}

int cmd_sweep(const std::string& scene_path, const std::string& pair_arg,
              std::int64_t n, bool warm, bool cold, const std::string& out_base,
              int jobs) {
    const io::Scene scene = io::load_scene(scene_path);
    detector::ContactPair pair = pair_from_scene(scene, pair_arg);
    bench::SweepSpec spec(std::move(pair));
    spec.n_poses = n;

    const bool both = warm == cold; // neither or both flags: run both modes
    json summary;
    std::optional<double> warm_mean, cold_mean;

    if (both || cold) {
        spec.warm_start = false;
        const auto report = run_sweep(spec, scene.solver, jobs);
        write_sweep_csv(report, out_base + ".cold.csv");
        summary["cold"] = sweep_summary(report, n);
        cold_mean = report.runtime_mean_ns;
        log_info("cold sweep: " + std::to_string(report.n_converged) + "/" +
                 std::to_string(n) + " converged");
    }
    if (both || warm) {
        spec.warm_start = true;
        const auto report = run_sweep(spec, scene.solver, 1);
        write_sweep_csv(report, out_base + ".warm.csv");
        summary["warm"] = sweep_summary(report, n);
        warm_mean = report.runtime_mean_ns;
        log_info("warm sweep: " + std::to_string(report.n_converged) + "/" +
                 std::to_string(n) + " converged");
    }
    if (warm_mean && cold_mean && *warm_mean > 0.0)
        summary["speedup"] = *cold_mean / *warm_mean;

    std::ofstream out(out_base + ".json");
    if (!out) throw CliError{kExitIo, "cannot open output file: " + out_base + ".json"};
    out << summary.dump(2) << "\n";
    if (!out.good()) throw CliError{kExitIo, "write failed"};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

int cmd_audit(const std::string& scene_path, const std::string& pair_arg,
              int n_samples, double fd_step) {
    const io::Scene scene = io::load_scene(scene_path);
    detector::ContactPair pair = pair_from_scene(scene, pair_arg);
    const auto report =
        bench::gradient_audit(pair, n_samples, fd_step, scene.solver);
    json out;
    out["dz"] = report.dz;
    out["gap"] = report.gap;
    out["normal"] = report.normal;
    out["p1"] = report.p1;
    out["p2"] = report.p2;
    out["F1"] = report.F1;
    out["F2"] = report.F2;
    out["overall"] = report.overall();
    out["samples"] = report.samples;
    out["wrench_samples"] = report.wrench_samples;
    std::cout << out.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

int cmd_demo(const std::string& scene_path, double duration, double dt,
             const std::string& out_base) {
    const io::Scene scene = io::load_scene(scene_path);
    if (scene.bodies.empty())
        throw CliError{kExitParse, "demo scene has no bodies"};

    multibody::SimConfig config;
    config.duration = duration;
    config.dt = dt;
    config.stiffness = scene.contact_k;
    config.exponent = scene.contact_p;
    config.solver = scene.solver;

    auto bodies = multibody::bodies_from_scene(scene);
    const auto result = multibody::simulate(std::move(bodies), config);
    log_info("demo: failures=" + std::to_string(result.solver_failures) +
             " momentum drift=" + fmt17(result.max_momentum_drift));

    {
        std::ofstream csv(out_base + ".csv");
        if (!csv) throw CliError{kExitIo, "cannot open output file"};
        csv << "t,body,r_x,r_y,r_z,R_00,R_01,R_02,R_10,R_11,R_12,R_20,R_21,R_22,"
               "w_x,w_y,w_z,v_x,v_y,v_z,contacts\n";
        for (const auto& row : result.trajectory) {
            csv << fmt17(row.t) << ',' << row.body;
            for (int i = 0; i < 3; ++i) csv << ',' << fmt17(row.pose.r[i]);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) csv << ',' << fmt17(row.pose.R(r, c));
            for (int i = 0; i < 6; ++i) csv << ',' << fmt17(row.twist[i]);
            csv << ',' << row.contacts << "\n";
        }
        if (!csv.good()) throw CliError{kExitIo, "write failed"};
    }

    json final_state;
    final_state["blew_up"] = result.blew_up;
    final_state["solver_failures"] = result.solver_failures;
    final_state["initial_kinetic"] = result.initial_kinetic;
    final_state["final_kinetic"] = result.final_kinetic;
    final_state["max_momentum_drift"] = result.max_momentum_drift;
    final_state["momentum_scale"] = result.momentum_scale;
    json bodies_json = json::array();
    for (const auto& b : result.final_bodies) {
        json bj;
        bj["name"] = b.name;
        bj["pose"] = io::pose_to_json(b.pose);
        json twist = json::array();
        for (int i = 0; i < 3; ++i) twist.push_back(b.w_body[i]);
        const Eigen::Vector3d v_b = b.pose.R.transpose() * b.v_world;
        for (int i = 0; i < 3; ++i) twist.push_back(v_b[i]);
        bj["twist"] = twist;
        bodies_json.push_back(bj);
    }
    final_state["bodies"] = bodies_json;

    std::ofstream out(out_base + ".json");
    if (!out) throw CliError{kExitIo, "cannot open output file"};
    out << final_state.dump(2) << "\n";
    if (!out.good()) throw CliError{kExitIo, "write failed"};

    return result.blew_up ? kExitBlowup : 0;
}

// ---------------------------------------------------------------------------
// shape-info
// ---------------------------------------------------------------------------

int cmd_shape_info(const std::string& shape_path, const std::string& obj_path) {
    const auto spec = io::shape_from_json(io::load_json_file(shape_path));
    const auto radii = shapes::bounding_radii(spec);
    json out;
    out["r_in"] = radii.r_in;
    out["r_out"] = radii.r_out;
    std::cout << out.dump(2) << "\n";

    if (!obj_path.empty()) {
        std::ofstream obj(obj_path);
        if (!obj) throw CliError{kExitIo, "cannot open output file: " + obj_path};
        // golden-angle spiral of surface points, dense enough for plotting
        const int n = 2048;
        const double golden = M_PI * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < n; ++i) {
            const double z = 1.0 - (2.0 * i + 1.0) / n;
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            const Eigen::Vector3d d(rho * std::cos(golden * i),
                                    rho * std::sin(golden * i), z);
            const double t = shapes::ray_root(spec, d);
            obj << "v " << fmt17(t * d.x()) << ' ' << fmt17(t * d.y()) << ' '
                << fmt17(t * d.z()) << "\n";
        }
        if (!obj.good()) throw CliError{kExitIo, "write failed: " + obj_path};
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"idcol: differentiable narrow-phase collision detection"};
    app.require_subcommand(1);

    std::string scene_path, pair_arg, pose_json, jacobian_path, out_base;
    std::string shape_path, obj_path;
    bool grad = false, warm = false, cold = false;
    std::int64_t n = 1000;
    int n_samples = 20, jobs = 1;
    double fd_step = 1e-6, duration = 1.0, dt = 1e-3;

    auto* query = app.add_subcommand("query", "single contact query");
    query->add_option("--scene", scene_path, "scene JSON file")->required();
    query->add_option("--pair", pair_arg, "body or shape names A,B")->required();
    query->add_option("--pose", pose_json, "relative pose JSON (overrides scene)");
    query->add_flag("--grad", grad, "emit analytical derivatives");
    query->add_option("--jacobian", jacobian_path,
                      "geometric Jacobian JSON file (default: identity 6x6)");

    auto* sweep = app.add_subcommand("sweep", "deterministic ergodic SE(3) sweep");
    sweep->add_option("--scene", scene_path)->required();
    sweep->add_option("--pair", pair_arg)->required();
    sweep->add_option("--n", n, "number of poses");
    sweep->add_flag("--warm", warm, "warm-started sweep only");
    sweep->add_flag("--cold", cold, "cold-started sweep only");
    sweep->add_option("--out", out_base, "output base path")->required();
    sweep->add_option("--jobs", jobs, "workers for cold sweeps");

    auto* audit = app.add_subcommand("audit", "gradient audit against FD re-solves");
    audit->add_option("--scene", scene_path)->required();
    audit->add_option("--pair", pair_arg)->required();
    audit->add_option("--n", n_samples, "number of samples");
    audit->add_option("--fd-step", fd_step, "central difference step");

    auto* demo = app.add_subcommand("demo", "rigid multibody penalty demo");
    demo->add_option("--scene", scene_path)->required();
    demo->add_option("--duration", duration, "simulated seconds");
    demo->add_option("--dt", dt, "time step");
    demo->add_option("--out", out_base, "output base path")->required();

    auto* info = app.add_subcommand("shape-info", "bounding radii and point cloud");
    info->add_option("shape", shape_path, "shape JSON file")->required();
    info->add_option("--obj", obj_path, "write ray-sampled surface points (OBJ)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(query))
            return cmd_query(scene_path, pair_arg, pose_json, grad, jacobian_path);
        if (app.got_subcommand(sweep))
            return cmd_sweep(scene_path, pair_arg, n, warm, cold, out_base, jobs);
        if (app.got_subcommand(audit))
            return cmd_audit(scene_path, pair_arg, n_samples, fd_step);
        if (app.got_subcommand(demo))
            return cmd_demo(scene_path, duration, dt, out_base);
        if (app.got_subcommand(info))
            return cmd_shape_info(shape_path, obj_path);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const idcol::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const idcol::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }
    return 0;
}
