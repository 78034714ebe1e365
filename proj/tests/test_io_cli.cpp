#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "idcol/json_io.hpp"
#include "support/oracles.hpp"

using namespace idcol;
using io::json;

#ifndef IDCOL_CLI_PATH
#define IDCOL_CLI_PATH "idcol"
#endif
#ifndef IDCOL_SCENE_DIR
#define IDCOL_SCENE_DIR "."
#endif

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string out_path = "/tmp/idcol_test_out.txt";
    const std::string cmd = std::string(IDCOL_CLI_PATH) + " " + args + " > " +
                            out_path + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_path);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

std::string scene(const std::string& name) {
    return std::string(IDCOL_SCENE_DIR) + "/" + name;
}

} // namespace

TEST_CASE("shape JSON round trip across all families") {
    for (const auto& spec : oracles::benchmark_families()) {
        const json j = io::shape_to_json(spec);
        const shapes::ShapeSpec back = io::shape_from_json(j);
        // same phi on a probe set
        std::mt19937 rng(211);
        for (int i = 0; i < 50; ++i) {
            const Eigen::Vector3d y = 1.3 * oracles::random_unit(rng);
            CHECK(shapes::eval_value(spec, y) ==
                  doctest::Approx(shapes::eval_value(back, y)).epsilon(1e-14));
        }
    }
}

TEST_CASE("shape JSON error reporting") {
    SUBCASE("missing field is named") {
        try {
            io::shape_from_json(io::parse_json(
                R"({"kind": "superellipsoid", "params": {}})"));
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("semi_axes") != std::string::npos);
        }
    }
    SUBCASE("malformed JSON carries line/column diagnostics") {
        try {
            io::parse_json("{\n  \"kind\": \"polytope\",\n  oops\n}");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("line 3") != std::string::npos);
        }
    }
    SUBCASE("true cone regularization at ingestion") {
        const auto spec = io::shape_from_json(io::parse_json(
            R"({"kind": "truncated_cone",
                "params": {"r_bottom": 2.0, "r_top": 0.0,
                           "ext_below": 1.0, "ext_above": 1.0}})"));
        const auto& cone = std::get<shapes::TruncatedConeSpec>(spec);
        CHECK(cone.r_top == doctest::Approx(2e-3));
    }
}

TEST_CASE("pose and jacobian JSON") {
    const json j = io::parse_json(
        R"({"R": [[0,-1,0],[1,0,0],[0,0,1]], "r": [1.0, 2.0, 3.0]})");
    const se3::Pose pose = io::pose_from_json(j);
    CHECK(pose.r == Eigen::Vector3d(1, 2, 3));
    CHECK_NOTHROW(pose.require_orthonormal());
    const json back = io::pose_to_json(pose);
    CHECK((io::pose_from_json(back).R - pose.R).norm() == 0.0);

    CHECK_THROWS_AS(io::pose_from_json(io::parse_json(
                        R"({"R": [[1,0,0],[0,1,0],[0,0,1.2]], "r": [0,0,0]})")),
                    ParseError);

    const json jac = io::parse_json(
        R"([[1,0],[0,0],[0,0],[0,0],[0,1],[0,0]])");
    CHECK(io::jacobian_from_json(jac).dofs() == 2);
    CHECK_THROWS_AS(io::jacobian_from_json(io::parse_json("[[1,2],[3,4]]")),
                    ParseError);
}

TEST_CASE("scene parsing") {
    const io::Scene scene = io::load_scene(::scene("spheres.json"));
    CHECK(scene.shapes.size() == 1);
    CHECK(scene.bodies.size() == 2);
    CHECK(scene.contact_k == doctest::Approx(1e4));
    CHECK_THROWS_AS(scene.shape_by_name("nope"), ParseError);
    CHECK(scene.body_by_name("B").pose.r.x() == doctest::Approx(3.0));
}

TEST_CASE("cli query") {
    SUBCASE("sphere scene: alpha 1.5, gap 1.0") {
        const RunResult r = run_cli("query --scene " + scene("spheres.json") +
                                    " --pair A,B");
        REQUIRE(r.exit_code == 0);
        const json out = io::parse_json(r.out);
        CHECK(out["solution"]["alpha"].get<double>() ==
              doctest::Approx(1.5).epsilon(1e-8));
        CHECK(out["kinematics"]["gap"].get<double>() ==
              doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("--grad emits the Euclidean distance gradient row") {
        const RunResult r = run_cli("query --scene " + scene("spheres.json") +
                                    " --pair A,B --grad");
        REQUIRE(r.exit_code == 0);
        const json out = io::parse_json(r.out);
        const auto row = out["sensitivities"]["dgap_dq"][0];
        // q ordering [w; v]; translation block starts at column 3
        CHECK(row[3].get<double>() == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(std::abs(row[4].get<double>()) < 1e-9);
        CHECK(std::abs(row[0].get<double>()) < 1e-9);
    }
    SUBCASE("malformed scene exits 2") {
        const std::string bad = "/tmp/idcol_bad_scene.json";
        std::ofstream(bad) << "{ not json";
        CHECK(run_cli("query --scene " + bad + " --pair A,B").exit_code == 2);
    }
    SUBCASE("pose override") {
        const RunResult r =
            run_cli("query --scene " + scene("spheres.json") +
                    " --pair A,B --pose "
                    "'{\"R\": [[1,0,0],[0,1,0],[0,0,1]], \"r\": [1.5,0,0]}'");
        REQUIRE(r.exit_code == 0);
        CHECK(io::parse_json(r.out)["solution"]["alpha"].get<double>() ==
              doctest::Approx(0.75).epsilon(1e-8));
    }
}

TEST_CASE("cli sweep") {
    SUBCASE("sphere pair converges everywhere; csv and summary written") {
        const RunResult r =
            run_cli("sweep --scene " + scene("spheres.json") +
                    " --pair A,B --n 1000 --cold --out /tmp/idcol_sweep");
        REQUIRE(r.exit_code == 0);
        const json summary = io::parse_json(r.out);
        CHECK(summary["cold"]["convergence_rate"].get<double>() == 1.0);
        std::ifstream csv("/tmp/idcol_sweep.cold.csv");
        REQUIRE(csv.good());
        std::string header;
        std::getline(csv, header);
        CHECK(header == "pose_index,alpha,converged,iterations,runtime_ns,gap");
        int lines = 0;
        for (std::string line; std::getline(csv, line);) ++lines;
        CHECK(lines == 1000);
    }
    SUBCASE("warm and cold together emit a speedup field") {
        const RunResult r =
            run_cli("sweep --scene " + scene("spheres.json") +
                    " --pair A,B --n 2000 --out /tmp/idcol_sweep2");
        REQUIRE(r.exit_code == 0);
        const json summary = io::parse_json(r.out);
        CHECK(summary.contains("speedup"));
        CHECK(summary["speedup"].get<double>() > 0.0);
    }
    SUBCASE("unwritable output path exits 4") {
        const RunResult r =
            run_cli("sweep --scene " + scene("spheres.json") +
                    " --pair A,B --n 10 --cold --out /nonexistent_dir/x");
        CHECK(r.exit_code == 4);
    }
}

TEST_CASE("cli shape-info") {
    const std::string path = "/tmp/idcol_shape.json";
    std::ofstream(path) << io::shape_to_json(oracles::unit_sphere()).dump();
    const RunResult r = run_cli("shape-info " + path);
    REQUIRE(r.exit_code == 0);
    const json out = io::parse_json(r.out);
    CHECK(out["r_in"].get<double>() == doctest::Approx(0.95).epsilon(1e-6));
    CHECK(out["r_out"].get<double>() == doctest::Approx(1.0 / 0.95).epsilon(1e-6));

    SUBCASE("point cloud stays inside the exact cube (smax dominance)") {
        std::ofstream(path) << io::shape_to_json(oracles::poly_cube()).dump();
        const RunResult rc =
            run_cli("shape-info " + path + " --obj /tmp/idcol_cube.obj");
        REQUIRE(rc.exit_code == 0);
        std::ifstream obj("/tmp/idcol_cube.obj");
        REQUIRE(obj.good());
        std::string tag;
        double x, y, z;
        int count = 0;
        while (obj >> tag >> x >> y >> z) {
            REQUIRE(tag == "v");
            CHECK(std::max({std::abs(x), std::abs(y), std::abs(z)}) <=
                  0.5 + 1e-9);
            ++count;
        }
        CHECK(count > 1000);
    }
    SUBCASE("missing required parameter names the field and exits 2") {
        std::ofstream(path) << R"({"kind": "superelliptic_cylinder",
                                   "params": {"radius": 1.0}})";
        const RunResult re = run_cli("shape-info " + path);
        CHECK(re.exit_code == 2);
    }
}

TEST_CASE("cli audit and demo smoke") {
    SUBCASE("audit reports small errors for the sphere pair") {
        const RunResult r = run_cli("audit --scene " + scene("spheres.json") +
                                    " --pair A,B --n 5");
        REQUIRE(r.exit_code == 0);
        CHECK(io::parse_json(r.out)["overall"].get<double>() < 1e-6);
    }
    SUBCASE("two-sphere demo conserves momentum") {
        const RunResult r =
            run_cli("demo --scene " + scene("head_on.json") +
                    " --duration 2.0 --dt 0.001 --out /tmp/idcol_demo");
        REQUIRE(r.exit_code == 0);
        const json final_state =
            io::load_json_file("/tmp/idcol_demo.json");
        CHECK(final_state["blew_up"].get<bool>() == false);
        CHECK(final_state["max_momentum_drift"].get<double>() <
              1e-6 * final_state["momentum_scale"].get<double>());
        std::ifstream csv("/tmp/idcol_demo.csv");
        REQUIRE(csv.good());
        std::string header;
        std::getline(csv, header);
        CHECK(header.rfind("t,body,r_x", 0) == 0);
    }
}
