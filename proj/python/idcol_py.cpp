#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "idcol/bench.hpp"
#include "idcol/json_io.hpp"
#include "idcol/sensitivity.hpp"

namespace py = pybind11;
using namespace idcol;
using detector::ContactPair;
using detector::Solution;
using detector::SolverConfig;
using detector::Unknowns;
using se3::GeometricJacobian;
using se3::Pose;

namespace {

// Wrapper so the variant caster does not unpack ShapeSpec into its
// alternatives at the boundary.
struct ShapeHandle {
    shapes::ShapeSpec spec;
};

ShapeHandle spec_from_json_str(const std::string& text) {
    return {io::shape_from_json(io::parse_json(text))};
}

SolverConfig config_from_kwargs(double tol, int k_max, int n_attempts,
                                double f_s, const std::string& continuation) {
    SolverConfig cfg;
    cfg.tol = tol;
    cfg.k_max = k_max;
    cfg.n_attempts = n_attempts;
    cfg.f_s = f_s;
    if (continuation == "off")
        cfg.continuation = detector::ContinuationMode::Off;
    else if (continuation == "on")
        cfg.continuation = detector::ContinuationMode::On;
    else
        cfg.continuation = detector::ContinuationMode::Auto;
    return cfg;
}

} // namespace

PYBIND11_MODULE(_idcol, m) {
    m.doc() = "Differentiable narrow-phase collision detection on strictly "
              "convex implicit surfaces";

    py::register_exception<idcol::Error>(m, "IdcolError");

    py::class_<Pose>(m, "Pose")
        .def(py::init<>())
        .def(py::init([](const Eigen::Matrix3d& R, const Eigen::Vector3d& r) {
                 Pose pose{R, r};
                 pose.require_orthonormal();
                 return pose;
             }),
             py::arg("R"), py::arg("r"))
        .def_readwrite("R", &Pose::R)
        .def_readwrite("r", &Pose::r)
        .def("inverse", &Pose::inverse)
        .def("__mul__", &Pose::operator*)
        .def_static("exp", &se3::exp_se3, py::arg("twist"));

    py::class_<ShapeHandle>(m, "ShapeSpec")
        .def_static("from_json", &spec_from_json_str, py::arg("text"),
                    "Build a shape from its JSON description")
        .def("to_json",
             [](const ShapeHandle& s) { return io::shape_to_json(s.spec).dump(); })
        .def("value",
             [](const ShapeHandle& s, const Eigen::Vector3d& y) {
                 return shapes::eval_value(s.spec, y);
             },
             py::arg("y"))
        .def("eval",
             [](const ShapeHandle& s, const Eigen::Vector3d& y) {
                 const auto e = shapes::eval_shape(s.spec, y);
                 return py::make_tuple(e.value, e.gradient, e.hessian);
             },
             py::arg("y"), "phi, grad phi, hess phi at y")
        .def("bounding_radii", [](const ShapeHandle& s, int n_dirs,
                                  double safety) {
                 const auto r = shapes::bounding_radii(s.spec, n_dirs, safety);
                 return py::make_tuple(r.r_in, r.r_out);
             },
             py::arg("n_dirs") = 256, py::arg("safety") = 0.95);

    py::class_<Unknowns>(m, "Unknowns")
        .def_readonly("x", &Unknowns::x)
        .def_readonly("s", &Unknowns::s)
        .def_readonly("lambda1", &Unknowns::lambda1)
        .def_readonly("lambda2", &Unknowns::lambda2)
        .def_property_readonly("alpha", &Unknowns::alpha);

    py::class_<Solution>(m, "Solution")
        .def_readonly("unknowns", &Solution::unknowns)
        .def_readonly("alpha", &Solution::alpha)
        .def_readonly("converged", &Solution::converged)
        .def_readonly("iterations", &Solution::iterations)
        .def_readonly("residual_norm", &Solution::residual_norm);

    py::class_<ContactPair>(m, "ContactPair")
        .def(py::init([](const ShapeHandle& s1, const ShapeHandle& s2,
                         int n_dirs, double safety) {
                 return detector::make_contact_pair(s1.spec, s2.spec, n_dirs,
                                                    safety);
             }),
             py::arg("shape1"), py::arg("shape2"), py::arg("n_dirs") = 256,
             py::arg("safety") = 0.95)
        .def_property_readonly("r_out1",
                               [](const ContactPair& p) { return p.radii1.r_out; })
        .def_property_readonly("r_out2",
                               [](const ContactPair& p) { return p.radii2.r_out; });

    m.def(
        "solve",
        [](const ContactPair& pair, const Pose& pose, double tol, int k_max,
           int n_attempts, double f_s, const std::string& continuation,
           std::optional<Unknowns> warm) {
            return detector::solve(
                pair, pose,
                config_from_kwargs(tol, k_max, n_attempts, f_s, continuation),
                warm);
        },
        py::arg("pair"), py::arg("pose"), py::arg("tol") = 1e-10,
        py::arg("k_max") = 50, py::arg("n_attempts") = 3, py::arg("f_s") = 2.0,
        py::arg("continuation") = "auto", py::arg("warm") = std::nullopt,
        "Minimal uniform scaling factor and contact solution for a pair");

    py::class_<sensitivity::ContactKinematics>(m, "ContactKinematics")
        .def_readonly("p1", &sensitivity::ContactKinematics::p1)
        .def_readonly("p2", &sensitivity::ContactKinematics::p2)
        .def_readonly("gap", &sensitivity::ContactKinematics::gap)
        .def_readonly("normal", &sensitivity::ContactKinematics::normal);

    m.def("contact_kinematics", &sensitivity::contact_kinematics,
          py::arg("solution"), py::arg("pose"), py::arg("pair"));

    m.def(
        "solution_sensitivity",
        [](const Solution& sol, const ContactPair& pair, const Pose& pose,
           std::optional<Eigen::MatrixXd> jacobian) {
            const GeometricJacobian jac =
                jacobian ? GeometricJacobian(*jacobian)
                         : GeometricJacobian::identity();
            return sensitivity::solution_sensitivity(sol, pair, pose, jac)
                .dz_dq;
        },
        py::arg("solution"), py::arg("pair"), py::arg("pose"),
        py::arg("jacobian") = std::nullopt,
        "dz*/dq rows (x, alpha, lambda1, lambda2) via the implicit function "
        "theorem; default Jacobian is the free-body identity");

    m.def(
        "kinematics_sensitivity",
        [](const Solution& sol, const ContactPair& pair, const Pose& pose,
           std::optional<Eigen::MatrixXd> jacobian) {
            const GeometricJacobian jac =
                jacobian ? GeometricJacobian(*jacobian)
                         : GeometricJacobian::identity();
            const auto bundle =
                sensitivity::solution_sensitivity(sol, pair, pose, jac);
            const auto kin = sensitivity::contact_kinematics(sol, pose, pair);
            const auto ks = sensitivity::kinematics_sensitivity(
                bundle, kin, sol, pose, pair, jac);
            py::dict out;
            out["dgap_dq"] = Eigen::MatrixXd(ks.dgap_dq);
            out["dnormal_dq"] = ks.dnormal_dq;
            out["dp1_dq"] = ks.dp1_dq;
            out["dp2_dq"] = ks.dp2_dq;
            return out;
        },
        py::arg("solution"), py::arg("pair"), py::arg("pose"),
        py::arg("jacobian") = std::nullopt);

    m.def(
        "contact_wrench",
        [](const Solution& sol, const ContactPair& pair, const Pose& pose,
           double stiffness, double exponent) {
            const auto kin = sensitivity::contact_kinematics(sol, pose, pair);
            const auto w =
                sensitivity::contact_wrench(kin, sol, pose, stiffness, exponent);
            return py::make_tuple(w.F_c1, w.F_c2, w.fn);
        },
        py::arg("solution"), py::arg("pair"), py::arg("pose"),
        py::arg("stiffness") = 1e4, py::arg("exponent") = 1.5,
        "Penalty wrench pair (F_c1, F_c2, fn), moment-then-force ordering");

    m.def(
        "gradient_audit",
        [](const ContactPair& pair, int n_samples, double fd_step) {
            const auto r = bench::gradient_audit(pair, n_samples, fd_step);
            py::dict out;
            out["dz"] = r.dz;
            out["gap"] = r.gap;
            out["normal"] = r.normal;
            out["p1"] = r.p1;
            out["p2"] = r.p2;
            out["F1"] = r.F1;
            out["F2"] = r.F2;
            out["overall"] = r.overall();
            out["samples"] = r.samples;
            out["wrench_samples"] = r.wrench_samples;
            return out;
        },
        py::arg("pair"), py::arg("n_samples") = 20, py::arg("fd_step") = 1e-6);
}
