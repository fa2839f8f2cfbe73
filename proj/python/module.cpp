#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pcaplab/curvature.hpp"
#include "pcaplab/errors.hpp"
#include "pcaplab/experiment.hpp"
#include "pcaplab/hull.hpp"
#include "pcaplab/inequality.hpp"
#include "pcaplab/marching.hpp"
#include "pcaplab/quantities.hpp"
#include "pcaplab/radial.hpp"

namespace py = pybind11;
using namespace pcaplab;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

ImplicitDomain shape(const std::string& tag, const std::map<std::string, double>& params) {
    return make_shape(parse_shape_tag(tag), params);
}

py::object solve(const std::string& tag, const std::map<std::string, double>& params, double p, double h, double R_out) {
    const ImplicitDomain d = shape(tag, params);
    SolveOptions o;
    o.p = p;
    o.h = h;
    o.R_out = R_out;
    PotentialField F;
    {
        py::gil_scoped_release release;
        F = solve_exterior(d, o);
    }
    SurfaceMesh mesh = extract_boundary_mesh(d, std::min(h, d.info().feature_size / 8.0));
    mesh_curvatures(mesh);
    const auto bg = boundary_gradient(F, mesh);
    nlohmann::json out = to_json(capacity_report(F, mesh, bg));
    out["energy"] = F.energy;
    out["warnings"] = F.warnings;
    return to_python(out);
}

py::object surface(const std::string& tag, const std::map<std::string, double>& params, double h) {
    const ImplicitDomain d = shape(tag, params);
    SurfaceMesh mesh = extract_boundary_mesh(d, h);
    mesh_curvatures(mesh);
    const auto gb = gauss_bonnet_check(mesh);
    std::vector<InequalityReport> reports{willmore_topology_check(mesh), volumetric_minkowski_report(mesh, domain_volume(d, h), 3)};
    const auto gate = convexity_gate(mesh);
    reports.push_back(outward_minimising_minkowski_report(mesh, gate, 3));
    reports.push_back(nearly_umbilical_report(mesh, gate));
    return to_python({{"area", total_area(mesh)},
                      {"vertices", mesh.vertex_count()},
                      {"euler_characteristic", euler_characteristic(mesh)},
                      {"gauss_bonnet_integral", gb.integral},
                      {"reports", to_json(reports)}});
}

py::object hull(const std::string& tag, const std::map<std::string, double>& params, double h) {
    const ImplicitDomain d = shape(tag, params);
    HullOptions o;
    o.h = h;
    HullField F;
    {
        py::gil_scoped_release release;
        F = minimise_tv_obstacle(d, o);
    }
    return to_python(to_json(F));
}

py::object run(const std::string& config_text) {
    const ExperimentConfig c = parse_config(config_text);
    RunManifest m;
    {
        py::gil_scoped_release release;
        m = run_experiment(c);
    }
    return to_python(to_json(m));
}

}  // namespace

PYBIND11_MODULE(pcaplab, m) {
    m.doc() = "p-capacitary potentials, outward minimising hulls and geometric inequalities";

    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    py::register_exception<NonConvergence>(m, "NonConvergence", PyExc_RuntimeError);
    py::register_exception<MeshError>(m, "MeshError", PyExc_RuntimeError);

    m.def("sphere_area", &sphere_area, py::arg("n"));
    m.def("ball_volume", &ball_volume, py::arg("n"));
    m.def("talenti_constant", &talenti_constant, py::arg("n"), py::arg("p"));
    m.def("up_limit_zero", &up_limit_zero, py::arg("C"), py::arg("p"), py::arg("n") = 3);
    m.def(
        "radial_capacity",
        [](double R, double p, int n) { return radial_potential(R, p, n).capacity(); }, py::arg("R"), py::arg("p"),
        py::arg("n") = 3);
    m.def(
        "kato_radial",
        [](double R, double p, int n, double r) { return to_python(to_json(kato_residual_radial(radial_potential(R, p, n), r))); },
        py::arg("R"), py::arg("p"), py::arg("n"), py::arg("r"));
    m.def("convex_hull_perimeter", &convex_hull_2d_oracle, py::arg("polygon"));
    m.def("known_checks", &known_checks);
    m.def(
        "shape_info",
        [](const std::string& tag, const std::map<std::string, double>& params) {
            const auto& i = shape(tag, params).info();
            return to_python({{"dimension", i.dimension},
                              {"feature_size", i.feature_size},
                              {"circumradius", i.circumradius},
                              {"inradius", i.inradius}});
        },
        py::arg("tag"), py::arg("params") = std::map<std::string, double>{});
    m.def("solve", &solve, py::arg("tag"), py::arg("params") = std::map<std::string, double>{}, py::arg("p") = 1.5,
          py::arg("h") = 1.0 / 16.0, py::arg("R_out") = 4.0,
          "Solve outside a fixture and return both capacity estimates.");
    m.def("surface", &surface, py::arg("tag"), py::arg("params") = std::map<std::string, double>{},
          py::arg("h") = 1.0 / 32.0, "Boundary mesh geometry and the curvature-only reports.");
    m.def("hull", &hull, py::arg("tag"), py::arg("params") = std::map<std::string, double>{}, py::arg("h") = 1.0 / 16.0);
    m.def("run_experiment", &run, py::arg("config_text"), "Run an experiment from configuration text; returns the manifest.");
    m.def(
        "parse_config", [](const std::string& text) { return to_python(to_json(parse_config(text))); }, py::arg("text"));
    m.def(
        "compare_runs",
        [](const std::string& a, const std::string& b, double rel_tol) {
            return to_python(to_json(compare_runs(load_manifest(a), load_manifest(b), rel_tol)));
        },
        py::arg("run_a"), py::arg("run_b"), py::arg("rel_tol") = 1e-9);
}
