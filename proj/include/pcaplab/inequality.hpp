#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "pcaplab/hull.hpp"
#include "pcaplab/mesh.hpp"
#include "pcaplab/potential.hpp"

namespace pcaplab {

enum class Verdict { Pass, Fail, Skipped };
std::string to_string(Verdict v);

struct InequalityReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double gap = 0.0;          // (rhs - lhs) / rhs
    Verdict verdict = Verdict::Fail;
    double tolerance = 0.05;
    nlohmann::json inputs = nlohmann::json::object();   // fixture, p, h, capacity route
    nlohmann::json details = nlohmann::json::object();  // secondary forms, error bars
};

/// gap = (rhs - lhs) / rhs; PASS iff gap >= -tolerance.
InequalityReport make_report(std::string name, double lhs, double rhs, double tolerance, nlohmann::json inputs);

/// lhs = C_p^{(n-p-1)/(n-p)}, rhs = |S^{n-1}|^{-1} int |H/(n-1)|^p.
InequalityReport lp_minkowski_report(const SurfaceMesh& mesh, double capacity, double p, int n,
                                     nlohmann::json inputs = nlohmann::json::object(), double tolerance = 0.05);

/// Hull perimeter from the total-variation and capacity-extrapolation routes.
struct HullPerimeter {
    double value = 0.0;
    double error = 0.0;
    std::vector<double> routes;
};
/// Mean of the available routes; error = half their spread plus the mean of
/// the route errors.
HullPerimeter combine_hull_routes(const std::vector<double>& values, const std::vector<double>& errors);

/// lhs = (|dOmega*| / |S^{n-1}|)^{(n-2)/(n-1)}, rhs = |S^{n-1}|^{-1} int |H/(n-1)|.
/// FAIL only when the gap is below -max(tolerance, relative error of lhs).
InequalityReport extended_minkowski_report(const SurfaceMesh& mesh, const HullPerimeter& hull, int n,
                                           nlohmann::json inputs = nlohmann::json::object(), double tolerance = 0.05);

/// Volume of the domain: exact volume of {phi < 0} for the piecewise-linear
/// interpolant of the level set on a lattice of spacing h.
double domain_volume(const ImplicitDomain& domain, double h);

/// lhs = (|Omega| / |B^n|)^{(n-2)/n}, rhs = |S^{n-1}|^{-1} int |H/(n-1)|.
InequalityReport volumetric_minkowski_report(const SurfaceMesh& mesh, double volume, int n,
                                             nlohmann::json inputs = nlohmann::json::object(), double tolerance = 0.05);

/// Convex sets are outward minimising. Convexity is read off the shape
/// operator: the smallest principal curvature over non-fallback vertices must
/// stay above -slack times the largest |H|. perimeter is set to the boundary area.
OutwardMinimisingVerdict convexity_gate(const SurfaceMesh& mesh, double slack = 0.05);

/// Signed-H form; SKIPPED unless the outward-minimising gate holds.
InequalityReport outward_minimising_minkowski_report(const SurfaceMesh& mesh, const OutwardMinimisingVerdict& gate, int n,
                                                     nlohmann::json inputs = nlohmann::json::object(),
                                                     double tolerance = 0.05);

/// Two forms (n = 3). Main lhs/rhs: sqrt(2 pi chi |dOmega|) against int H/2.
/// details.direct: int |h - (Hbar/2) g|^2 against 2 int |ring h|^2, gap
/// normalised by int |h|^2 (both sides vanish on spheres); details.expand_check:
/// relative residual of int |h - (Hbar/2) g|^2 = int |ring h|^2 + (|dOmega|/2)(mean H^2 - Hbar^2).
/// PASS iff both forms pass. SKIPPED unless the gate holds.
InequalityReport nearly_umbilical_report(const SurfaceMesh& mesh, const OutwardMinimisingVerdict& gate,
                                         nlohmann::json inputs = nlohmann::json::object(), double tolerance = 0.05);

/// int |ring h|^2 against 8 pi (when below, the mesh Euler characteristic must
/// be 2) and the Willmore bound 16 pi <= int H^2 (lhs 16 pi, rhs int H^2).
InequalityReport willmore_topology_check(const SurfaceMesh& mesh, nlohmann::json inputs = nlohmann::json::object(),
                                         double tolerance = 0.05);

struct MoserRow {
    double t = 0.0;
    double level = 0.0;        // u = exp(-t / (p - 1))
    double area = 0.0;         // area of {w_p = t}, NaN when not resolved
    double predicted = 0.0;    // |dOmega| exp(t (n-1)/(n-p))
    double imcf = 0.0;         // |dOmega| exp(t)
    double relative_error = 0.0;
    double exponent = 0.0;     // log(area / |dOmega|) / t
};

/// Level sets of w_p = -(p-1) log u on a ball field; t = 0 uses the boundary area.
std::vector<MoserRow> moser_imcf_demo(const PotentialField& field, double boundary_area, const std::vector<double>& t_grid);

nlohmann::json to_json(const InequalityReport& r);
nlohmann::json to_json(const std::vector<InequalityReport>& reports);
nlohmann::json to_json(const std::vector<MoserRow>& rows);
/// Header name,lhs,rhs,gap,verdict,tolerance,inputs (inputs as compact JSON).
void write_reports_csv(std::ostream& out, const std::vector<InequalityReport>& reports);

}  // namespace pcaplab
