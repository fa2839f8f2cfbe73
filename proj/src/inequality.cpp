#include "pcaplab/inequality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "pcaplab/constants.hpp"
#include "pcaplab/curvature.hpp"
#include "pcaplab/errors.hpp"
#include "pcaplab/marching.hpp"
#include "pcaplab/numfmt.hpp"
#include "pcaplab/quantities.hpp"

namespace pcaplab {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_curvature(const SurfaceMesh& mesh, const char* who) {
    if (!mesh.has_curvature()) throw PreconditionError(std::string(who) + ": mesh curvature fields are not populated");
}

double normalised_abs_h_integral(const SurfaceMesh& mesh, int n, double power) {
    std::vector<double> f(mesh.vertex_count());
    for (std::size_t v = 0; v < f.size(); ++v) f[v] = std::pow(std::abs(mesh.H[v] / (n - 1)), power);
    return boundary_integral(mesh, f) / sphere_area(n);
}

double mean_curvature_integral(const SurfaceMesh& mesh) { return boundary_integral(mesh, mesh.H); }

void set_skipped(InequalityReport& r, const std::string& reason) {
    r.verdict = Verdict::Skipped;
    r.details["skip_reason"] = reason;
}

}  // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Fail: return "FAIL";
        case Verdict::Skipped: return "SKIPPED";
    }
    return "FAIL";
}

InequalityReport make_report(std::string name, double lhs, double rhs, double tolerance, nlohmann::json inputs) {
    InequalityReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.tolerance = tolerance;
    r.gap = (rhs - lhs) / rhs;
    r.verdict = r.gap >= -tolerance ? Verdict::Pass : Verdict::Fail;
    r.inputs = inputs.is_null() ? nlohmann::json::object() : std::move(inputs);
    return r;
}

InequalityReport lp_minkowski_report(const SurfaceMesh& mesh, double capacity, double p, int n, nlohmann::json inputs,
                                     double tolerance) {
    require_curvature(mesh, "lp_minkowski_report");
    if (!(p > 1.0 && p < n)) throw PreconditionError("lp_minkowski_report: p must lie in (1, n)");
    if (!(capacity > 0)) throw PreconditionError("lp_minkowski_report: capacity must be positive");
    const double lhs = std::pow(capacity, (n - p - 1.0) / (n - p));
    const double rhs = normalised_abs_h_integral(mesh, n, p);
    inputs["p"] = p;
    inputs["n"] = n;
    auto r = make_report("lp_minkowski", lhs, rhs, tolerance, std::move(inputs));
    r.details["capacity"] = round12(capacity);
    return r;
}

HullPerimeter combine_hull_routes(const std::vector<double>& values, const std::vector<double>& errors) {
    if (values.empty() || values.size() != errors.size())
        throw PreconditionError("combine_hull_routes: need matching, non-empty value and error lists");
    HullPerimeter out;
    out.routes = values;
    double sum = 0.0, err = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        sum += values[k];
        err += std::abs(errors[k]);
    }
    out.value = sum / values.size();
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    out.error = 0.5 * (*hi - *lo) + err / values.size();
    return out;
}

InequalityReport extended_minkowski_report(const SurfaceMesh& mesh, const HullPerimeter& hull, int n, nlohmann::json inputs,
                                           double tolerance) {
    require_curvature(mesh, "extended_minkowski_report");
    if (!(hull.value > 0)) throw PreconditionError("extended_minkowski_report: hull perimeter must be positive");
    const double expo = (n - 2.0) / (n - 1.0);
    const double lhs = std::pow(hull.value / sphere_area(n), expo);
    const double rhs = normalised_abs_h_integral(mesh, n, 1.0);
    const double lhs_rel_err = expo * hull.error / hull.value;
    auto r = make_report("extended_minkowski", lhs, rhs, tolerance, std::move(inputs));
    const double allowed = std::max(tolerance, lhs_rel_err * lhs / rhs);
    r.verdict = r.gap >= -allowed ? Verdict::Pass : Verdict::Fail;
    nlohmann::json routes = nlohmann::json::array();
    for (double v : hull.routes) routes.push_back(round12(v));
    r.details["hull_perimeter"] = round12(hull.value);
    r.details["hull_error"] = round12(hull.error);
    r.details["hull_routes"] = routes;
    r.details["lhs_relative_error"] = round12(lhs_rel_err);
    r.details["effective_tolerance"] = round12(allowed);
    r.details["boundary_area"] = round12(total_area(mesh));
    return r;
}

double domain_volume(const ImplicitDomain& domain, double h) {
    if (domain.dimension() != 3) throw PreconditionError("domain_volume: only n = 3 domains");
    const LatticeField f = sample_levelset(domain, h);
    return sublevel_volume(f, 0.0);
}

InequalityReport volumetric_minkowski_report(const SurfaceMesh& mesh, double volume, int n, nlohmann::json inputs,
                                             double tolerance) {
    require_curvature(mesh, "volumetric_minkowski_report");
    if (!(volume > 0)) throw PreconditionError("volumetric_minkowski_report: volume must be positive");
    const double lhs = std::pow(volume / ball_volume(n), (n - 2.0) / n);
    const double rhs = normalised_abs_h_integral(mesh, n, 1.0);
    auto r = make_report("volumetric_minkowski", lhs, rhs, tolerance, std::move(inputs));
    r.details["volume"] = round12(volume);
    r.details["mesh_volume"] = round12(enclosed_volume(mesh));
    return r;
}

OutwardMinimisingVerdict convexity_gate(const SurfaceMesh& mesh, double slack) {
    require_curvature(mesh, "convexity_gate");
    double kmin = std::numeric_limits<double>::infinity();
    double hmax = 0.0;
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        hmax = std::max(hmax, std::abs(mesh.H[v]));
        if (!mesh.fit_fallback.empty() && mesh.fit_fallback[v]) continue;
        const Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (mesh.h[v] + mesh.h[v].transpose()));
        kmin = std::min(kmin, es.eigenvalues()(0));
    }
    OutwardMinimisingVerdict out;
    out.boundary_area = total_area(mesh);
    out.perimeter = out.boundary_area;
    out.tolerance = slack;
    out.relative_difference = hmax > 0 ? std::min(0.0, kmin) / hmax : 0.0;
    out.outward_minimising = kmin >= -slack * hmax;
    return out;
}

InequalityReport outward_minimising_minkowski_report(const SurfaceMesh& mesh, const OutwardMinimisingVerdict& gate, int n,
                                                     nlohmann::json inputs, double tolerance) {
    require_curvature(mesh, "outward_minimising_minkowski_report");
    const double area = total_area(mesh);
    const double lhs = std::pow(area / sphere_area(n), (n - 2.0) / (n - 1.0));
    const double rhs = mean_curvature_integral(mesh) / ((n - 1) * sphere_area(n));
    auto r = make_report("outward_minimising_minkowski", lhs, rhs, tolerance, std::move(inputs));
    r.details["gate"] = to_json(gate);
    r.details["rhs_absolute"] = round12(normalised_abs_h_integral(mesh, n, 1.0));
    if (!gate.outward_minimising) set_skipped(r, "domain is not outward minimising");
    return r;
}

InequalityReport nearly_umbilical_report(const SurfaceMesh& mesh, const OutwardMinimisingVerdict& gate,
                                         nlohmann::json inputs, double tolerance) {
    require_curvature(mesh, "nearly_umbilical_report");
    const std::size_t nv = mesh.vertex_count();
    const double area = total_area(mesh);
    const double H_bar = mean_curvature_integral(mesh) / area;

    std::vector<double> shifted(nv), spread(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        const Mat2 d = mesh.h[v] - 0.5 * H_bar * Mat2::Identity();
        shifted[v] = d.squaredNorm();
        spread[v] = 0.5 * (mesh.H[v] - H_bar) * (mesh.H[v] - H_bar);
    }
    const double direct_lhs = boundary_integral(mesh, shifted);
    const double traceless = boundary_integral(mesh, traceless_norm_squared(mesh));
    const double full = boundary_integral(mesh, shape_norm_squared(mesh));
    const double direct_rhs = 2.0 * traceless;
    const double direct_gap = (direct_rhs - direct_lhs) / full;
    const double expanded = traceless + boundary_integral(mesh, spread);
    const double expand_residual = std::abs(direct_lhs - expanded) / std::max(direct_lhs, 1e-12 * full);

    const int chi = euler_characteristic(mesh);
    const double lhs = std::sqrt(std::max(0.0, 2.0 * kPi * chi * area));
    const double rhs = 0.5 * mean_curvature_integral(mesh);
    auto r = make_report("nearly_umbilical", lhs, rhs, tolerance, std::move(inputs));
    const bool direct_pass = direct_gap >= -tolerance;
    r.details["direct"] = {{"lhs", round12(direct_lhs)},
                           {"rhs", round12(direct_rhs)},
                           {"gap", round12(direct_gap)},
                           {"normalisation", round12(full)},
                           {"verdict", to_string(direct_pass ? Verdict::Pass : Verdict::Fail)}};
    r.details["gauss_bonnet_form"] = {{"lhs", round12(lhs)},
                                      {"rhs", round12(rhs)},
                                      {"gap", round12(r.gap)},
                                      {"chi", chi},
                                      {"verdict", to_string(r.verdict)}};
    r.details["expand_check"] = {{"expanded", round12(expanded)}, {"relative_residual", round12(expand_residual)}};
    r.details["mean_H"] = round12(H_bar);
    r.details["gate"] = to_json(gate);
    if (!direct_pass) r.verdict = Verdict::Fail;
    if (!gate.outward_minimising) set_skipped(r, "domain is not outward minimising");
    return r;
}

InequalityReport willmore_topology_check(const SurfaceMesh& mesh, nlohmann::json inputs, double tolerance) {
    require_curvature(mesh, "willmore_topology_check");
    std::vector<double> H2(mesh.vertex_count());
    for (std::size_t v = 0; v < H2.size(); ++v) H2[v] = mesh.H[v] * mesh.H[v];
    const double willmore = boundary_integral(mesh, H2);
    const double traceless = boundary_integral(mesh, traceless_norm_squared(mesh));
    const int chi = euler_characteristic(mesh);
    auto r = make_report("willmore_topology", 16.0 * kPi, willmore, tolerance, std::move(inputs));
    std::string topology = "not asserted";
    if (traceless <= 8.0 * kPi) {
        topology = chi == 2 ? "sphere" : "violated";
        if (chi != 2) r.verdict = Verdict::Fail;
    }
    r.details["traceless_integral"] = round12(traceless);
    r.details["traceless_bound"] = round12(8.0 * kPi);
    r.details["chi"] = chi;
    r.details["topology"] = topology;
    r.details["willmore_ratio"] = round12(willmore / (16.0 * kPi));
    return r;
}

std::vector<MoserRow> moser_imcf_demo(const PotentialField& field, double boundary_area, const std::vector<double>& t_grid) {
    const int n = field.dimension;
    if (n != 3) throw PreconditionError("moser_imcf_demo: only n = 3 fields");
    const double p = field.p;
    const double floor_level = lowest_resolved_level(field);
    std::vector<MoserRow> rows;
    for (double t : t_grid) {
        if (t < 0) throw PreconditionError("moser_imcf_demo: t must be non-negative");
        MoserRow row;
        row.t = t;
        row.level = std::exp(-t / (p - 1.0));
        row.predicted = boundary_area * std::exp(t * (n - 1.0) / (n - p));
        row.imcf = boundary_area * std::exp(t);
        if (t == 0.0) {
            row.area = boundary_area;
        } else if (row.level <= floor_level) {
            row.area = std::numeric_limits<double>::quiet_NaN();
        } else {
            const SurfaceMesh iso = isosurface(field.lattice, row.level, Facing::TowardDecreasing);
            row.area = field.multiplicity() * total_area(iso);
        }
        row.relative_error = (row.area - row.predicted) / row.predicted;
        row.exponent = t > 0 ? std::log(row.area / boundary_area) / t : std::numeric_limits<double>::quiet_NaN();
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json to_json(const InequalityReport& r) {
    return {{"name", r.name},
            {"lhs", round12(r.lhs)},
            {"rhs", round12(r.rhs)},
            {"gap", round12(r.gap)},
            {"verdict", to_string(r.verdict)},
            {"tolerance", round12(r.tolerance)},
            {"inputs", r.inputs},
            {"details", r.details}};
}

nlohmann::json to_json(const std::vector<InequalityReport>& reports) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : reports) out.push_back(to_json(r));
    return out;
}

nlohmann::json to_json(const std::vector<MoserRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{"t", round12(r.t)},
                       {"level", round12(r.level)},
                       {"area", round12(r.area)},
                       {"predicted", round12(r.predicted)},
                       {"imcf", round12(r.imcf)},
                       {"relative_error", round12(r.relative_error)},
                       {"exponent", round12(r.exponent)}});
    }
    return out;
}

void write_reports_csv(std::ostream& out, const std::vector<InequalityReport>& reports) {
    out << "name,lhs,rhs,gap,verdict,tolerance,inputs\n";
    for (const auto& r : reports) {
        std::string inputs = r.inputs.dump();
        std::string quoted;
        for (char c : inputs) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
        out << r.name << ',' << format_number(r.lhs) << ',' << format_number(r.rhs) << ',' << format_number(r.gap) << ','
            << to_string(r.verdict) << ',' << format_number(r.tolerance) << ",\"" << quoted << "\"\n";
    }
}

}  // namespace pcaplab
