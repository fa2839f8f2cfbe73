#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "pcaplab/curvature.hpp"
#include "pcaplab/inequality.hpp"
#include "pcaplab/marching.hpp"

using namespace pcaplab;
constexpr double pi = std::numbers::pi;

namespace {

SurfaceMesh curved(const ImplicitDomain& d, double h) {
    SurfaceMesh m = extract_boundary_mesh(d, h);
    mesh_curvatures(m);
    return m;
}

const SurfaceMesh& unit_sphere() {
    static const SurfaceMesh m = curved(make_ball(1.0), 1.0 / 32.0);
    return m;
}

const SurfaceMesh& sphere_of_radius_two() {
    static const SurfaceMesh m = curved(make_ball(2.0), 1.0 / 16.0);
    return m;
}

const SurfaceMesh& ellipsoid() {
    static const SurfaceMesh m = curved(make_ellipsoid(1.5, 1.0, 0.75), 1.0 / 32.0);
    return m;
}

}  // namespace

TEST(Report, GapAndVerdict) {
    const auto r = make_report("x", 1.0, 2.0, 0.05, {});
    EXPECT_DOUBLE_EQ(r.gap, 0.5);
    EXPECT_EQ(r.verdict, Verdict::Pass);
    EXPECT_EQ(make_report("x", 1.04, 1.0, 0.05, {}).verdict, Verdict::Pass);
    EXPECT_EQ(make_report("x", 1.06, 1.0, 0.05, {}).verdict, Verdict::Fail);
}

TEST(LpMinkowski, EqualityOnBalls) {
    const auto r1 = lp_minkowski_report(unit_sphere(), 1.0, 1.5, 3);
    EXPECT_NEAR(r1.lhs, 1.0, 1e-12);
    EXPECT_NEAR(r1.rhs, 1.0, 0.01);
    const auto r2 = lp_minkowski_report(sphere_of_radius_two(), std::pow(2.0, 1.5), 1.5, 3);
    EXPECT_NEAR(r2.lhs, std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(r2.rhs, std::sqrt(2.0), 0.01 * std::sqrt(2.0));
    EXPECT_NEAR(r1.gap, r2.gap, 0.02);
}

TEST(VolumetricMinkowski, BallsOfRadiusOneAndTwo) {
    const auto r1 = volumetric_minkowski_report(unit_sphere(), domain_volume(make_ball(1.0), 1.0 / 32.0), 3);
    EXPECT_NEAR(r1.lhs, 1.0, 0.01);
    EXPECT_NEAR(r1.rhs, 1.0, 0.01);
    const auto r2 = volumetric_minkowski_report(sphere_of_radius_two(), domain_volume(make_ball(2.0), 1.0 / 16.0), 3);
    EXPECT_NEAR(r2.lhs, 2.0, 0.02);
    EXPECT_NEAR(r2.rhs, 2.0, 0.02);
    EXPECT_EQ(r2.verdict, Verdict::Pass);
}

TEST(OutwardMinimising, ConvexGateAndSkip) {
    const auto gate = convexity_gate(ellipsoid());
    EXPECT_TRUE(gate.outward_minimising);
    const auto r = outward_minimising_minkowski_report(ellipsoid(), gate, 3);
    EXPECT_EQ(r.verdict, Verdict::Pass);
    EXPECT_GT(r.gap, 0.0);
    EXPECT_NEAR(r.rhs, r.details["rhs_absolute"].get<double>(), 1e-9);

    OutwardMinimisingVerdict no;
    no.outward_minimising = false;
    EXPECT_EQ(outward_minimising_minkowski_report(ellipsoid(), no, 3).verdict, Verdict::Skipped);
    EXPECT_EQ(nearly_umbilical_report(ellipsoid(), no).verdict, Verdict::Skipped);
}

TEST(NearlyUmbilical, SphereEqualityAndEllipsoidStrict) {
    const auto gate = convexity_gate(unit_sphere());
    const auto s = nearly_umbilical_report(unit_sphere(), gate);
    EXPECT_EQ(s.verdict, Verdict::Pass);
    EXPECT_NEAR(s.lhs, 4 * pi, 0.01 * 4 * pi);
    EXPECT_NEAR(s.rhs, 4 * pi, 0.01 * 4 * pi);
    EXPECT_LT(s.details["direct"]["lhs"].get<double>(), 0.01);

    const auto e = nearly_umbilical_report(ellipsoid(), convexity_gate(ellipsoid()));
    EXPECT_EQ(e.verdict, Verdict::Pass);
    EXPECT_GT(e.gap, 0.0);
    EXPECT_GT(e.details["direct"]["gap"].get<double>(), 0.0);
    EXPECT_LT(e.details["expand_check"]["relative_residual"].get<double>(), 0.02);
}

TEST(Willmore, SphereEllipsoidTorus) {
    const auto s = willmore_topology_check(unit_sphere());
    EXPECT_NEAR(s.rhs, 16 * pi, 0.02 * 16 * pi);
    EXPECT_EQ(s.details["topology"], "sphere");
    const auto e = willmore_topology_check(ellipsoid());
    EXPECT_EQ(e.verdict, Verdict::Pass);
    EXPECT_GT(e.rhs, 16 * pi);
    const auto t = willmore_topology_check(curved(make_solid_torus(1.0, 0.4), 0.04));
    EXPECT_GT(t.details["traceless_integral"].get<double>(), 8 * pi);
    EXPECT_EQ(t.details["topology"], "not asserted");
}

TEST(ExtendedMinkowski, ErrorBarWidensTolerance) {
    const double A = total_area(unit_sphere());
    const auto tight = extended_minkowski_report(unit_sphere(), combine_hull_routes({A * 1.3}, {0.0}), 3);
    EXPECT_EQ(tight.verdict, Verdict::Fail);
    const auto loose = extended_minkowski_report(unit_sphere(), combine_hull_routes({A * 1.3}, {A * 0.5}), 3);
    EXPECT_EQ(loose.verdict, Verdict::Pass);
    const auto routes = combine_hull_routes({10.0, 12.0}, {0.5, 1.5});
    EXPECT_DOUBLE_EQ(routes.value, 11.0);
    EXPECT_DOUBLE_EQ(routes.error, 2.0);
}

TEST(Csv, HeaderAndRows) {
    std::ostringstream out;
    write_reports_csv(out, {make_report("a", 1.0, 2.0, 0.05, {{"fixture", "ball"}})});
    const std::string s = out.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "name,lhs,rhs,gap,verdict,tolerance,inputs");
    EXPECT_NE(s.find("a,1,2,0.5,PASS,0.05,"), std::string::npos);
}
