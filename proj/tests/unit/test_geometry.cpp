#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "pcaplab/constants.hpp"
#include "pcaplab/curvature.hpp"
#include "pcaplab/errors.hpp"
#include "pcaplab/marching.hpp"
#include "pcaplab/mesh.hpp"
#include "pcaplab/shapes.hpp"

using namespace pcaplab;
constexpr double pi = std::numbers::pi;

namespace {

SurfaceMesh cube_mesh() {
    std::istringstream in(
        "OFF\n8 6 0\n"
        "0 0 0\n1 0 0\n1 1 0\n0 1 0\n0 0 1\n1 0 1\n1 1 1\n0 1 1\n"
        "4 0 3 2 1\n4 4 5 6 7\n4 0 1 5 4\n4 1 2 6 5\n4 2 3 7 6\n4 3 0 4 7\n");
    return read_off(in);
}

const SurfaceMesh& sphere_mesh() {
    static const SurfaceMesh mesh = [] {
        SurfaceMesh m = extract_boundary_mesh(make_ball(1.0), 1.0 / 32.0);
        mesh_curvatures(m);
        return m;
    }();
    return mesh;
}

}  // namespace

TEST(Constants, SphereAndBallMeasures) {
    EXPECT_NEAR(sphere_area(3), 4 * pi, 1e-12);
    EXPECT_NEAR(ball_volume(3), 4 * pi / 3, 1e-12);
    EXPECT_NEAR(sphere_area(2), 2 * pi, 1e-12);
    EXPECT_NEAR(ball_volume(2), pi, 1e-12);
    EXPECT_NEAR(sphere_area(4), 2 * pi * pi, 1e-12);
}

TEST(Mesh, OffRoundTripAndTopology) {
    const SurfaceMesh cube = cube_mesh();
    EXPECT_EQ(cube.vertex_count(), 8u);
    EXPECT_EQ(cube.triangle_count(), 12u);
    EXPECT_EQ(euler_characteristic(cube), 2);
    EXPECT_TRUE(analyse_edges(cube).closed_orientable());
    EXPECT_NEAR(total_area(cube), 6.0, 1e-12);
    EXPECT_NEAR(enclosed_volume(cube), 1.0, 1e-12);

    std::ostringstream out;
    write_off(out, cube);
    std::istringstream back(out.str());
    const SurfaceMesh again = read_off(back);
    EXPECT_EQ(again.triangles, cube.triangles);
    EXPECT_NEAR(enclosed_volume(again), 1.0, 1e-12);
}

TEST(Mesh, OpenSurfaceRejected) {
    SurfaceMesh m = cube_mesh();
    m.triangles.pop_back();
    EXPECT_FALSE(analyse_edges(m).closed_orientable());
    EXPECT_THROW(require_closed_manifold(m), MeshError);
}

TEST(Shapes, FactoryRejectsUnknownKeysAndTags) {
    EXPECT_THROW(make_shape(ShapeTag::Ball, {{"radiuss", 1.0}}), PreconditionError);
    EXPECT_THROW(parse_shape_tag("cube"), PreconditionError);
    const auto e = make_shape(ShapeTag::Ellipsoid, {});
    EXPECT_NO_THROW(e.validate());
    EXPECT_TRUE(e.contains(Vec3(1.4, 0, 0)));
    EXPECT_FALSE(e.contains(Vec3(0, 0, 0.8)));
}

TEST(Shapes, ScalingDilatesTheSet) {
    const auto d = make_shape(ShapeTag::Dumbbell, {});
    const auto d2 = d.scaled(2.0);
    for (const Vec3& x : {Vec3(1.5, 0.2, 0.1), Vec3(0.0, 0.25, 0.0), Vec3(0.3, 0.9, 0.2)}) {
        EXPECT_EQ(d.contains(x), d2.contains(2.0 * x));
    }
    EXPECT_NEAR(d2.info().circumradius, 2.0 * d.info().circumradius, 1e-12);
}

TEST(Marching, SublevelVolumeOfBall) {
    const LatticeField f = sample_levelset(make_ball(1.0), 1.0 / 32.0);
    EXPECT_NEAR(sublevel_volume(f, 0.0), 4 * pi / 3, 0.01 * 4 * pi / 3);
}

TEST(Marching, BoundaryMeshResolutionPrecondition) {
    EXPECT_THROW(extract_boundary_mesh(make_ball(1.0), 0.5), PreconditionError);
}

TEST(Curvature, SphereIsUmbilicWithMeanCurvatureTwo) {
    const SurfaceMesh& m = sphere_mesh();
    EXPECT_EQ(euler_characteristic(m), 2);
    EXPECT_NEAR(total_area(m), 4 * pi, 0.005 * 4 * pi);
    double worst_H = 0.0, worst_ring = 0.0;
    const auto ring = traceless_norm_squared(m);
    for (std::size_t v = 0; v < m.vertex_count(); ++v) {
        worst_H = std::max(worst_H, std::abs(m.H[v] - 2.0));
        worst_ring = std::max(worst_ring, std::sqrt(ring[v]));
    }
    EXPECT_LT(worst_H, 0.05);
    EXPECT_LT(worst_ring, 0.05);
}

TEST(Curvature, GaussBonnetSphereAndTorus) {
    const auto gb = gauss_bonnet_check(sphere_mesh());
    EXPECT_EQ(gb.chi_combinatorial, 2);
    EXPECT_NEAR(gb.integral, 8 * pi, 0.005 * 8 * pi);
    EXPECT_FALSE(gb.flagged);

    SurfaceMesh torus = extract_boundary_mesh(make_solid_torus(1.0, 0.4), 0.04);
    mesh_curvatures(torus);
    const auto gt = gauss_bonnet_check(torus);
    EXPECT_EQ(gt.chi_combinatorial, 0);
    EXPECT_LT(std::abs(gt.integral), 0.5);
}

TEST(Curvature, WillmoreEnergyOfSphere) {
    const SurfaceMesh& m = sphere_mesh();
    std::vector<double> H2(m.vertex_count());
    for (std::size_t v = 0; v < H2.size(); ++v) H2[v] = m.H[v] * m.H[v];
    EXPECT_NEAR(boundary_integral(m, H2), 16 * pi, 0.02 * 16 * pi);
}
