#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "pcaplab/errors.hpp"
#include "pcaplab/hull.hpp"

using namespace pcaplab;

TEST(ConvexHullOracle, LShapeSquareAndTriangle) {
    EXPECT_NEAR(convex_hull_2d_oracle({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}}), 6.0 + std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(convex_hull_2d_oracle({{0, 0}, {1, 0}, {1, 1}, {0, 1}}), 4.0, 1e-12);
    EXPECT_NEAR(convex_hull_2d_oracle({{0, 0}, {3, 0}, {0, 4}}), 12.0, 1e-12);
}

TEST(ConvexHullOracle, RejectsDegenerateInput) {
    EXPECT_THROW(convex_hull_2d_oracle({{0, 0}, {1, 0}}), PreconditionError);
    EXPECT_THROW(convex_hull_2d_oracle({{0, 0}, {1, 1}, {1, 0}, {0, 1}}), PreconditionError);
}

TEST(Extrapolation, AitkenIsExactOnGeometricErrors) {
    const auto r = extrapolate_in_h({1.0 + 0.1, 1.0 + 0.2, 1.0 + 0.4});
    EXPECT_NEAR(r[0], 1.0, 1e-12);
    const auto q = extrapolate_in_h({1.0 + 0.01, 1.0 + 0.04, 1.0 + 0.16});
    EXPECT_NEAR(q[0], 1.0, 1e-12);
    const auto two = extrapolate_in_h({1.1, 1.3});
    EXPECT_NEAR(two[0], 1.1, 1e-12);
    EXPECT_NEAR(two[1], 0.2, 1e-12);
}

TEST(Extrapolation, BallCapacitiesGiveSphereArea) {
    const std::vector<double> p{1.4, 1.3, 1.2, 1.1};
    const std::vector<double> C(4, 1.0), err(4, 0.0);
    const auto e = extrapolate_capacities(p, C, err, 3);
    EXPECT_NEAR(e.estimate, 4 * std::numbers::pi, 1e-9);
    EXPECT_TRUE(e.monotone);
    EXPECT_THROW(extrapolate_capacities({1.4, 1.3, 1.2}, {1, 1, 1}, {0, 0, 0}, 3), PreconditionError);
}

TEST(Gate, RelativeDifference) {
    EXPECT_TRUE(is_outward_minimising(10.2, 10.0).outward_minimising);
    EXPECT_FALSE(is_outward_minimising(9.0, 10.0).outward_minimising);
}

TEST(TotalVariation, LShapeHullPerimeter) {
    HullOptions o;
    o.h = 1.0 / 16.0;
    o.gap_tolerance = 1e-5;
    const HullField F = minimise_tv_obstacle(make_l_shape_2d(), o);
    const double oracle = 6.0 + std::sqrt(2.0);
    EXPECT_NEAR(F.perimeter_estimate, oracle, 0.05 * oracle);
    EXPECT_LE(F.dual_bound, F.tv_energy * (1 + 1e-12));
    for (std::size_t k = 1; k < F.tv_log.size(); ++k) EXPECT_LE(F.tv_log[k], F.tv_log[k - 1]);
    for (double v : F.v()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}
