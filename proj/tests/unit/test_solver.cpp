#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "pcaplab/errors.hpp"
#include "pcaplab/potential.hpp"
#include "pcaplab/quantities.hpp"
#include "pcaplab/radial.hpp"
#include "pcaplab/shapes.hpp"

using namespace pcaplab;

namespace {

PotentialField coarse_ball(double scale = 1.0, double p = 1.5) {
    SolveOptions o;
    o.p = p;
    o.h = scale / 8.0;
    o.R_out = 4.0 * scale;
    return solve_exterior(make_ball(1.0).scaled(scale), o);
}

}  // namespace

TEST(Radial, EnergyMatchesQuadrature) {
    for (double p : {1.2, 1.5, 2.0}) {
        const RadialSolution s = radial_potential(1.3, p, 3);
        // substitute r = R / t on (0, 1]
        double sum = 0.0;
        const int N = 200000;
        for (int k = 0; k < N; ++k) {
            const double t = (k + 0.5) / N;
            const double r = s.R / t;
            sum += std::pow(s.grad_norm(r), p) * r * r * (s.R / (t * t)) / N;
        }
        EXPECT_NEAR(4 * std::numbers::pi * sum / s.energy(), 1.0, 1e-4) << "p = " << p;
    }
}

TEST(Radial, RejectsBadExponent) {
    EXPECT_THROW(radial_potential(1.0, 3.0, 3), PreconditionError);
    EXPECT_THROW(radial_potential(1.0, 1.0, 3), PreconditionError);
}

TEST(Solver, PreconditionsAreChecked) {
    SolveOptions o;
    o.h = 1.0 / 8.0;
    o.p = 2.9;
    EXPECT_THROW(solve_exterior(make_ball(1.0), o), PreconditionError);
    o.p = 1.5;
    o.R_out = 2.0;
    EXPECT_THROW(solve_exterior(make_ball(1.0), o), PreconditionError);
}

TEST(Solver, MaximumPrincipleAndCapacity) {
    const PotentialField F = coarse_ball();
    double lo = 1.0, hi = 0.0;
    for (double v : F.lattice.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_GE(lo, 0.0);
    EXPECT_LE(hi, 1.0 + 1e-12);
    EXPECT_NEAR(cap_from_energy(F), 1.0, 0.05);
    for (std::size_t k = 1; k < F.energy_log.size(); ++k) EXPECT_LE(F.energy_log[k], F.energy_log[k - 1] * (1 + 1e-12));
}

TEST(Solver, DeterministicField) {
    const PotentialField a = coarse_ball();
    const PotentialField b = coarse_ball();
    ASSERT_EQ(a.lattice.values.size(), b.lattice.values.size());
    EXPECT_TRUE(a.lattice.values == b.lattice.values);
    EXPECT_EQ(a.energy, b.energy);
}

TEST(Solver, CapacityScalesLikeLengthToTheNMinusP) {
    const double p = 1.5;
    const double c1 = cap_from_energy(coarse_ball(1.0, p));
    const double c2 = cap_from_energy(coarse_ball(2.0, p));
    EXPECT_NEAR(c2 / c1, std::pow(2.0, 3.0 - p), 0.02 * std::pow(2.0, 3.0 - p));
}
