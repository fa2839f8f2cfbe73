#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "pcaplab/quantities.hpp"
#include "pcaplab/radial.hpp"

using namespace pcaplab;
constexpr double pi = std::numbers::pi;

TEST(FractionBelow, AgreesWithMonteCarlo) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::exponential_distribution<double> E(1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::array<double, 4> f{U(rng), U(rng), U(rng), U(rng)};
        std::sort(f.begin(), f.end());
        const double c = f[0] + (f[3] - f[0]) * U(rng);
        int below = 0;
        const int N = 200000;
        for (int k = 0; k < N; ++k) {
            // uniform barycentric coordinates
            double w[4], s = 0.0;
            for (double& x : w) s += (x = E(rng));
            double v = 0.0;
            for (int i = 0; i < 4; ++i) v += w[i] / s * f[i];
            below += v < c;
        }
        EXPECT_NEAR(fraction_below_sorted(f, c), static_cast<double>(below) / N, 0.005);
    }
    EXPECT_EQ(fraction_below_sorted({0.1, 0.2, 0.3, 0.4}, 0.0), 0.0);
    EXPECT_EQ(fraction_below_sorted({0.1, 0.2, 0.3, 0.4}, 1.0), 1.0);
}

TEST(Kato, RadialIdentityVanishes) {
    for (int n : {3, 4, 5}) {
        for (double p : {1.2, 1.5, 2.0, 2.5}) {
            if (p >= n) continue;
            const RadialSolution s = radial_potential(1.0, p, n);
            for (double r : {1.1, 1.5, 3.0}) EXPECT_LT(kato_residual_radial(s, r).relative, 1e-12);
        }
    }
}

TEST(Kato, RadialJetVanishesOffAxis) {
    const RadialSolution s = radial_potential(1.0, 1.5, 3);
    const auto jet = radial_jet(s);
    for (const Vec3& x : {Vec3(1.2, 0.5, 0.3), Vec3(-0.7, 1.1, 0.9), Vec3(2.0, -1.0, 0.5)}) {
        EXPECT_LT(kato_residual(jet, x, 1.5, 3, 0.0).relative, 1e-10);
    }
}

TEST(Closed, LimitOfUpOnUnitBall) {
    EXPECT_NEAR(up_limit_zero(1.0, 1.5, 3), 4 * pi * std::pow(3.0, 1.5), 1e-9);
    EXPECT_NEAR(cap_from_normalised(1.0, 2.0, 3), 4 * pi, 1e-12);
}

TEST(Talenti, BallCapacitiesAreConsistent) {
    for (double p : {1.2, 1.5, 2.0}) {
        const double cap_p = cap_from_normalised(1.0, p, 3);
        const double gap = xu3_gap(4 * pi, cap_p, 3, p);
        EXPECT_GE(gap, -0.01 * 4 * pi) << "p = " << p;
    }
    EXPECT_GT(talenti_constant(3, 1.5), 0.0);
}
