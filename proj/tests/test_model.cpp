#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "dqpt/model.hpp"

using namespace dqpt;

TEST(ModeGrid, SmallChains) {
    EXPECT_EQ(mode_grid(2).momenta, std::vector<double>{pi / 2});
    const auto g4 = mode_grid(4);
    ASSERT_EQ(g4.momenta.size(), 2u);
    EXPECT_DOUBLE_EQ(g4.momenta[0], pi / 4);
    EXPECT_DOUBLE_EQ(g4.momenta[1], 3 * pi / 4);
    const auto g8 = mode_grid(8);
    ASSERT_EQ(g8.momenta.size(), 4u);
    for (int n = 0; n < 4; ++n) EXPECT_DOUBLE_EQ(g8.momenta[n], (2 * n + 1) * pi / 8);
}

TEST(ModeGrid, InvariantsOnLargeGrid) {
    const auto g = mode_grid(1000);
    ASSERT_EQ(g.momenta.size(), 500u);
    for (std::size_t i = 0; i < g.momenta.size(); ++i) {
        EXPECT_GT(g.momenta[i], 0.0);
        EXPECT_LT(g.momenta[i], pi);
        if (i) {
            EXPECT_GT(g.momenta[i], g.momenta[i - 1]);
        }
    }
}

TEST(ModeGrid, RejectsOddOrNonPositive) {
    EXPECT_THROW(mode_grid(3), std::invalid_argument);
    EXPECT_THROW(mode_grid(0), std::invalid_argument);
    EXPECT_THROW(mode_grid(-4), std::invalid_argument);
}

TEST(Dispersion, ClosedFormValues) {
    EXPECT_NEAR(dispersion(pi / 2, 0.0), 1.0, 1e-15);
    EXPECT_NEAR(dispersion(0.0, 1.0), 0.0, 1e-15);
    EXPECT_NEAR(dispersion(pi / 2, 2.0), std::sqrt(5.0), 1e-15);
}

TEST(Dispersion, ZoneEdges) {
    for (double l : {0.0, 0.3, 1.0, 1.7, 4.0}) {
        EXPECT_NEAR(dispersion(0.0, l), std::abs(l - 1.0), 1e-12);
        EXPECT_NEAR(dispersion(pi, l), l + 1.0, 1e-12);
    }
}

TEST(Dispersion, MonotoneInFieldAboveCosK) {
    for (double k = 0.05; k < pi; k += 0.1) {
        const double c = std::cos(k);
        for (double l = std::max(0.0, c) + 1e-3; l < 4.0; l += 0.05) {
            const double h = 1e-6;
            EXPECT_GT(dispersion(k, l + h) - dispersion(k, l), 0.0) << "k=" << k << " l=" << l;
        }
    }
}

TEST(BogoliubovAngle, HalfZoneZeroField) {
    // numerator -1 + i
    EXPECT_NEAR(bogoliubov_angle(pi / 2, 0.0), 3 * pi / 4, 1e-15);
}

TEST(BogoliubovAngle, UpperHalfPlaneInsideZone) {
    for (double l : {0.0, 0.5, 1.0, 2.0, 10.0}) {
        const double th = bogoliubov_angle(pi / 2, l);
        EXPECT_GT(th, 0.0);
        EXPECT_LT(th, pi);
    }
}

TEST(BogoliubovAngle, ReproducesNormalizedDefinition) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> k_dist(1e-6, pi - 1e-6), l_dist(0.0, 3.0);
    for (int i = 0; i < 2000; ++i) {
        const double k = k_dist(rng), l = l_dist(rng);
        const double e = std::sqrt((l - std::cos(k)) * (l - std::cos(k)) + std::sin(k) * std::sin(k));
        const std::complex<double> num(l - e - std::cos(k), std::sin(k));
        const std::complex<double> expected = num / std::abs(num);
        const std::complex<double> got = std::polar(1.0, bogoliubov_angle(k, l));
        EXPECT_LT(std::abs(got - expected), 1e-12) << "k=" << k << " l=" << l;
    }
}

TEST(BogoliubovAngle, EdgeConvention) {
    // k = 0 with lambda < 1: real negative numerator
    EXPECT_DOUBLE_EQ(bogoliubov_angle(0.0, 0.5), pi);
    // k = 0 with lambda > 1 and k = pi: numerator vanishes
    EXPECT_THROW(bogoliubov_angle(0.0, 2.0), std::domain_error);
    EXPECT_THROW(bogoliubov_angle(pi, 0.5), std::domain_error);
}

TEST(BogoliubovAngle, ThermalCriticalModeOfCrossingQuench) {
    const double k = 0.6435;
    const double d = bogoliubov_angle(k, 0.5) - bogoliubov_angle(k, 2.0);
    EXPECT_LT(std::abs(std::cos(2 * d)), 1e-4);
}

TEST(DeltaTheta, NoQuenchIsZero) {
    const QuenchProtocol p{0.7, 0.7, 1.0, 0.3};
    for (double k = 0.01; k < pi; k += 0.1) EXPECT_DOUBLE_EQ(delta_theta(k, p), 0.0);
}

TEST(DeltaTheta, ZoneCenterLimitOfCrossingQuench) {
    // The ferromagnetic and paramagnetic ground states at k -> 0+ are the
    // filled and empty pair states; they are orthogonal, so cos(2 dtheta) -> -1.
    const QuenchProtocol p{0.5, 2.0, 1.0, 0.0};
    const double d = delta_theta(1e-7, p);
    EXPECT_NEAR(d, pi / 2, 1e-6);
    EXPECT_NEAR(std::cos(2 * d), -1.0, 1e-10);
}

TEST(DeltaTheta, CriticalModeOfCrossingQuench) {
    const QuenchProtocol p{0.5, 2.0, 1.0, 0.0};
    EXPECT_LT(std::abs(std::cos(2 * delta_theta(0.6435, p))), 1e-4);
}

TEST(DeltaTheta, ContinuousAcrossZone) {
    const QuenchProtocol protocols[] = {
        {0.5, 2.0, 1.0, 0.0}, {0.0, 0.5, 1.0, 0.0}, {1.5, 2.0, 1.0, 0.0}, {2.0, 0.2, 1.0, 0.0}, {0.9, 1.1, 1.0, 0.0},
    };
    const int n = 10000;
    for (const auto& p : protocols) {
        double prev = delta_theta(pi * 0.5 / n, p);
        for (int i = 1; i < n; ++i) {
            const double cur = delta_theta(pi * (i + 0.5) / n, p);
            ASSERT_LT(std::abs(cur - prev), 0.1) << "lambda " << p.lambda_pre << "->" << p.lambda_post;
            prev = cur;
        }
    }
}

TEST(QuenchProtocol, ValidationAndPhaseFolding) {
    EXPECT_THROW((QuenchProtocol{-0.1, 1.0, 1.0, 0.0}.validated()), std::invalid_argument);
    EXPECT_THROW((QuenchProtocol{0.1, -1.0, 1.0, 0.0}.validated()), std::invalid_argument);
    EXPECT_THROW((QuenchProtocol{0.1, 1.0, 0.0, 0.0}.validated()), std::invalid_argument);
    EXPECT_THROW((QuenchProtocol{0.1, 1.0, -infinite_beta, 0.0}.validated()), std::invalid_argument);
    EXPECT_NO_THROW((QuenchProtocol{0.1, 1.0, infinite_beta, 0.0}.validated()));
    EXPECT_DOUBLE_EQ((QuenchProtocol{0.1, 1.0, 1.0, -pi}.validated().phi), pi);
    EXPECT_NEAR((QuenchProtocol{0.1, 1.0, 1.0, 3 * pi / 2}.validated().phi), -pi / 2, 1e-15);
    EXPECT_DOUBLE_EQ((QuenchProtocol{0.1, 1.0, 1.0, pi}.validated().phi), pi);
}
