#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "dqpt/mode_dynamics.hpp"
#include "reference.hpp"

using namespace dqpt;

TEST(ThermalFactors, FiniteAndInfiniteBeta) {
    const auto f = thermal_factors(2.0, 0.75);
    EXPECT_NEAR(f.tanh_x, std::tanh(1.5), 1e-15);
    EXPECT_NEAR(f.sech_x, 1.0 / std::cosh(1.5), 1e-15);
    EXPECT_NEAR(f.exp_neg, std::exp(-1.5), 1e-15);
    const auto g = thermal_factors(infinite_beta, 0.75);
    EXPECT_EQ(g.tanh_x, 1.0);
    EXPECT_EQ(g.sech_x, 0.0);
    const auto big = thermal_factors(1e3, 4.0);
    EXPECT_EQ(big.tanh_x, 1.0);
    EXPECT_GE(big.sech_x, 0.0);
    EXPECT_TRUE(std::isfinite(big.sech_x));
}

TEST(ModeAmplitude, MatchesReferenceEvolution) {
    ref::Sampler s(20261016);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const QuenchProtocol p = s.protocol();
        const double k = s.momentum(), t = s.uniform(0.0, 20.0);
        const complex closed = mode_amplitude(mode_coefficients(p, k), t);
        worst = std::max(worst, std::abs(closed - ref::amplitude(p, k, t)));
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(ModeAmplitude, LibraryOracleAgreesWithReference) {
    ref::Sampler s(99);
    for (int i = 0; i < 2000; ++i) {
        const QuenchProtocol p = s.protocol();
        const double k = s.momentum(), t = s.uniform(0.0, 20.0);
        ASSERT_LE(std::abs(mode_amplitude_oracle(p, k, t) - ref::amplitude(p, k, t)), 1e-12);
    }
}

TEST(ModeAmplitude, GroundStateQuench) {
    // beta = inf: A_k = cos(2 dtheta), the pure-state Loschmidt amplitude
    const QuenchProtocol p{0.5, 2.0, infinite_beta, 0.0};
    for (double k : {0.1, 0.6435, 1.7, 3.0}) {
        const auto c = mode_coefficients(p, k);
        EXPECT_NEAR(c.imbalance, std::cos(2.0 * c.delta_theta), 1e-15);
        for (double t : {0.0, 0.8, 3.3})
            EXPECT_LE(std::abs(mode_amplitude(c, t) - ref::amplitude(p, k, t)), 1e-12);
    }
}

TEST(ModeAmplitude, UnitAtZeroBoundedAndPeriodic) {
    ref::Sampler s(5);
    for (int i = 0; i < 1000; ++i) {
        const QuenchProtocol p = s.protocol();
        const auto c = mode_coefficients(p, s.momentum());
        EXPECT_EQ(mode_amplitude(c, 0.0), complex(1.0, 0.0));
        const double t = s.uniform(0.0, 20.0);
        EXPECT_LE(std::abs(mode_amplitude(c, t)), 1.0 + 1e-15);
        EXPECT_NEAR(mode_echo(c, t), std::norm(mode_amplitude(c, t)), 1e-14);
        const double period = 2.0 * pi / c.eps_post;
        EXPECT_LE(std::abs(mode_amplitude(c, t + period) - mode_amplitude(c, t)), 1e-11);
    }
}

TEST(Weights, NonnegativeNormalizedAndTiedToImbalance) {
    ref::Sampler s(11);
    for (int i = 0; i < 5000; ++i) {
        const QuenchProtocol p = s.protocol();
        const auto c = mode_coefficients(p, s.momentum());
        EXPECT_GE(c.weight_plus, 0.0);
        EXPECT_GE(c.weight_minus, 0.0);
        EXPECT_NEAR(c.weight_plus + c.weight_minus, 1.0, 1e-14);
        EXPECT_NEAR(c.weight_minus - c.weight_plus, c.imbalance, 1e-14);
    }
}

TEST(Weights, ProjectionsOntoPostQuenchLevels) {
    ref::Sampler s(12);
    for (int i = 0; i < 1000; ++i) {
        const QuenchProtocol p = s.protocol();
        const double k = s.momentum();
        const auto c = mode_coefficients(p, k);
        const auto [plus, minus] = ref::eigenbasis(ref::hamiltonian(k, p.lambda_post));
        const ref::Vec psi = ref::coherent_gibbs(p, k);
        EXPECT_NEAR(std::norm(plus.dot(psi)), c.weight_plus, 1e-12);
        EXPECT_NEAR(std::norm(minus.dot(psi)), c.weight_minus, 1e-12);
    }
}

TEST(PostQuenchEnergy, MatchesExpectationValue) {
    ref::Sampler s(13);
    for (int i = 0; i < 1000; ++i) {
        const QuenchProtocol p = s.protocol();
        const double k = s.momentum();
        const ref::Vec psi = ref::coherent_gibbs(p, k);
        const double expected = psi.dot(ref::hamiltonian(k, p.lambda_post) * psi).real();
        EXPECT_NEAR(post_quench_energy(mode_coefficients(p, k)), expected, 1e-12);
        EXPECT_NEAR(oracle::post_quench_energy(p, k), expected, 1e-12);
    }
}

TEST(ThermalLimit, CrossTermsCancelAtZeroPhase) {
    // <+|U|-> + <-|U|+> vanishes at phi = 0, so the coherent amplitude is the
    // thermal generalized Loschmidt amplitude sum_s p_s <s|U|s>.
    ref::Sampler s(21);
    for (int i = 0; i < 1000; ++i) {
        QuenchProtocol p = s.protocol();
        p.phi = 0.0;
        const double k = s.momentum(), t = s.uniform(0.0, 20.0);
        const auto u = oracle::pre_quench_elements(p, k, t);
        EXPECT_LE(std::abs(u[0][1] + u[1][0]), 1e-12);

        const auto [pp, pm] = oracle::populations(p, k);
        const complex thermal = pp * u[0][0] + pm * u[1][1];
        EXPECT_LE(std::abs(thermal - mode_amplitude(mode_coefficients(p, k), t)), 1e-12);
    }
}

TEST(ThermalLimit, InterferenceSurvivesAtNonzeroPhase) {
    const QuenchProtocol p{0.5, 2.0, 0.1, -pi / 2};
    const auto d = null_work_decomposition(p, 1.0, 0.7);
    EXPECT_GT(std::abs(d.interference), 1e-3);
}

TEST(BoundaryPartition, UnityAtOriginAndEchoOnImaginaryAxis) {
    const QuenchProtocol p{0.3, 1.4, 2.0, 0.9};
    const auto c = mode_coefficients(p, 1.1);
    EXPECT_NEAR(std::abs(boundary_partition(c, 0.0) - 1.0), 0.0, 1e-15);
    for (double t : {0.2, 1.5, 7.0})
        EXPECT_LE(std::abs(boundary_partition(c, complex{0.0, t}) - mode_amplitude(c, t)), 1e-14);
    EXPECT_THROW(boundary_partition(c, complex{1e3, 0.0}), std::range_error);
}

TEST(BoundaryPartition, MatchesMatrixExponentialAtComplexTime) {
    ref::Sampler s(31);
    for (int i = 0; i < 500; ++i) {
        const QuenchProtocol p = s.protocol();
        const double k = s.momentum();
        const complex z{s.uniform(-2.0, 2.0), s.uniform(0.0, 5.0)};
        const ref::Vec psi = ref::coherent_gibbs(p, k);
        const ref::Mat e = (-z * ref::hamiltonian(k, p.lambda_post)).exp();
        const complex expected = psi.dot(e * psi);
        const complex got = boundary_partition(mode_coefficients(p, k), z);
        EXPECT_LE(std::abs(got - expected), 1e-11 * std::max(1.0, std::abs(expected)));
    }
}

TEST(NullWork, DecompositionIdentity) {
    ref::Sampler s(41);
    for (int i = 0; i < 2000; ++i) {
        const QuenchProtocol p = s.protocol();
        const double k = s.momentum(), t = s.uniform(0.0, 20.0);
        const auto d = null_work_decomposition(p, k, t);
        EXPECT_NEAR(d.null_work_prob + d.interference, d.echo, 1e-12);
        EXPECT_NEAR(d.echo, mode_echo(mode_coefficients(p, k), t), 1e-12);
        EXPECT_GE(d.null_work_prob, -1e-15);
        EXPECT_LE(d.null_work_prob, 1.0 + 1e-12);
    }
}

TEST(NullWork, GroundStateHasNoInterference) {
    const QuenchProtocol p{0.5, 2.0, infinite_beta, 1.0};
    for (double t : {0.3, 1.17, 2.5}) EXPECT_LE(std::abs(null_work_decomposition(p, 0.9, t).interference), 1e-14);
}

TEST(NullWork, NoQuenchIsPureDephasing) {
    // lambda' = lambda: the pre-quench levels are stationary, echo = |sum p e^{-iEt}|^2
    const QuenchProtocol p{1.3, 1.3, 0.7, 0.0};
    const double k = 0.8, t = 2.2;
    const auto d = null_work_decomposition(p, k, t);
    EXPECT_NEAR(d.null_work_prob, 1.0, 1e-13);
    const double e = dispersion(k, 1.3);
    const auto [pp, pm] = oracle::populations(p, k);
    EXPECT_NEAR(d.echo, std::norm(pp * std::polar(1.0, -e * t) + pm * std::polar(1.0, e * t)), 1e-13);
}

TEST(ImbalanceRoots, CrossingQuenchSingleRoot) {
    const auto roots = imbalance_roots({0.5, 2.0, 1.0, 0.0});
    ASSERT_EQ(roots.size(), 1u);
    EXPECT_NEAR(roots[0].x, std::acos(0.8), 1e-12);
}
