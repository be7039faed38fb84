#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dqpt/criticality.hpp"

using namespace dqpt;

namespace {

CriticalOptions no_jumps() {
    CriticalOptions o;
    o.measure_jumps = false;
    return o;
}

double closed_form_root(double l, double lp) { return std::acos((1.0 + l * lp) / (l + lp)); }

}  // namespace

TEST(FisherZeros, LinesZeroThePartitionFunction) {
    const QuenchProtocol ps[] = {
        {0.5, 2.0, 10.0, 0.0}, {0.5, 2.0, 0.1, pi / 2}, {0.0, 0.5, 1.0, -pi / 2}, {1.5, 2.0, 0.1, -pi / 2},
    };
    for (const auto& p : ps)
        for (int n : {0, 1, 2}) {
            const FisherLine line = fisher_zero_line(p, n, open_zone_grid(256));
            EXPECT_EQ(line.samples.size(), 256u);
            for (const auto& s : line.samples) {
                EXPECT_LE(s.residual, 1e-9);
                const double e = dispersion(s.k, p.lambda_post);
                EXPECT_NEAR(s.z.imag(), (2 * n + 1) * pi / (2 * e), 1e-12);
            }
        }
}

TEST(FisherZeros, ImaginaryAxisCrossingIsTemperatureIndependent) {
    const double ks = closed_form_root(0.5, 2.0);
    for (double beta : {10.0, 1.0, 0.1}) {
        const QuenchProtocol p{0.5, 2.0, beta, 0.0};
        const auto lo = fisher_zero(mode_coefficients(p, ks - 1e-4), 0);
        const auto hi = fisher_zero(mode_coefficients(p, ks + 1e-4), 0);
        ASSERT_TRUE(lo && hi);
        EXPECT_NE(std::signbit(lo->real()), std::signbit(hi->real()));
        EXPECT_TRUE(fisher_sign_change(p, ks));
    }
}

TEST(FisherZeros, NoCrossingInsideFerromagneticPhase) {
    const FisherLine line = fisher_zero_line({0.0, 0.5, 10.0, 0.0}, 0, open_zone_grid(512));
    const bool first = std::signbit(line.samples.front().z.real());
    for (const auto& s : line.samples) EXPECT_EQ(std::signbit(s.z.real()), first) << "k=" << s.k;
}

TEST(FisherZeros, GroundStateNoQuenchIsSkipped) {
    const FisherLine line = fisher_zero_line({1.2, 1.2, infinite_beta, 0.0}, 0, {0.5, 1.5});
    EXPECT_TRUE(line.samples.empty());
    EXPECT_EQ(line.skipped.size(), 2u);
}

TEST(FisherZeros, RejectsMomentaOutsideZone) {
    const QuenchProtocol p{0.5, 2.0, 1.0, 0.0};
    EXPECT_THROW(fisher_zero_line(p, 0, {}), std::invalid_argument);
    EXPECT_THROW(fisher_zero_line(p, 0, {0.0}), std::invalid_argument);
    EXPECT_THROW(fisher_zero_line(p, 0, {pi}), std::invalid_argument);
}

TEST(CriticalModes, ThermalClosedForm) {
    const double cases[][2] = {{0.5, 2.0}, {0.2, 1.3}, {2.5, 0.1}, {0.9, 1.1}, {0.0, 3.0}};
    for (const auto& q : cases)
        for (double beta : {10.0, 1.0, 0.1, infinite_beta}) {
            const QuenchProtocol p{q[0], q[1], beta, 0.0};
            for (CriticalVariant v : {CriticalVariant::consistent_sinh, CriticalVariant::printed_tanh}) {
                const auto set = critical_modes(p, v, no_jumps());
                ASSERT_EQ(set.modes.size(), 1u) << q[0] << "->" << q[1] << " beta " << beta;
                EXPECT_NEAR(set.modes[0].k_star, closed_form_root(q[0], q[1]), 1e-10);
            }
        }
}

TEST(CriticalModes, SamePhaseThermalQuenchHasNone) {
    for (double beta : {10.0, 0.1})
        for (const auto& q : {std::pair{0.0, 0.5}, std::pair{1.5, 2.0}, std::pair{3.0, 1.2}})
            EXPECT_TRUE(critical_modes({q.first, q.second, beta, 0.0}, CriticalVariant::consistent_sinh, no_jumps())
                            .modes.empty());
}

TEST(CriticalModes, RootsSatisfyInvariants) {
    const QuenchProtocol ps[] = {
        {0.5, 2.0, 1.0, pi / 2}, {0.5, 2.0, 1.0, -pi / 2}, {0.5, 2.0, 0.1, pi / 2},
        {0.5, 2.0, 0.1, -pi / 2}, {0.0, 0.5, 0.1, -pi / 2}, {1.5, 2.0, 0.1, pi / 2},
    };
    for (const auto& p : ps) {
        const auto set = critical_modes(p, CriticalVariant::consistent_sinh, no_jumps());
        EXPECT_TRUE(set.warnings.empty());
        for (const auto& m : set.modes) {
            EXPECT_LT(std::abs(m.residual), 1e-10);
            EXPECT_LT(std::abs(mode_coefficients(p, m.k_star).imbalance), 1e-10);
            EXPECT_TRUE(fisher_sign_change(p, m.k_star));
            for (std::size_t n = 0; n < m.times.size(); ++n) {
                if (n) {
                    EXPECT_GT(m.times[n], m.times[n - 1]);
                }
                EXPECT_LT(std::abs(mode_amplitude(mode_coefficients(p, m.k_star), m.times[n])), 1e-10);
            }
        }
    }
}

TEST(CriticalModes, CoherentRootValues) {
    struct Case {
        double beta, phi, k;
    };
    const Case cases[] = {{1.0, pi / 2, 0.1671911}, {1.0, -pi / 2, 1.2693206}, {0.1, pi / 2, 0.0166674},
                          {0.1, -pi / 2, 2.7086025}};
    for (const auto& c : cases) {
        const auto set = critical_modes({0.5, 2.0, c.beta, c.phi}, CriticalVariant::consistent_sinh, no_jumps());
        ASSERT_EQ(set.modes.size(), 1u);
        EXPECT_NEAR(set.modes[0].k_star, c.k, 1e-6);
    }
}

TEST(CriticalModes, TwoRootRegimeAtHighTemperature) {
    // root-count parity over beta for a same-phase quench with phi = -pi/2
    for (const auto& q : {std::pair{0.0, 0.5}, std::pair{1.5, 2.0}}) {
        auto count = [&](double beta) {
            return critical_modes({q.first, q.second, beta, -pi / 2}, CriticalVariant::consistent_sinh, no_jumps())
                .modes.size();
        };
        EXPECT_EQ(count(10.0), 0u);
        EXPECT_EQ(count(0.1), 2u);
        EXPECT_EQ(count(1.0) % 2, 0u);
    }
}

TEST(CriticalModes, TwoRootJumpsHaveOppositeSigns) {
    const auto set = critical_modes({0.0, 0.5, 0.1, -pi / 2});
    ASSERT_EQ(set.modes.size(), 2u);
    EXPECT_NEAR(set.modes[0].k_star, 0.10085, 1e-4);
    EXPECT_NEAR(set.modes[1].k_star, 2.84108, 1e-4);
    EXPECT_EQ(set.modes[0].jump_sign * set.modes[1].jump_sign, -1);
    for (const auto& m : set.modes) EXPECT_NEAR(std::abs(m.jump), 1.0, 1e-2);
}

TEST(CriticalModes, CrossingQuenchJumpsDown) {
    const auto set = critical_modes({0.5, 2.0, 10.0, 0.0});
    ASSERT_EQ(set.modes.size(), 1u);
    EXPECT_EQ(set.modes[0].jump_sign, -1);
    EXPECT_NEAR(set.modes[0].jump, -1.0, 1e-2);
}

TEST(CriticalTimes, Ladder) {
    const QuenchProtocol p{0.5, 2.0, 10.0, 0.0};
    const double ks = closed_form_root(0.5, 2.0);
    const auto ts = critical_times(p, ks, 4);
    ASSERT_EQ(ts.size(), 5u);
    EXPECT_NEAR(ts[0], pi / (2.0 * std::sqrt(1.8)), 1e-12);
    for (std::size_t n = 1; n < ts.size(); ++n) EXPECT_NEAR(ts[n] - ts[n - 1], pi / std::sqrt(1.8), 1e-12);
    EXPECT_EQ(critical_times(p, ks, 0).size(), 1u);
    EXPECT_THROW(critical_times(p, 0.0, 2), std::invalid_argument);
    EXPECT_THROW(critical_times(p, ks, -1), std::invalid_argument);
}

TEST(Variants, AgreeAtZeroPhase) {
    const auto rep = variant_report({0.5, 2.0, 1.0, 0.0});
    ASSERT_EQ(rep.roots.size(), 2u);
    EXPECT_EQ(rep.roots[0].k_star, rep.roots[1].k_star);
    EXPECT_LT(std::abs(rep.roots[0].other_residual), 1e-10);
}

TEST(Variants, AgreeAtSmallBeta) {
    // sinh x - tanh x = x^3/2 + O(x^5): the root gap shrinks like beta^3
    auto gap = [](double beta, double phi) {
        const auto a = critical_modes({0.5, 2.0, beta, phi}, CriticalVariant::consistent_sinh, no_jumps());
        const auto b = critical_modes({0.5, 2.0, beta, phi}, CriticalVariant::printed_tanh, no_jumps());
        EXPECT_EQ(a.modes.size(), 1u);
        EXPECT_EQ(b.modes.size(), 1u);
        return std::abs(a.modes.at(0).k_star - b.modes.at(0).k_star);
    };
    for (double phi : {pi / 2, -pi / 2}) {
        const double g1 = gap(0.1, phi), g2 = gap(0.01, phi);
        EXPECT_LT(g1, 1e-2) << "phi=" << phi;
        EXPECT_LT(g2, 2e-3 * g1) << "phi=" << phi;
    }
}

TEST(Variants, DisagreeAtUnitBetaAndOnlySinhIsConfirmed) {
    const auto rep = variant_report({0.5, 2.0, 1.0, -pi / 2});
    int sinh_roots = 0, tanh_roots = 0;
    for (const auto& r : rep.roots) {
        if (r.variant == CriticalVariant::consistent_sinh) {
            ++sinh_roots;
            EXPECT_TRUE(r.fisher_confirmed);
        } else {
            ++tanh_roots;
            EXPECT_FALSE(r.fisher_confirmed);
            EXPECT_GT(std::abs(r.k_star - 1.2693206), 0.05);
        }
        EXPECT_GT(std::abs(r.other_residual), 1e-3);
    }
    EXPECT_EQ(sinh_roots, 1);
    EXPECT_EQ(tanh_roots, 1);
}

TEST(Variants, Parsing) {
    EXPECT_EQ(parse_variant("sinh"), CriticalVariant::consistent_sinh);
    EXPECT_EQ(parse_variant("printed_tanh"), CriticalVariant::printed_tanh);
    EXPECT_THROW(parse_variant("cosh"), std::invalid_argument);
}
