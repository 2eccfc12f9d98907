#include "reskit/pendulum.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

using namespace reskit;
namespace pend = reskit::pendulum;

// Reference values computed independently at 30 significant digits
// (arbitrary-precision evaluation of the closed forms and quadratures).
namespace frozen {
constexpr double kStar = 0.759188852752;
constexpr double p1Star = -8.48093328534;
constexpr double omega2 = 1.44822081505;
constexpr double omegaStar = 0.816073605016;
constexpr double actionStar = 1.26232096478;
constexpr double b1Star = -0.175609946218;
constexpr double b2Star = -0.0352858308051;
constexpr double b3Star = -0.0149142055311;
constexpr double B2Star = -3.87339942438;
constexpr double A1Star = -0.0247288515866;
constexpr double A2Star = 0.28518037404;
constexpr double sigmaStar = 0.00824295052886;
constexpr double P01Star = -0.0412697349131;
constexpr double P02Star = 0.375397841905;
constexpr double P11Star = -0.026361937024;
constexpr double Q01Star = -0.0137565783044;
constexpr double Q02Star = -0.122384963792;
constexpr double Q11Star = -0.0175746246826;
}  // namespace frozen

TEST(DoubleCycle, HeadlineBifurcationValues) {
    const auto dc = pend::find_double_cycle();
    EXPECT_NEAR(dc.p1, frozen::p1Star, 1e-8);
    EXPECT_NEAR(dc.k, frozen::kStar, 1e-8);
    EXPECT_NEAR(dc.p1, -8.481, 1e-3);
    EXPECT_NEAR(dc.k, 0.759, 1e-3);
    EXPECT_NEAR(dc.I, frozen::actionStar, 1e-8);
    EXPECT_NEAR(dc.b2, frozen::B2Star, 1e-8);
    EXPECT_NE(dc.b2, 0.0);
    // the double-root conditions themselves
    EXPECT_NEAR(pend::generating_b0(dc.k, dc.p1), 0.0, 1e-10);
    EXPECT_NEAR(pend::generating_b1(dc.k, dc.p1), 0.0, 1e-6);
}

TEST(ResonanceSetupTest, ForcingFrequencyPair) {
    const auto rs = pend::resonance_setup();
    EXPECT_NEAR(rs.omega2, frozen::omega2, 1e-9);
    EXPECT_NEAR(rs.omega2, 1.448, 1e-3);
    EXPECT_NEAR(pend::omega_of_modulus(rs.k_res), frozen::omegaStar, 1e-9);
    EXPECT_NEAR(3.0 * pend::omega_of_modulus(rs.k_res) - rs.omega1 - rs.omega2, 0.0, 1e-12);
    EXPECT_NEAR(pend::omega_of_modulus(rs.k_res), (rs.omega1 + rs.omega2) / 3.0, 1e-12);
}

TEST(GeneratingClosedForms, SmallModulusTaylor) {
    // B0 -> (-2 + 2 p1) k^2 as k -> 0
    const double p1 = -8.481;
    for (double k : {1e-3, 3e-3}) {
        EXPECT_NEAR(pend::generating_b0(k, p1) / (k * k), -2.0 + 2.0 * p1, 100.0 * k * k);
    }
}

TEST(GeneratingClosedForms, DerivativeConsistency) {
    // B1 = (pi / 8kK) dB0/dk, B2 = (pi / 16kK) dB1/dk
    const double p1 = -8.481;
    for (double k : {0.3, 0.5, 0.759, 0.9}) {
        auto b0k = [p1](double kk) { return pend::generating_b0(kk, p1); };
        const double b1_fd = pend::dk_dI(k) * oracles::derivative(b0k, k, 1e-5);
        EXPECT_NEAR(pend::generating_b1(k, p1), b1_fd, 1e-7) << "k=" << k;
        auto b1k = [p1](double kk) { return pend::generating_b1(kk, p1); };
        const double b2_fd = 0.5 * pend::dk_dI(k) * oracles::derivative(b1k, k, 1e-5);
        EXPECT_NEAR(pend::generating_b2(k, p1), b2_fd, 1e-7) << "k=" << k;
    }
}

TEST(FrequencyClosedForms, ChainRuleConsistency) {
    for (double k : {0.3, 0.5, 0.759, 0.9}) {
        auto om = [](double kk) { return pend::omega_of_modulus(kk); };
        EXPECT_NEAR(pend::frequency_b1(k), pend::dk_dI(k) * oracles::derivative(om, k, 1e-5),
                    1e-9)
            << "k=" << k;
        auto b1k = [](double kk) { return pend::frequency_b1(kk); };
        EXPECT_NEAR(pend::frequency_b2(k),
                    0.5 * pend::dk_dI(k) * oracles::derivative(b1k, k, 1e-5), 1e-9)
            << "k=" << k;
        auto b2k = [](double kk) { return pend::frequency_b2(kk); };
        EXPECT_NEAR(pend::frequency_b3(k),
                    pend::dk_dI(k) * oracles::derivative(b2k, k, 1e-5) / 3.0, 1e-9)
            << "k=" << k;
    }
}

TEST(Coefficients, FrozenReferenceValues) {
    pend::Params prm;
    prm.p1 = frozen::p1Star;
    const auto c = pend::coefficients(frozen::kStar, prm);
    EXPECT_NEAR(c.A1_tilde, frozen::A1Star, 1e-9);
    EXPECT_NEAR(c.sigma_tilde, frozen::sigmaStar, 1e-9);
    EXPECT_NEAR(c.P01_tilde, frozen::P01Star, 1e-9);
    EXPECT_NEAR(c.P11_tilde, frozen::P11Star, 1e-9);
    EXPECT_NEAR(c.Q01, frozen::Q01Star, 1e-9);
    EXPECT_NEAR(c.Q11, frozen::Q11Star, 1e-9);
    EXPECT_NEAR(c.b1, frozen::b1Star, 1e-9);
    EXPECT_NEAR(c.b2, frozen::b2Star, 1e-9);
    EXPECT_NEAR(c.b3, frozen::b3Star, 1e-9);
    EXPECT_NEAR(c.B2, frozen::B2Star, 1e-8);
    EXPECT_NEAR(c.B0, 0.0, 1e-9);
    EXPECT_NEAR(c.B1, 0.0, 1e-6);
    // quadrature coefficients
    EXPECT_NEAR(c.A2_tilde, frozen::A2Star, 1e-8);
    EXPECT_NEAR(c.Q02, frozen::Q02Star, 1e-8);
    EXPECT_NEAR(c.P02_tilde, frozen::P02Star, 1e-8);
}

TEST(Coefficients, ExactRatiosAndDivergenceIdentity) {
    pend::Params prm;
    prm.p1 = -8.0;
    for (double k : {0.3, 0.5, frozen::kStar}) {
        const auto c = pend::coefficients(k, prm);
        EXPECT_DOUBLE_EQ(c.Q01, c.P01_tilde / 3.0);
        EXPECT_DOUBLE_EQ(c.Q11, 2.0 * c.P11_tilde / 3.0);
        // sigma = P02 + 3 Q02: the mean-free divergence assembled two ways
        EXPECT_NEAR(c.sigma_tilde, c.P02_tilde + 3.0 * c.Q02, 1e-9) << "k=" << k;
    }
}

TEST(Coefficients, FiniteAndContinuousAcrossTheCell) {
    pend::Params prm;
    prm.p1 = -8.481;
    double prev[6] = {};
    bool have_prev = false;
    for (int i = 0; i <= 34; ++i) {
        const double k = 0.10 + (0.95 - 0.10) * i / 34.0;
        const auto c = pend::coefficients(k, prm);
        const double vals[6] = {c.A1_tilde, c.P01_tilde, c.P11_tilde, c.B1, c.B2, c.b3};
        for (int j = 0; j < 6; ++j) {
            ASSERT_TRUE(std::isfinite(vals[j])) << "k=" << k << " coef " << j;
            ASSERT_LT(std::fabs(vals[j]), 1e4) << "k=" << k << " coef " << j;
            if (have_prev) {
                ASSERT_LT(std::fabs(vals[j] - prev[j]), 2.0 + 0.5 * std::fabs(prev[j]))
                    << "jump at k=" << k << " coef " << j;
            }
        }
        std::copy(std::begin(vals), std::end(vals), std::begin(prev));
        have_prev = true;
    }
}

TEST(AveragedModelAssembly, ParametricChannelDropsOutWithoutP2) {
    pend::Params prm;
    prm.p1 = frozen::p1Star;
    prm.p2 = 0.0;
    prm.p3 = 1.0;
    const auto rc = pend::make_resonance_coefficients(frozen::kStar, prm);
    EXPECT_DOUBLE_EQ(rc.A.ac[0], 0.0);
    EXPECT_DOUBLE_EQ(rc.P0.ac[0], 0.0);
    EXPECT_DOUBLE_EQ(rc.Q0.as[0], 0.0);
    EXPECT_DOUBLE_EQ(rc.P1.ac[0], 0.0);
    EXPECT_DOUBLE_EQ(rc.Q1.as[0], 0.0);
    // sigma_tilde vanishes identically: Q01 = P01/3 cancels the sine channel
    for (double v : {0.3, 1.0, 2.2}) {
        EXPECT_NEAR(rc.sigma_tilde(v), 0.0, 1e-14);
    }
}

TEST(AveragedModelAssembly, LeadingOrderTruncation) {
    pend::Params prm;
    prm.p1 = frozen::p1Star;
    prm.p2 = 0.7;
    prm.p3 = 1.2;
    auto model = pend::make_averaged_model(prm);
    model.coeffs.mu = 0.0;  // leading order only
    const auto& c = model.coeffs;
    const auto scalars = pend::coefficients(frozen::kStar, prm);
    for (double v : {0.0, 0.4, 1.9}) {
        for (double u : {-0.8, 0.3}) {
            const auto r = model.rhs(v, u);
            const double expect_du = prm.p3 * scalars.A1_tilde * std::sin(3.0 * v) +
                                     prm.p2 * scalars.A2_tilde * std::cos(3.0 * v) + scalars.B0;
            EXPECT_NEAR(r.du, expect_du, 1e-12);
            EXPECT_NEAR(r.dv, c.b1 * u, 1e-12);
        }
    }
}

TEST(AveragedModelAssembly, SymmetricFormReversibility) {
    pend::Params prm;
    prm.p1 = frozen::p1Star;
    prm.p2 = 0.0;
    prm.p3 = 1.0;
    prm.epsilon = 0.01;
    const auto model = pend::make_averaged_model(prm, 0.0, 0.0, ModelForm::symmetric);
    for (double v : {0.2, 1.0, 2.5}) {
        for (double u : {0.15, 0.6}) {
            const auto a = model.rhs(v, u);
            const auto b = model.rhs(v, -u);
            EXPECT_NEAR(a.du, b.du, 1e-14);  // even in u
            EXPECT_NEAR(a.dv, -b.dv, 1e-14); // odd in u
        }
    }
}

TEST(AveragedModelAssembly, SymmetricFormRequiresVanishingMeans) {
    pend::Params prm;
    prm.p1 = -5.0;  // away from the double-cycle parameter: B0, B1 != 0
    const auto model = pend::make_averaged_model(prm, 0.0, 0.0, ModelForm::symmetric, 0.5);
    EXPECT_THROW(model.validate(), std::invalid_argument);
}
