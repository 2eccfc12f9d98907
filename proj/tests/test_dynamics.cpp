#include "reskit/dynamics.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "reskit/pendulum.hpp"
#include "reskit/simulate.hpp"

using namespace reskit;
namespace pend = reskit::pendulum;

namespace {

// A hand-built single-harmonic coefficient set for synthetic models.
ResonanceCoefficients synthetic_coeffs(int n, double b1, double a_sin, double a_cos,
                                       double b2_mean, double mu) {
    ResonanceCoefficients rc;
    rc.index = {n, 1, 0};
    rc.I_res = 1.0;
    const double w = n;
    rc.A = {w, 0.0, {a_cos}, {a_sin}};
    rc.P0 = {w, 0.0, {}, {}};
    rc.Q0 = {w, 0.0, {}, {}};
    rc.P1 = {w, b2_mean, {}, {}};
    rc.Q1 = {w, 0.0, {}, {}};
    rc.b1 = b1;
    rc.mu = mu;
    return rc;
}

pend::Params reference_params(double p2 = 0.0, double eps = 0.04) {
    pend::Params prm;
    prm.p1 = pend::find_double_cycle().p1;
    prm.p2 = p2;
    prm.p3 = 1.0;
    prm.omega1 = 1.0;
    prm.omega2 = pend::resonance_setup().omega2;
    prm.epsilon = eps;
    return prm;
}

}  // namespace

TEST(AveragedRhs, DualPathAgreement) {
    // the closed-form assembly and the generic torus-quadrature assembly must
    // produce the same vector field
    auto prm = reference_params(0.8);
    prm.p3 = 1.3;
    const double k = pend::resonance_setup().k_res;
    AveragedModel closed;
    closed.coeffs = pend::make_resonance_coefficients(k, prm, 0.1, -0.2);
    closed.form = ModelForm::full;

    ResonanceOptions opt;
    opt.profile = pend::make_frequency_profile();
    opt.gamma1 = 0.1;
    opt.gamma2 = -0.2;
    AveragedModel generic;
    generic.coeffs =
        resonance_coefficients(pend::make_system(prm), pend::make_chart(), {3, 1, 1},
                               pend::action_from_modulus(k), prm.epsilon, opt);
    generic.form = ModelForm::full;

    numerics::UniformRng rng(42);
    for (int i = 0; i < 20; ++i) {
        const double v = rng.range(0.0, 2.0 * M_PI);
        const double u = rng.range(-2.0, 2.0);
        const auto a = closed.rhs(v, u);
        const auto b = generic.rhs(v, u);
        EXPECT_NEAR(a.du, b.du, 1e-8) << "v=" << v << " u=" << u;
        EXPECT_NEAR(a.dv, b.dv, 1e-8) << "v=" << v << " u=" << u;
    }
}

TEST(AveragedRhs, SymmetricAndFullFormsAgreeAtSmallMu) {
    // the conservative coupling dropped by the reduced form is O(mu): the
    // two vector fields converge as mu -> 0
    auto prm = reference_params();
    for (double mu : {0.1, 0.05}) {
        prm.epsilon = mu * mu;
        auto full = pend::make_averaged_model(prm, 0, 0, ModelForm::full);
        auto sym = pend::make_averaged_model(prm, 0, 0, ModelForm::symmetric);
        double worst = 0.0;
        for (double v : {0.3, 1.2, 2.7})
            for (double u : {-0.4, 0.25}) {
                const auto a = full.rhs(v, u);
                const auto b = sym.rhs(v, u);
                worst = std::max(worst,
                                 std::fabs(a.du - b.du) + std::fabs(a.dv - b.dv));
            }
        EXPECT_LT(worst, 1.5 * mu);  // linear in mu
    }
}

TEST(FindEquilibria, SymmetricPendulumAlternatingChain) {
    const auto model = pend::make_averaged_model(reference_params(), 0, 0, ModelForm::symmetric);
    const auto eqs = find_equilibria(model);
    ASSERT_EQ(eqs.size(), 6u);
    int saddles = 0, centers = 0;
    for (std::size_t i = 0; i < eqs.size(); ++i) {
        EXPECT_NEAR(eqs[i].u, 0.0, 1e-9);
        EXPECT_NEAR(eqs[i].v, i * M_PI / 3.0, 1e-8);
        const auto r = model.rhs(eqs[i].v, eqs[i].u);
        EXPECT_LT(std::fabs(r.du) + std::fabs(r.dv), 1e-10);
        if (eqs[i].kind == EquilibriumKind::saddle) ++saddles;
        if (eqs[i].kind == EquilibriumKind::center) ++centers;
        // alternating along the chain
        if (i > 0) {
            EXPECT_NE(eqs[i].kind == EquilibriumKind::saddle,
                      eqs[i - 1].kind == EquilibriumKind::saddle);
        }
    }
    EXPECT_EQ(saddles, 3);
    EXPECT_EQ(centers, 3);
}

TEST(FindEquilibria, SaddleCenterSignRule) {
    // at mu = 0 the kind is decided by the sign of b1 * A'(v0)
    auto model = pend::make_averaged_model(reference_params(0.7), 0, 0, ModelForm::full);
    model.coeffs.mu = 0.0;
    const auto eqs = find_equilibria(model);
    ASSERT_GE(eqs.size(), 4u);
    for (const auto& e : eqs) {
        const double crit = model.coeffs.b1 * model.coeffs.A.deriv(e.v);
        if (crit > 0.0) {
            EXPECT_EQ(e.kind, EquilibriumKind::saddle) << "v=" << e.v;
        } else {
            EXPECT_EQ(e.kind, EquilibriumKind::center) << "v=" << e.v;
        }
    }
}

TEST(FindEquilibria, LargeDetuningEmptiesTheZone) {
    // |B0_eff| above the A_tilde amplitude leaves no equilibria: passable
    auto prm = reference_params();
    const double amp = prm.p3 * std::fabs(pend::coef_A1(pend::resonance_setup().k_res));
    const double gamma1 = 2.0 * amp / std::sqrt(prm.epsilon);
    const auto model = pend::make_averaged_model(prm, gamma1, 0.0, ModelForm::full);
    EXPECT_TRUE(find_equilibria(model).empty());
    const auto pp = classify_portrait(model);
    EXPECT_EQ(pp.taxonomy, Passability::passable);
}

TEST(FindEquilibria, ParametricChannelTurnsCentersIntoFoci) {
    const auto model = pend::make_averaged_model(reference_params(2.0), 0, 0, ModelForm::full);
    const auto eqs = find_equilibria(model);
    int foci = 0, saddles = 0;
    for (const auto& e : eqs) {
        if (e.kind == EquilibriumKind::focus_stable) ++foci;
        if (e.kind == EquilibriumKind::saddle) ++saddles;
    }
    EXPECT_EQ(saddles, 3);
    EXPECT_EQ(foci, 3);
}

TEST(FindEquilibria, SyntheticSignRule) {
    // A = sin(3v), b1 > 0: saddle at v = 0, center at v = pi/3
    AveragedModel model;
    model.coeffs = synthetic_coeffs(3, 0.5, 1.0, 0.0, 0.0, 0.0);
    model.form = ModelForm::symmetric;
    const auto eqs = find_equilibria(model);
    ASSERT_EQ(eqs.size(), 6u);
    EXPECT_EQ(eqs[0].kind, EquilibriumKind::saddle);
    EXPECT_NEAR(eqs[0].v, 0.0, 1e-9);
    EXPECT_EQ(eqs[1].kind, EquilibriumKind::center);
    EXPECT_NEAR(eqs[1].v, M_PI / 3.0, 1e-9);
}

TEST(Melnikov, ZeroPerturbationKeepsTheDoubleLoop) {
    AveragedModel model;
    model.coeffs = synthetic_coeffs(3, -0.4, 0.02, 0.0, 0.0, 0.1);
    model.form = ModelForm::symmetric;
    const auto mel = melnikov_delta1(model);
    EXPECT_NEAR(mel.delta1, 0.0, 1e-12);
    EXPECT_EQ(mel.classification, SplittingKind::double_loop_bifurcation);
    EXPECT_NEAR(mel.potential_gap(0.0), 0.0, 1e-14);
}

TEST(Melnikov, PendulumAgainstIndependentQuadrature) {
    // independent oracle: assemble the loop integrand from the closed-form
    // scalars and integrate it by adaptive Simpson
    const auto model = pend::make_averaged_model(reference_params(), 0, 0, ModelForm::symmetric);
    const auto mel = melnikov_delta1(model);

    const double k = pend::resonance_setup().k_res;
    const auto c = pend::coefficients(k, reference_params());
    const double b1 = c.b1, b2 = c.b2, b3 = c.b3;
    const double p3 = 1.0;
    auto A = [&](double v) { return p3 * c.A1_tilde * std::sin(3.0 * v); };
    auto P0 = [&](double v) { return p3 * c.P01_tilde * std::sin(3.0 * v); };
    auto P1 = [&](double v) { return p3 * c.P11_tilde * std::sin(3.0 * v); };
    auto Q0 = [&](double v) { return p3 * c.Q01 * std::cos(3.0 * v); };
    auto Q1 = [&](double v) { return p3 * c.Q11 * std::cos(3.0 * v); };
    auto Q1p = [&](double v) { return -3.0 * p3 * c.Q11 * std::sin(3.0 * v); };
    auto M = [&](double v) {
        return (P1(v) + Q1p(v) + (b2 / b1) * P0(v) + 3.0 * (b3 / b1) * A(v)) / b1 + c.B2 / b1;
    };
    auto N = [&](double v) { return -P0(v) * Q0(v) + (Q1(v) - 2.0 * (b2 / b1) * Q0(v)) * A(v); };
    const double v0 = mel.saddle_v0;
    auto gap = [&](double w) {
        return oracles::integrate([&](double s) { return A(v0 + s); }, 0.0, w, 1e-14);
    };
    const double period = 2.0 * M_PI / 3.0;
    const double oracle = oracles::integrate(
        [&](double w) { return 2.0 * b1 * M(v0 + w) * gap(w) + N(v0 + w); }, 0.0, period,
        1e-13) / b1;
    EXPECT_NEAR(mel.delta1, oracle, 1e-9);

    // the dissipative channel alone leaves only the curvature-mean term:
    // delta1 = 2 (B2 / b1) * loop area integral of the potential gap
    const double theta_int =
        oracles::integrate([&](double w) { return gap(w); }, 0.0, period, 1e-13);
    EXPECT_NEAR(mel.delta1, 2.0 * c.B2 / b1 * theta_int, 1e-9);
    EXPECT_EQ(mel.delta1 > 0.0, c.B2 > 0.0);  // the loop factor 2 theta/b1 is positive here
}

TEST(Melnikov, RequiresSymmetricRegime) {
    const auto model = pend::make_averaged_model(reference_params(2.0), 0, 0, ModelForm::full);
    EXPECT_THROW(melnikov_delta1(model), std::logic_error);
}

TEST(Melnikov, ShootingCrossCheck) {
    auto prm = reference_params();
    prm.epsilon = 0.0025;  // mu = 0.05
    const auto model = pend::make_averaged_model(prm, 0, 0, ModelForm::symmetric);
    const auto mel = melnikov_delta1(model);
    const auto gap = measure_separatrix_gap(model);
    const double mu = model.coeffs.mu;
    EXPECT_GT(gap.energy_gap * mel.delta1, 0.0);  // signs agree
    EXPECT_NEAR(gap.energy_gap / (mu * mu * mel.delta1), 1.0, 0.05);
}

TEST(LimitCycles, NoneInTheHamiltonianTruncation) {
    auto model = pend::make_averaged_model(reference_params(), 0, 0, ModelForm::symmetric);
    model.coeffs.mu = 0.0;
    EXPECT_TRUE(find_limit_cycles(model).empty());
}

TEST(LimitCycles, ConstantSignSigmaMirroredPair) {
    // with a constant-sign divergence the rotational cycle sits on the upper
    // or lower half-cylinder with opposite stability, by the detuning sign
    auto prm = reference_params();
    const auto up = pend::make_averaged_model(prm, 0.05, 0.5, ModelForm::full);
    const auto cyc_up = find_limit_cycles(up);
    ASSERT_EQ(cyc_up.size(), 1u);
    EXPECT_EQ(cyc_up[0].location, CycleLocation::upper_half);
    EXPECT_TRUE(cyc_up[0].stable);
    EXPECT_LT(std::fabs(cyc_up[0].multiplier), 1.0);

    const auto down = pend::make_averaged_model(prm, 0.05, -0.5, ModelForm::full);
    const auto cyc_down = find_limit_cycles(down);
    ASSERT_EQ(cyc_down.size(), 1u);
    EXPECT_EQ(cyc_down[0].location, CycleLocation::lower_half);
    EXPECT_FALSE(cyc_down[0].stable);
    EXPECT_GT(std::fabs(cyc_down[0].multiplier), 1.0);
}

TEST(LimitCycles, OscillatoryRegionCycleWithAlternatingSigma) {
    auto prm = reference_params(2.0);
    auto model = pend::make_averaged_model(prm, 0.0, -0.005, ModelForm::full);
    model.B2_override = -0.1;
    const auto cycles = find_limit_cycles(model);
    int oscillatory = 0;
    for (const auto& c : cycles)
        if (c.location == CycleLocation::oscillatory) ++oscillatory;
    EXPECT_EQ(oscillatory, 3);  // one around each focus on the full cylinder
    for (const auto& c : cycles) EXPECT_FALSE(c.stable);
}

TEST(LimitCycles, ReportedCyclesCloseToTolerance) {
    // re-integrate a detected cycle over one period and check closure
    auto prm = reference_params(2.0);
    auto model = pend::make_averaged_model(prm, 0, 0, ModelForm::full);
    model.B2_override = 1e-4;
    const auto cycles = find_limit_cycles(model);
    ASSERT_FALSE(cycles.empty());
    for (const auto& c : cycles) {
        Rk45<2> st([&model](double, const std::array<double, 2>& y, std::array<double, 2>& d) {
            const auto r = model.rhs(y[0], y[1]);
            d[0] = r.dv;
            d[1] = r.du;
        }, OdeOptions{1e-12, 1e-12});
        st.start(0.0, {c.v_section, c.u_section});
        while (st.t() < c.period && st.step()) {}
        const auto y = st.dense(c.period);
        EXPECT_LT(std::fabs(std::remainder(y[0] - c.v_section, 2.0 * M_PI / 3.0)), 1e-6);
        EXPECT_LT(std::fabs(y[1] - c.u_section), 1e-6);
    }
}

TEST(TimeReversal, SymmetricTrajectoriesMirror) {
    // with sigma_tilde = 0 and zero means, the flow through (v0, -u0) is the
    // time reversal of the flow through (v0, u0)
    const auto model = pend::make_averaged_model(reference_params(), 0, 0, ModelForm::symmetric);
    auto fwd = [&model](double, const std::array<double, 2>& y, std::array<double, 2>& d) {
        const auto r = model.rhs(y[0], y[1]);
        d[0] = r.dv;
        d[1] = r.du;
    };
    auto bwd = [&model](double, const std::array<double, 2>& y, std::array<double, 2>& d) {
        const auto r = model.rhs(y[0], y[1]);
        d[0] = -r.dv;
        d[1] = -r.du;
    };
    const double v0 = 0.4, u0 = 0.3, T = 6.0;
    Rk45<2> a(fwd, {1e-11, 1e-11}), b(bwd, {1e-11, 1e-11});
    a.start(0.0, {v0, u0});
    b.start(0.0, {v0, -u0});
    for (double t = 0.5; t <= T; t += 0.5) {
        while (a.t() < t) ASSERT_TRUE(a.step());
        while (b.t() < t) ASSERT_TRUE(b.step());
        const auto ya = a.dense(t), yb = b.dense(t);
        EXPECT_NEAR(ya[0], yb[0], 1e-8) << "t=" << t;
        EXPECT_NEAR(ya[1], -yb[1], 1e-8) << "t=" << t;
    }
}

TEST(EnergyDrift, ScalesLinearlyInMu) {
    // short-window drift of the reduced energy along a rotational orbit
    auto drift_for = [](double mu) {
        auto prm = reference_params(6.0);
        prm.epsilon = mu * mu;
        auto model = pend::make_averaged_model(prm, 0, 0, ModelForm::symmetric);
        model.B2_override = 0.0;  // isolate the first-order divergence term
        const double amp = model.separatrix_amplitude();
        Rk45<2> st([&model](double, const std::array<double, 2>& y, std::array<double, 2>& d) {
            const auto r = model.rhs(y[0], y[1]);
            d[0] = r.dv;
            d[1] = r.du;
        }, OdeOptions{1e-12, 1e-12});
        const double v0 = 0.3, u0 = 1.5 * amp;
        auto energy = [&](double v, double u) {
            return 0.5 * model.coeffs.b1 * u * u - model.potential(v);
        };
        st.start(0.0, {v0, u0});
        const double T = 0.3;  // short window: the divergence keeps one sign
        while (st.t() < T) {
            if (!st.step()) break;
        }
        const auto y = st.dense(T);
        return (energy(y[0], y[1]) - energy(v0, u0)) / T;
    };
    const double r1 = drift_for(0.02), r2 = drift_for(0.05), r3 = drift_for(0.1);
    EXPECT_GT(std::fabs(r1), 0.0);
    EXPECT_NEAR(r2 / r1, 2.5, 2.5 * 0.5);   // within a factor 1.5 of linear
    EXPECT_NEAR(r3 / r2, 2.0, 2.0 * 0.5);
}

TEST(Portrait, SevenRegimeSmokeCheck) {
    // light versions of the documented regimes (full set in the acceptance
    // suite): the symmetric split and the alternating capture
    auto prm = reference_params();
    auto natural = pend::make_averaged_model(prm, 0, 0, ModelForm::symmetric);
    PortraitOptions fast;
    fast.grid_v = fast.grid_u = 8;
    fast.horizon = 120.0;
    const auto a = classify_portrait(natural, fast);
    EXPECT_EQ(a.taxonomy, Passability::partly_passable);
    EXPECT_EQ(a.figure, "1a");

    auto frozen = natural;
    frozen.B2_override = 0.0;
    const auto b = classify_portrait(frozen, fast);
    EXPECT_EQ(b.taxonomy, Passability::impassable);
    EXPECT_EQ(b.figure, "1b");
    ASSERT_TRUE(b.delta1.has_value());
    EXPECT_NEAR(*b.delta1, 0.0, 1e-9);
}

TEST(FullSystem, ActionConservedWithoutPerturbation) {
    auto prm = reference_params();
    auto sys = pend::make_system(prm);
    sys.f_field = nullptr;  // pure Hamiltonian flow
    const auto chart = pend::make_chart();
    const double I0 = pend::action_from_modulus(0.5);
    SimulateOptions opt;
    opt.ode = {1e-11, 1e-11};
    opt.I_seed = I0;
    opt.theta_seed = 0.3;
    const auto tr = integrate_full_system(sys, chart, chart.x_of(I0, 0.3), chart.y_of(I0, 0.3),
                                          1000.0, opt);
    EXPECT_FALSE(tr.exited);
    const auto rep = drift_report(tr, I0, 3);
    EXPECT_LT(rep.max_abs_dI, 1e-8);
}

TEST(FullSystem, PassableBandDriftsThroughTheSlowPhase) {
    auto prm = reference_params(2.0);
    prm.epsilon = 1e-3;
    const auto sys = pend::make_system(prm);
    const auto chart = pend::make_chart();
    const double I_res = pend::find_double_cycle().I;
    const double I0 = I_res - 2.0 * std::sqrt(prm.epsilon);
    SimulateOptions opt;
    opt.I_seed = I0;
    opt.theta_seed = 0.2;
    const auto tr = integrate_full_system(sys, chart, chart.x_of(I0, 0.2), chart.y_of(I0, 0.2),
                                          2000.0, opt);
    const auto rep = drift_report(tr, I_res, 3);
    EXPECT_TRUE(rep.crossed_full_period);
}
