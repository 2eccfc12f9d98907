#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reskit/chart.hpp"
#include "reskit/numerics.hpp"

namespace reskit {

/// Generating function of the torus-averaged autonomous system and its first
/// two scaled derivatives:  b1 = B0', b2 = B0''/2, all as functions of the
/// action.  Simple roots of b0 seed limit cycles of the averaged autonomous
/// flow; a double root marks a semistable (double) cycle.
struct GeneratingFunction {
    std::function<double(double)> b0;
    std::function<double(double)> b1;
    std::function<double(double)> b2;
};

struct QuadratureOptions {
    int torus_n0 = 64;       ///< initial nodes per torus direction
    int torus_nmax = 1024;   ///< doubling cap
    double torus_tol = 1e-10;
    int theta_n = 256;       ///< nodes for single-angle averages
    int v_samples = 32;      ///< slow-phase samples per fundamental period
    double fd_step = 5e-4;   ///< action finite-difference step, relative to cell width
};

namespace detail_avg {

/// Torus average (1/4 pi^2) int int q(theta1, theta2) with node doubling.
template <typename Q>
double torus_average(Q&& q, const QuadratureOptions& opt) {
    int n = opt.torus_n0;
    auto value = [&](int nn) {
        double s = 0.0;
        const double h = 2.0 * M_PI / nn;
        for (int i = 0; i < nn; ++i)
            for (int j = 0; j < nn; ++j) s += q(i * h, j * h);
        return s / (static_cast<double>(nn) * nn);
    };
    double prev = value(n);
    while (n < opt.torus_nmax) {
        n *= 2;
        const double cur = value(n);
        if (std::fabs(cur - prev) < opt.torus_tol * std::max(1.0, std::fabs(cur))) return cur;
        prev = cur;
    }
    return prev;
}

}  // namespace detail_avg

/// Builds the generating function for the torus-averaged perturbation:
///   b0(I) = (1/2 pi) int [ f0 X_theta' - g0 Y_theta' ] dtheta,
/// with f0, g0 the forcing-phase averages of f, g.  b1 and b2 come from
/// Richardson-extrapolated differences of b0 in the action.
inline GeneratingFunction generating_function(const PerturbedSystem& sys,
                                              const ActionAngleChart& chart,
                                              QuadratureOptions opt = {}) {
    auto b0 = [sys, chart, opt](double I) {
        chart.require_in_range(I);
        auto integrand = [&](double theta) {
            const double x = chart.x_of(I, theta), y = chart.y_of(I, theta);
            double f0 = 0.0, g0 = 0.0;
            if (sys.f_field)
                f0 = detail_avg::torus_average(
                    [&](double t1, double t2) { return sys.f_field(x, y, t1, t2); }, opt);
            if (sys.g_field)
                g0 = detail_avg::torus_average(
                    [&](double t1, double t2) { return sys.g_field(x, y, t1, t2); }, opt);
            return f0 * chart.x_dtheta(I, theta) - g0 * chart.y_dtheta(I, theta);
        };
        return numerics::periodic_trapezoid(integrand, 0.0, 2.0 * M_PI, opt.theta_n) /
               (2.0 * M_PI);
    };
    const double w = chart.I_range.width();
    const double h = opt.fd_step * w;
    auto b0f = std::function<double(double)>(b0);
    auto b1 = [b0f, h](double I) { return numerics::diff1(b0f, I, h); };
    auto b2 = [b0f, h](double I) { return numerics::diff2(b0f, I, 10.0 * h) / 2.0; };
    return {b0f, b1, b2};
}

struct SimpleRoot {
    double u = 0.0;       ///< root of b0
    double slope = 0.0;   ///< b1 at the root
    bool stable = false;  ///< slope < 0
};

/// All sign-change roots of gf.b0 on the open interval, located on a scan
/// grid and refined by bisection with Newton acceleration.
inline std::vector<SimpleRoot> find_simple_roots(const GeneratingFunction& gf,
                                                 const Interval& range, int scan_n = 512) {
    std::vector<SimpleRoot> roots;
    const double margin = 1e-6 * range.width();
    const double lo = range.lo + margin, hi = range.hi - margin;
    double prev_u = lo, prev_f = gf.b0(prev_u);
    for (int i = 1; i <= scan_n; ++i) {
        const double u = lo + (hi - lo) * i / scan_n;
        const double f = gf.b0(u);
        if (prev_f == 0.0) {
            roots.push_back({prev_u, gf.b1(prev_u), gf.b1(prev_u) < 0.0});
        } else if (f * prev_f < 0.0) {
            const double r = numerics::newton_bisect(gf.b0, gf.b1, prev_u, u,
                                                     0.5 * (prev_u + u), 1e-12);
            roots.push_back({r, gf.b1(r), gf.b1(r) < 0.0});
        }
        prev_u = u;
        prev_f = f;
    }
    return roots;
}

struct DoubleRoot {
    double p = 0.0;          ///< parameter value at the double root
    double u = 0.0;          ///< action location of the double root
    double b2 = 0.0;         ///< curvature B0''/2 at the solution
    bool degenerate = false; ///< |b2| below tolerance: higher-order root
};

/// Solves b0(p, u) = 0 and d b0/d u (p, u) = 0 simultaneously for a family of
/// generating functions parameterized by p.  For each scan point u the inner
/// equation b0 = 0 is solved for p (secant; exact in one step for families
/// affine in p), then the slope along that branch is scanned for a sign
/// change and polished by a 2D Newton iteration with differenced Jacobian.
inline DoubleRoot find_double_root(const std::function<double(double, double)>& b0_of,
                                   double p_guess, const Interval& u_range,
                                   int scan_n = 256, double b2_tol = 1e-9) {
    const double margin = 0.02 * u_range.width();
    const double lo = u_range.lo + margin, hi = u_range.hi - margin;
    const double hu = 1e-5 * u_range.width();

    auto p_branch = [&](double u) {
        double pa = p_guess, pb = p_guess + std::max(1.0, std::fabs(p_guess));
        double fa = b0_of(pa, u), fb = b0_of(pb, u);
        for (int it = 0; it < 80; ++it) {
            if (fb == fa) break;
            const double pn = pb - fb * (pb - pa) / (fb - fa);
            pa = pb; fa = fb;
            pb = pn; fb = b0_of(pb, u);
            if (std::fabs(fb) < 1e-14 * std::max(1.0, std::fabs(pb))) break;
        }
        return pb;
    };
    auto slope_on_branch = [&](double u) {
        const double p = p_branch(u);
        return numerics::diff1([&](double uu) { return b0_of(p, uu); }, u, hu);
    };

    double found_u = NAN;
    double prev_u = lo, prev_s = slope_on_branch(prev_u);
    for (int i = 1; i <= scan_n && std::isnan(found_u); ++i) {
        const double u = lo + (hi - lo) * i / scan_n;
        const double s = slope_on_branch(u);
        if (s * prev_s < 0.0)
            found_u = numerics::bisect(slope_on_branch, prev_u, u, 1e-12);
        prev_u = u;
        prev_s = s;
    }
    if (std::isnan(found_u))
        throw std::runtime_error("find_double_root: no double root located in the scan range");

    // 2D Newton polish on (b0, b0_u)(p, u), with steps damped to stay inside
    // the scan interval
    double u = found_u, p = p_branch(found_u);
    const double hp = 1e-7 * std::max(1.0, std::fabs(p));
    for (int it = 0; it < 40; ++it) {
        const double r1 = b0_of(p, u);
        const double r2 = numerics::diff1([&](double uu) { return b0_of(p, uu); }, u, hu);
        if (std::fabs(r1) < 1e-14 && std::fabs(r2) < 1e-12) break;
        const double j11 = (b0_of(p + hp, u) - b0_of(p - hp, u)) / (2.0 * hp);
        const double j12 = r2;
        const double j21 = numerics::diff1(
            [&](double uu) { return (b0_of(p + hp, uu) - b0_of(p - hp, uu)) / (2.0 * hp); }, u, hu);
        const double j22 =
            numerics::diff2([&](double uu) { return b0_of(p, uu); }, u, 10.0 * hu);
        const double det = j11 * j22 - j12 * j21;
        if (det == 0.0) break;
        const double dp = (j22 * r1 - j12 * r2) / det;
        const double du = (-j21 * r1 + j11 * r2) / det;
        double lambda = 1.0;
        while (lambda > 1e-6 && !(u - lambda * du > lo && u - lambda * du < hi)) lambda *= 0.5;
        p -= lambda * dp;
        u -= lambda * du;
    }
    const double b2 =
        numerics::diff2([&](double uu) { return b0_of(p, uu); }, u, 20.0 * hu) / 2.0;
    return {p, u, b2, std::fabs(b2) < b2_tol};
}

/// Resonance index n omega(I) = m1 omega1 + m2 omega2 with coprime entries.
struct ResonanceIndex {
    int n = 1;
    int m1 = 1;
    int m2 = 0;

    void validate() const {
        if (n < 1) throw std::invalid_argument("ResonanceIndex: n must be >= 1");
        const int g = std::gcd(std::gcd(std::abs(n), std::abs(m1)), std::abs(m2));
        if (g != 1) throw std::invalid_argument("ResonanceIndex: n, m1, m2 must be coprime");
    }
};

/// Locates the resonance action by monotone bisection of
/// n omega(I) - (m1 omega1 + m2 omega2) over the cell.  Requires a strictly
/// monotone frequency profile; the degenerate constant-frequency case is
/// rejected.
inline double solve_resonance(const FrequencyProfile& profile, const ResonanceIndex& idx,
                              double omega1, double omega2, const Interval& I_range) {
    idx.validate();
    const double target = (idx.m1 * omega1 + idx.m2 * omega2) / idx.n;
    const double margin = 1e-9 * I_range.width();
    const double lo = I_range.lo + margin, hi = I_range.hi - margin;
    const double wlo = profile.omega(lo), whi = profile.omega(hi);
    if (std::fabs(whi - wlo) < 1e-12 * std::max(std::fabs(wlo), 1.0))
        throw std::invalid_argument(
            "solve_resonance: frequency profile is degenerate (constant omega)");
    if ((target - wlo) * (target - whi) > 0.0)
        throw std::out_of_range("solve_resonance: target frequency outside the cell range");
    auto f = [&](double I) { return profile.omega(I) - target; };
    double I = numerics::bisect(f, lo, hi, 1e-15 * I_range.width());
    // final Newton sharpening against the n-scaled residual
    for (int it = 0; it < 8; ++it) {
        const double r = idx.n * profile.omega(I) - idx.n * target;
        if (std::fabs(r) < 1e-13) break;
        const double d = idx.n * profile.b1(I);
        if (d == 0.0) break;
        const double In = I - r / d;
        if (In > lo && In < hi) I = In; else break;
    }
    return I;
}

/// Mean and mean-free part of a periodic function, split by periodic
/// quadrature.
inline std::pair<double, std::function<double(double)>> mean_free_decompose(
    const std::function<double(double)>& fn, double period, double tol = 1e-12) {
    const double mean = numerics::integrate_periodic(fn, 0.0, period, tol) / period;
    auto tilde = [fn, mean](double v) { return fn(v) - mean; };
    return {mean, tilde};
}

/// Everything the resonance-zone averaged system needs, frozen at one
/// resonance level: the five coefficient functions as trigonometric series in
/// the slow phase (full series; means are the generating-function values),
/// the frequency derivatives, and the scaled detunings.
struct ResonanceCoefficients {
    ResonanceIndex index;
    double I_res = 0.0;
    numerics::FourierSeries A, P0, Q0, P1, Q1;
    double b1 = 0.0, b2 = 0.0, b3 = 0.0;
    double mu = 0.0;      ///< sqrt(epsilon)
    double gamma1 = 0.0;  ///< detuning added to the A-mean as mu*gamma1
    double gamma2 = 0.0;  ///< detuning added to the P0-mean as mu*gamma2

    double B0() const { return A.mean(); }
    double B1() const { return P0.mean(); }
    double B2() const { return P1.mean(); }
    double B0_eff() const { return B0() + mu * gamma1; }
    double B1_eff() const { return B1() + mu * gamma2; }

    double A_tilde(double v) const { return A.eval_tilde(v); }
    double P0_tilde(double v) const { return P0.eval_tilde(v); }
    double P1_tilde(double v) const { return P1.eval_tilde(v); }
    double sigma_tilde(double v) const { return P0.eval_tilde(v) + Q0.deriv(v); }
    double sigma(double v) const { return sigma_tilde(v) + B1_eff(); }

    double fundamental_period() const { return 2.0 * M_PI / index.n; }

    /// Detects the near-coincidence of the resonance level with a double-root
    /// level of the generating function, which makes the higher-order terms
    /// of the averaged system mandatory.
    bool coincident(double tol = 1e-6) const {
        return std::fabs(B0()) < tol && std::fabs(B1()) < tol;
    }
};

struct ResonanceOptions {
    QuadratureOptions quad;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    std::optional<FrequencyProfile> profile;  ///< closed-form override
};

/// Assembles the resonance-zone coefficients at I_res by tensor-product
/// periodic quadrature over the forcing torus, sampled across one fundamental
/// period of the slow phase and converted to trigonometric series.  Action
/// derivatives of the angular right-hand sides are Richardson-extrapolated
/// central differences evaluated through the chart.
inline ResonanceCoefficients resonance_coefficients(const PerturbedSystem& sys,
                                                    const ActionAngleChart& chart,
                                                    const ResonanceIndex& idx, double I_res,
                                                    double epsilon,
                                                    ResonanceOptions opt = {}) {
    idx.validate();
    chart.require_in_range(I_res);
    const auto& q = opt.quad;
    const int n = idx.n;
    const double span = 2.0 * M_PI * n;

    // Five action levels for Richardson first/second differences.
    const double h = q.fd_step * chart.I_range.width();
    if (!chart.I_range.contains(I_res - 2.0 * h) || !chart.I_range.contains(I_res + 2.0 * h))
        throw std::domain_error("resonance_coefficients: resonance level too close to the cell edge");
    const std::array<double, 5> levels = {I_res, I_res + h, I_res - h, I_res + 0.5 * h,
                                          I_res - 0.5 * h};

    const int m = q.v_samples;
    std::vector<double> sA(m), sP0(m), sQ0(m), sP1(m), sQ1(m);

    // The torus grid is chosen as a multiple of n so that the lattice of
    // chart angles theta = v + (m1 t1 + m2 t2)/n repeats exactly; chart data
    // can then be tabulated per level on N distinct angles.
    int N = q.torus_n0;
    N += (n - N % n) % n;

    auto compute = [&](int NN, int iv) {
        const double v = iv * (2.0 * M_PI / n) / m;
        const double hh = span / NN;
        // tabulate F and G per level on the theta lattice x forcing grid
        struct LevelTab {
            std::vector<double> x, y, xt, yt, xi, yi;
        };
        std::array<LevelTab, 5> tab;
        for (int l = 0; l < 5; ++l) {
            const double I = levels[l];
            auto& t = tab[l];
            t.x.resize(NN); t.y.resize(NN); t.xt.resize(NN);
            t.yt.resize(NN); t.xi.resize(NN); t.yi.resize(NN);
            for (int i = 0; i < NN; ++i) {
                const double theta = v + 2.0 * M_PI * i / NN;
                t.x[i] = chart.x_of(I, theta);
                t.y[i] = chart.y_of(I, theta);
                t.xt[i] = chart.x_dtheta(I, theta);
                t.yt[i] = chart.y_dtheta(I, theta);
                t.xi[i] = chart.x_dI(I, theta);
                t.yi[i] = chart.y_dI(I, theta);
            }
        }
        double aF = 0.0, aG = 0.0, aF1 = 0.0, aF2 = 0.0, aG1 = 0.0;
        for (int i = 0; i < NN; ++i) {
            for (int j = 0; j < NN; ++j) {
                const double t1 = i * hh, t2 = j * hh;
                // lattice index of theta = v + (m1 t1 + m2 t2)/n on the NN-grid
                const long idx_theta = ((static_cast<long>(idx.m1) * i +
                                         static_cast<long>(idx.m2) * j) % NN + NN) % NN;
                std::array<double, 5> F{}, G{};
                for (int l = 0; l < 5; ++l) {
                    const auto& t = tab[l];
                    const double x = t.x[idx_theta], y = t.y[idx_theta];
                    const double f = sys.f_field ? sys.f_field(x, y, t1, t2) : 0.0;
                    const double g = sys.g_field ? sys.g_field(x, y, t1, t2) : 0.0;
                    F[l] = f * t.xt[idx_theta] - g * t.yt[idx_theta];
                    G[l] = -f * t.xi[idx_theta] + g * t.yi[idx_theta];
                }
                aF += F[0];
                aG += G[0];
                // Richardson first derivative
                const double dF_h = (F[1] - F[2]) / (2.0 * h);
                const double dF_h2 = (F[3] - F[4]) / h;
                aF1 += (4.0 * dF_h2 - dF_h) / 3.0;
                const double dG_h = (G[1] - G[2]) / (2.0 * h);
                const double dG_h2 = (G[3] - G[4]) / h;
                aG1 += (4.0 * dG_h2 - dG_h) / 3.0;
                // Richardson second derivative
                const double s_h = (F[1] - 2.0 * F[0] + F[2]) / (h * h);
                const double s_h2 = (F[3] - 2.0 * F[0] + F[4]) / (0.25 * h * h);
                aF2 += (4.0 * s_h2 - s_h) / 3.0;
            }
        }
        const double inv = 1.0 / (static_cast<double>(NN) * NN);
        sA[iv] = aF * inv;
        sP0[iv] = aF1 * inv;
        sQ0[iv] = aG * inv;
        sP1[iv] = 0.5 * aF2 * inv;
        sQ1[iv] = aG1 * inv;
    };

    // Doubling convergence check on the torus grid, probed at one slow phase.
    std::vector<double> probe_hist;
    while (true) {
        compute(N, 0);
        probe_hist.push_back(sA[0]);
        if (probe_hist.size() >= 2) {
            const double d = std::fabs(probe_hist.end()[-1] - probe_hist.end()[-2]);
            if (d < q.torus_tol * std::max(1.0, std::fabs(sA[0]))) break;
        }
        if (2 * N > q.torus_nmax)
            throw std::runtime_error("resonance_coefficients: torus quadrature did not converge");
        N *= 2;
    }
    for (int iv = 0; iv < m; ++iv) compute(N, iv);

    ResonanceCoefficients rc;
    rc.index = idx;
    rc.I_res = I_res;
    rc.A = numerics::fit_fourier(sA, static_cast<double>(n));
    rc.P0 = numerics::fit_fourier(sP0, static_cast<double>(n));
    rc.Q0 = numerics::fit_fourier(sQ0, static_cast<double>(n));
    rc.P1 = numerics::fit_fourier(sP1, static_cast<double>(n));
    rc.Q1 = numerics::fit_fourier(sQ1, static_cast<double>(n));
    FrequencyProfile prof = opt.profile ? *opt.profile
                                        : frequency_profile_from_chart(chart, sys.hamiltonian);
    rc.b1 = prof.b1(I_res);
    rc.b2 = prof.b2(I_res);
    rc.b3 = prof.b3(I_res);
    rc.mu = std::sqrt(epsilon);
    rc.gamma1 = opt.gamma1;
    rc.gamma2 = opt.gamma2;
    return rc;
}

}  // namespace reskit
