#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "reskit/averaging.hpp"
#include "reskit/chart.hpp"
#include "reskit/dynamics.hpp"
#include "reskit/elliptic.hpp"
#include "reskit/numerics.hpp"

namespace reskit {

/// Built-in reference system: a pendulum with a dissipative/parametric
/// two-frequency perturbation,
///   x'' + sin x = eps [ (-1 + p1 cos 3x + p2 x a(t)) x' + p3 a(t) ],
///   a(t) = cos(w1 t) sin(w2 t),
/// analyzed on the oscillation cell H = y^2/2 - cos x = h, h in (-1, 1).
namespace pendulum {

// -- energy / modulus / action bridges ------------------------------------

inline double energy_from_modulus(double k) {
    if (!(k > 0.0 && k < 1.0))
        throw std::domain_error("pendulum: modulus must satisfy 0 < k < 1");
    return 2.0 * k * k - 1.0;
}

inline double modulus_from_energy(double h) {
    if (!(h > -1.0 && h < 1.0))
        throw std::domain_error("pendulum: oscillation cell requires -1 < h < 1");
    return std::sqrt(0.5 * (1.0 + h));
}

/// I(k) = (8/pi) [E - (1-k^2) K]; normalized so the cell's inner boundary
/// (k -> 0) carries zero action.
inline double action_from_modulus(double k) {
    if (!(k > 0.0 && k < 1.0))
        throw std::domain_error("pendulum: modulus must satisfy 0 < k < 1");
    return 8.0 / M_PI * (elliptic::complete_e(k) - (1.0 - k * k) * elliptic::complete_k(k));
}

inline double action_cell_max() { return 8.0 / M_PI; }

inline double omega_of_modulus(double k) { return M_PI / (2.0 * elliptic::complete_k(k)); }

/// Inverse of action_from_modulus by Newton iteration on dI/dk = 8kK/pi.
inline double modulus_from_action(double I) {
    if (!(I > 0.0 && I < action_cell_max()))
        throw std::domain_error("pendulum: action outside the oscillation cell");
    double k = std::sqrt(0.5 * I);  // exact as I -> 0
    k = std::min(0.999999, std::max(1e-9, k));
    double lo = 1e-12, hi = 1.0 - 1e-15;
    for (int it = 0; it < 200; ++it) {
        const double r = action_from_modulus(k) - I;
        if (std::fabs(r) < 1e-14 * std::max(1.0, I)) return k;
        if (r > 0.0) hi = k; else lo = k;
        const double d = 8.0 * k * elliptic::complete_k(k) / M_PI;
        double kn = k - r / d;
        if (!(kn > lo && kn < hi)) kn = 0.5 * (lo + hi);
        if (std::fabs(kn - k) < 1e-16 * std::max(1.0, k)) return k;
        k = kn;
    }
    return k;
}

// -- closed forms of the generating function and its derivatives ----------

/// p1-affine split of the generating function: B0(k; p1) = c0(k) + p1 c1(k).
struct GeneratingParts {
    double c0;
    double c1;
};

inline GeneratingParts generating_parts(double k) {
    const double K = elliptic::complete_k(k), E = elliptic::complete_e(k);
    const double k2 = k * k, k4 = k2 * k2;
    const double c0 = 8.0 / M_PI * ((1.0 - k2) * K - E);
    const double c1 = 8.0 / (105.0 * M_PI) *
                      ((1.0 - k2) * (128.0 * k4 - 80.0 * k2 + 3.0) * K +
                       (2.0 * k2 - 1.0) * (128.0 * k4 - 128.0 * k2 + 3.0) * E);
    return {c0, c1};
}

inline double generating_b0(double k, double p1) {
    const auto p = generating_parts(k);
    return p.c0 + p1 * p.c1;
}

/// B1 = dB0/dI in closed form.
inline double generating_b1(double k, double p1) {
    const double K = elliptic::complete_k(k), E = elliptic::complete_e(k);
    const double k2 = k * k, k4 = k2 * k2;
    return -(1.0 / 15.0) * (15.0 + (128.0 * k4 - 144.0 * k2 + 31.0) * p1 -
                            (256.0 * k4 - 256.0 * k2 + 46.0) * p1 * E / K);
}

/// B2 = B0''/2 in closed form.
inline double generating_b2(double k, double p1) {
    const double K = elliptic::complete_k(k), E = elliptic::complete_e(k);
    const double k2 = k * k, k4 = k2 * k2, k6 = k4 * k2;
    return p1 * M_PI / (120.0 * k2 * (1.0 - k2) * K * K * K) *
           ((384.0 * k6 - 656.0 * k4 + 295.0 * k2 - 23.0) * K * K -
            (768.0 * k6 - 1280.0 * k4 + 558.0 * k2 - 46.0) * K * E -
            (128.0 * k4 - 128.0 * k2 + 23.0) * E * E);
}

/// Chain-rule factor dk/dI = pi / (8 k K).
inline double dk_dI(double k) { return M_PI / (8.0 * k * elliptic::complete_k(k)); }

// -- closed forms of the frequency derivatives -----------------------------

inline double frequency_b1(double k) {
    const double K = elliptic::complete_k(k), E = elliptic::complete_e(k);
    const double k2 = k * k;
    return M_PI * M_PI / 16.0 * ((k2 - 1.0) * K + E) / (k2 * (k2 - 1.0) * K * K * K);
}

inline double frequency_b2(double k) {
    const double K = elliptic::complete_k(k), E = elliptic::complete_e(k);
    const double k2 = k * k, k4 = k2 * k2;
    const double K2 = K * K;
    return -std::pow(M_PI, 3) / 256.0 *
           ((k2 - 1.0) * K2 - 2.0 * (k2 - 2.0) * K * E - 3.0 * E * E) /
           (k4 * (k2 - 1.0) * (k2 - 1.0) * K2 * K2 * K);
}

inline double frequency_b3(double k) {
    const double K = elliptic::complete_k(k), E = elliptic::complete_e(k);
    const double k2 = k * k, k4 = k2 * k2, k6 = k4 * k2;
    const double K2 = K * K, K3 = K2 * K;
    const double d = k2 - 1.0;
    return std::pow(M_PI, 4) / 6144.0 *
           ((k4 + 2.0 * k2 - 3.0) * K3 - (2.0 * k4 + 3.0 * k2 - 13.0) * K2 * E +
            5.0 * (k2 - 5.0) * K * E * E + 15.0 * E * E * E) /
           (k6 * d * d * d * K3 * K3 * K);
}

// -- closed forms of the nome-series resonance coefficients (n = 3) --------

inline double coef_A1(double k) {
    const double a = elliptic::nome(k);
    const double a32 = std::pow(a, 1.5);
    return -2.0 * a32 / (1.0 + a * a * a);
}

inline double coef_sigma(double k) {
    const double a = elliptic::nome(k);
    const double a32 = std::pow(a, 1.5);
    return 2.0 * a32 / (3.0 * (1.0 + a * a * a));
}

inline double coef_P01(double k) {
    const double a = elliptic::nome(k), K = elliptic::complete_k(k);
    const double a3 = a * a * a, a32 = std::pow(a, 1.5);
    const double k2 = k * k;
    const double den = (1.0 + a3) * (1.0 + a3);
    return std::pow(M_PI, 3) / (16.0 * k2 * (1.0 - k2) * K * K * K) * 3.0 * a32 * (a3 - 1.0) /
           den;
}

inline double coef_P11(double k) {
    const double a = elliptic::nome(k);
    const double K = elliptic::complete_k(k), E = elliptic::complete_e(k);
    const double a3 = a * a * a, a6 = a3 * a3, a32 = std::pow(a, 1.5);
    const double k2 = k * k;
    const double den = (1.0 + a3) * (1.0 + a3) * (1.0 + a3);
    const double K6 = std::pow(K, 6);
    return std::pow(M_PI, 4) / (1024.0 * k2 * k2 * (1.0 - k2) * (1.0 - k2) * K6) * 3.0 * a32 /
           den *
           (4.0 * ((1.0 + k2) * K - 3.0 * E) * K * (a6 - 1.0) -
            3.0 * M_PI * M_PI * (a6 - 6.0 * a3 + 1.0));
}

inline double coef_Q01(double k) { return coef_P01(k) / 3.0; }
inline double coef_Q11(double k) { return 2.0 * coef_P11(k) / 3.0; }

// -- cached per-level chart data -------------------------------------------

namespace detail_pend {

struct Cell {
    double I;
    double k, bigk, bige, omega, b1;
    elliptic::FourierKernels kernels;

    explicit Cell(double action)
        : I(action),
          k(modulus_from_action(action)),
          bigk(elliptic::complete_k(k)),
          bige(elliptic::complete_e(k)),
          omega(M_PI / (2.0 * elliptic::complete_k(k))),
          b1(frequency_b1(k)),
          kernels(k) {}
};

inline const Cell& cell_from_action(double I) {
    thread_local std::vector<std::unique_ptr<Cell>> cache;
    thread_local std::size_t next = 0;
    for (const auto& c : cache)
        if (c->I == I) return *c;
    auto cell = std::make_unique<Cell>(I);
    const Cell* ptr = cell.get();
    constexpr std::size_t kSlots = 16;
    if (cache.size() < kSlots) {
        cache.push_back(std::move(cell));
    } else {
        cache[next] = std::move(cell);
        next = (next + 1) % kSlots;
    }
    return *ptr;
}

}  // namespace detail_pend

// -- the action-angle chart -------------------------------------------------

/// Oscillation-cell chart x = 2 asin(k sn(2K theta/pi)), y = 2k cn(2K theta/pi)
/// with action derivatives evaluated through the nome series.
inline ActionAngleChart make_chart() {
    ActionAngleChart chart;
    chart.I_range = {0.0, action_cell_max()};
    chart.omega = [](double I) { return detail_pend::cell_from_action(I).omega; };
    chart.x_of = [](double I, double th) {
        const auto& c = detail_pend::cell_from_action(I);
        const auto j = elliptic::jacobi_sn_cn_dn(2.0 * c.bigk * th / M_PI, c.k);
        return 2.0 * std::asin(c.k * j.sn);
    };
    chart.y_of = [](double I, double th) {
        const auto& c = detail_pend::cell_from_action(I);
        const auto j = elliptic::jacobi_sn_cn_dn(2.0 * c.bigk * th / M_PI, c.k);
        return 2.0 * c.k * j.cn;
    };
    chart.x_dtheta = [](double I, double th) {
        const auto& c = detail_pend::cell_from_action(I);
        const auto j = elliptic::jacobi_sn_cn_dn(2.0 * c.bigk * th / M_PI, c.k);
        return 4.0 * c.k * c.bigk / M_PI * j.cn;
    };
    chart.y_dtheta = [](double I, double th) {
        const auto& c = detail_pend::cell_from_action(I);
        const auto j = elliptic::jacobi_sn_cn_dn(2.0 * c.bigk * th / M_PI, c.k);
        return -4.0 * c.k * c.bigk / M_PI * j.sn * j.dn;
    };
    chart.x_dI = [](double I, double th) {
        return detail_pend::cell_from_action(I).kernels.x_dI(th);
    };
    chart.x_dItheta = [](double I, double th) {
        return detail_pend::cell_from_action(I).kernels.x_dI_dtheta(th);
    };
    chart.x_dII = [](double I, double th) {
        return detail_pend::cell_from_action(I).kernels.x_dII(th);
    };
    // y = omega(I) dx/dtheta, so y_I = b1 x_theta + omega x_I_theta
    chart.y_dI = [](double I, double th) {
        const auto& c = detail_pend::cell_from_action(I);
        const auto j = elliptic::jacobi_sn_cn_dn(2.0 * c.bigk * th / M_PI, c.k);
        const double xt = 4.0 * c.k * c.bigk / M_PI * j.cn;
        return c.b1 * xt + c.omega * c.kernels.x_dI_dtheta(th);
    };
    return chart;
}

// -- parameters and the perturbed system ------------------------------------

struct Params {
    double p1 = 0.0;
    double p2 = 0.0;
    double p3 = 1.0;
    double omega1 = 1.0;
    double omega2 = 1.448;
    double epsilon = 1e-3;

    void validate() const {
        if (p2 < 0.0) throw std::invalid_argument("pendulum: p2 must be >= 0");
        if (!(p3 > 0.0)) throw std::invalid_argument("pendulum: p3 must be > 0");
        if (!(epsilon > 0.0)) throw std::invalid_argument("pendulum: epsilon must be > 0");
    }
};

inline PerturbedSystem make_system(const Params& prm) {
    prm.validate();
    PerturbedSystem sys;
    sys.hamiltonian = [](double x, double y) { return 0.5 * y * y - std::cos(x); };
    sys.dH_dx = [](double x, double) { return std::sin(x); };
    sys.dH_dy = [](double, double y) { return y; };
    sys.f_field = [p1 = prm.p1, p2 = prm.p2, p3 = prm.p3](double x, double y, double t1,
                                                          double t2) {
        const double alpha = std::cos(t1) * std::sin(t2);
        return (-1.0 + p1 * std::cos(3.0 * x) + p2 * x * alpha) * y + p3 * alpha;
    };
    sys.g_field = nullptr;
    sys.omega1 = prm.omega1;
    sys.omega2 = prm.omega2;
    sys.epsilon = prm.epsilon;
    sys.domain = DomainKind::cylinder;
    return sys;
}

inline FrequencyProfile make_frequency_profile() {
    FrequencyProfile p;
    p.omega = [](double I) { return omega_of_modulus(modulus_from_action(I)); };
    p.b1 = [](double I) { return frequency_b1(modulus_from_action(I)); };
    p.b2 = [](double I) { return frequency_b2(modulus_from_action(I)); };
    p.b3 = [](double I) { return frequency_b3(modulus_from_action(I)); };
    return p;
}

/// Generating function over the action, evaluated through the closed forms.
inline GeneratingFunction make_generating_function(double p1) {
    return {[p1](double I) { return generating_b0(modulus_from_action(I), p1); },
            [p1](double I) { return generating_b1(modulus_from_action(I), p1); },
            [p1](double I) { return generating_b2(modulus_from_action(I), p1); }};
}

// -- the double-cycle bifurcation -------------------------------------------

struct DoubleCycle {
    double p1 = 0.0;
    double k = 0.0;
    double I = 0.0;
    double b2 = 0.0;  ///< generating-function curvature at the solution
};

/// Solves B0 = B1 = 0 in (p1, k): the parameter branch p1(k) = -c0/c1 from
/// the first equation is substituted into the closed-form slope, leaving a
/// scalar root problem in the modulus.
inline DoubleCycle find_double_cycle(double k_lo = 0.05, double k_hi = 0.98, int scan_n = 512) {
    auto slope_on_branch = [](double k) {
        const auto parts = generating_parts(k);
        const double p1 = -parts.c0 / parts.c1;
        return generating_b1(k, p1);
    };
    double prev_k = k_lo, prev_s = slope_on_branch(prev_k);
    for (int i = 1; i <= scan_n; ++i) {
        const double k = k_lo + (k_hi - k_lo) * i / scan_n;
        const double s = slope_on_branch(k);
        if (std::isfinite(s) && std::isfinite(prev_s) && s * prev_s < 0.0) {
            const double kstar = numerics::bisect(slope_on_branch, prev_k, k, 1e-15);
            const auto parts = generating_parts(kstar);
            const double p1 = -parts.c0 / parts.c1;
            if (std::fabs(generating_b0(kstar, p1)) < 1e-9 &&
                std::fabs(generating_b1(kstar, p1)) < 1e-9) {
                return {p1, kstar, action_from_modulus(kstar), generating_b2(kstar, p1)};
            }
        }
        prev_k = k;
        prev_s = s;
    }
    throw std::runtime_error("pendulum: no double cycle found in the scanned modulus range");
}

struct ResonanceSetup {
    double k_res = 0.0;
    double omega1 = 1.0;
    double omega2 = 0.0;
};

/// Places the (3, 1, 1) resonance level on the double-cycle level: with
/// omega1 = 1, omega2 = 3 omega(k*) - 1.
inline ResonanceSetup resonance_setup() {
    const auto dc = find_double_cycle();
    return {dc.k, 1.0, 3.0 * omega_of_modulus(dc.k) - 1.0};
}

// -- coefficient scalars of the n = 3 averaged system ------------------------

/// All scalar coefficients of the resonance-zone averaged system at one
/// modulus.  The five parametric-channel scalars are single-angle quadratures
/// of the exact action derivatives of the chart products; the remaining ones
/// are nome closed forms.
struct Coefficients {
    double A1_tilde = 0.0, A2_tilde = 0.0;
    double sigma_tilde = 0.0;
    double P01_tilde = 0.0, P02_tilde = 0.0;
    double P11_tilde = 0.0, P12_tilde = 0.0;
    double Q01 = 0.0, Q02 = 0.0, Q11 = 0.0, Q12 = 0.0;
    double B0 = 0.0, B1 = 0.0, B2 = 0.0;
    double b1 = 0.0, b2 = 0.0, b3 = 0.0;
};

struct CoefficientOptions {
    int quad_n = 1024;
    double tol = 1e-10;
};

inline Coefficients coefficients(double k, const Params& prm, CoefficientOptions opt = {}) {
    prm.validate();
    if (!(k > 0.0 && k < 1.0))
        throw std::domain_error("pendulum: modulus must satisfy 0 < k < 1");
    Coefficients c;
    c.A1_tilde = coef_A1(k);
    c.sigma_tilde = coef_sigma(k);
    c.P01_tilde = coef_P01(k);
    c.P11_tilde = coef_P11(k);
    c.Q01 = coef_Q01(k);
    c.Q11 = coef_Q11(k);
    c.B0 = generating_b0(k, prm.p1);
    c.B1 = generating_b1(k, prm.p1);
    c.B2 = generating_b2(k, prm.p1);
    c.b1 = frequency_b1(k);
    c.b2 = frequency_b2(k);
    c.b3 = frequency_b3(k);

    const elliptic::FourierKernels kern(k);
    const double om = omega_of_modulus(k);
    const double b1 = c.b1, b2 = c.b2;

    // products of the chart angle map; y = om * x_theta on the cell
    auto quad = [&](auto&& fn) {
        int n = opt.quad_n;
        double prev = numerics::periodic_trapezoid(fn, 0.0, 2.0 * M_PI, n);
        for (int round = 0; round < 4; ++round) {
            const double cur = numerics::periodic_trapezoid(fn, 0.0, 2.0 * M_PI, 2 * n);
            if (std::fabs(cur - prev) < opt.tol * std::max(1.0, std::fabs(cur))) return cur;
            prev = cur;
            n *= 2;
        }
        return prev;
    };

    // A2 = (1/4 pi om) int x y^2 sin 3theta = (om/4 pi) int x x_t^2 sin 3theta
    c.A2_tilde = quad([&](double th) {
                     const double x = kern.x(th), xt = kern.x_dtheta(th);
                     return x * xt * xt * std::sin(3.0 * th);
                 }) *
                 om / (4.0 * M_PI);
    // P02 = (1/4 pi) int d/dI (om x x_t^2) sin 3theta
    c.P02_tilde = quad([&](double th) {
                      const double x = kern.x(th), xt = kern.x_dtheta(th);
                      const double xi = kern.x_dI(th), xit = kern.x_dI_dtheta(th);
                      const double d = b1 * x * xt * xt +
                                       om * (xi * xt * xt + 2.0 * x * xt * xit);
                      return d * std::sin(3.0 * th);
                  }) /
                  (4.0 * M_PI);
    // P12 = (1/8 pi) int d^2/dI^2 (om x x_t^2) sin 3theta
    c.P12_tilde = quad([&](double th) {
                      const double x = kern.x(th), xt = kern.x_dtheta(th);
                      const double xi = kern.x_dI(th), xit = kern.x_dI_dtheta(th);
                      const double xii = kern.x_dII(th), xiit = kern.x_dII_dtheta(th);
                      const double d = 2.0 * b2 * x * xt * xt +
                                       2.0 * b1 * (xi * xt * xt + 2.0 * x * xt * xit) +
                                       om * (xii * xt * xt + 4.0 * xi * xt * xit +
                                             2.0 * x * (xit * xit + xt * xiit));
                      return d * std::sin(3.0 * th);
                  }) /
                  (8.0 * M_PI);
    // Q02 = (1/4 pi) int x y x_I cos 3theta = (om/4 pi) int x x_t x_I cos 3theta
    c.Q02 = quad([&](double th) {
                const double x = kern.x(th), xt = kern.x_dtheta(th), xi = kern.x_dI(th);
                return x * xt * xi * std::cos(3.0 * th);
            }) *
            om / (4.0 * M_PI);
    // Q12 = (1/4 pi) int d/dI (om x x_t x_I) cos 3theta
    c.Q12 = quad([&](double th) {
                const double x = kern.x(th), xt = kern.x_dtheta(th);
                const double xi = kern.x_dI(th), xit = kern.x_dI_dtheta(th);
                const double xii = kern.x_dII(th);
                const double d = b1 * x * xt * xi +
                                 om * (xi * xi * xt + x * xit * xi + x * xt * xii);
                return d * std::cos(3.0 * th);
            }) /
            (4.0 * M_PI);
    return c;
}

// -- assembly into the generic averaged-system types -------------------------

/// Resonance-zone coefficient functions of the n = 3 averaged system as
/// single-harmonic series, from the closed forms and single-angle quadratures.
inline ResonanceCoefficients make_resonance_coefficients(double k, const Params& prm,
                                                         double gamma1 = 0.0,
                                                         double gamma2 = 0.0) {
    const Coefficients c = coefficients(k, prm);
    ResonanceCoefficients rc;
    rc.index = {3, 1, 1};
    rc.I_res = action_from_modulus(k);
    const double w = 3.0;
    rc.A = {w, c.B0, {prm.p2 * c.A2_tilde}, {prm.p3 * c.A1_tilde}};
    rc.P0 = {w, c.B1, {prm.p2 * c.P02_tilde}, {prm.p3 * c.P01_tilde}};
    rc.Q0 = {w, 0.0, {prm.p3 * c.Q01}, {prm.p2 * c.Q02}};
    rc.P1 = {w, c.B2, {prm.p2 * c.P12_tilde}, {prm.p3 * c.P11_tilde}};
    rc.Q1 = {w, 0.0, {prm.p3 * c.Q11}, {prm.p2 * c.Q12}};
    rc.b1 = c.b1;
    rc.b2 = c.b2;
    rc.b3 = c.b3;
    rc.mu = std::sqrt(prm.epsilon);
    rc.gamma1 = gamma1;
    rc.gamma2 = gamma2;
    return rc;
}

/// The averaged model at a resonance level; defaults to the double-cycle
/// level k* so that both generating-function means vanish.
inline AveragedModel make_averaged_model(const Params& prm, double gamma1 = 0.0,
                                         double gamma2 = 0.0,
                                         ModelForm form = ModelForm::full,
                                         double k_level = 0.0) {
    const double k = k_level > 0.0 ? k_level : find_double_cycle().k;
    AveragedModel model;
    model.coeffs = make_resonance_coefficients(k, prm, gamma1, gamma2);
    model.form = form;
    return model;
}

}  // namespace pendulum
}  // namespace reskit
