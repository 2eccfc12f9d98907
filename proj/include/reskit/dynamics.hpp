#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "reskit/averaging.hpp"
#include "reskit/ode.hpp"

namespace reskit {

/// Which truncation of the resonance-zone averaged system to integrate:
/// `full` keeps every assembled term through second order in mu; `symmetric`
/// is the reduced form valid when both generating-function means vanish
/// (it drops the conservative quadratic coupling in the phase equation).
enum class ModelForm { full, symmetric };

inline const char* to_string(ModelForm f) {
    return f == ModelForm::full ? "full" : "symmetric";
}

/// The averaged system on the phase cylinder {v mod 2 pi, u}.
struct AveragedModel {
    ResonanceCoefficients coeffs;
    ModelForm form = ModelForm::full;
    /// Replaces the mean of the quadratic coefficient (the curvature of the
    /// generating function) in every assembled term; used to probe the
    /// degenerate-splitting regime that the natural parameter values miss.
    std::optional<double> B2_override;

    double B2v() const { return B2_override ? *B2_override : coeffs.B2(); }

    void validate() const {
        if (coeffs.b1 == 0.0)
            throw std::invalid_argument("AveragedModel: b1 must be nonzero");
        if (form == ModelForm::symmetric &&
            (std::fabs(coeffs.B0_eff()) > 1e-9 || std::fabs(coeffs.B1_eff()) > 1e-9))
            throw std::invalid_argument(
                "AveragedModel: the symmetric form requires vanishing effective means "
                "(B0_eff, B1_eff = 0)");
    }

    /// Quadratic-in-velocity coefficient of the reduced second-order form.
    double mel_m(double v) const {
        const auto& c = coeffs;
        return (c.P1_tilde(v) + c.Q1.deriv(v) +
                (c.b2 / c.b1) * (c.P0_tilde(v) + c.sigma_tilde(v)) +
                3.0 * (c.b3 / c.b1) * c.A_tilde(v)) /
                   c.b1 +
               B2v() / c.b1;
    }

    /// Velocity-independent coefficient of the reduced second-order form.
    double mel_n(double v) const {
        const auto& c = coeffs;
        return -c.P0_tilde(v) * c.Q0.eval(v) +
               (c.Q1.eval(v) - 2.0 * (c.b2 / c.b1) * c.Q0.eval(v)) * c.A_tilde(v);
    }

    /// Potential of the leading-order pendulum-like truncation, normalized to
    /// vanish at v = 0:  V(v) = int_0^v A_tilde.
    double potential(double v) const { return coeffs.A.antideriv_tilde(v); }

    struct Rates {
        double du;
        double dv;
    };

    Rates rhs(double v, double u) const {
        const auto& c = coeffs;
        const double mu = c.mu;
        if (form == ModelForm::symmetric) {
            const double du = c.A_tilde(v) + mu * c.sigma_tilde(v) * u +
                              mu * mu / c.b1 *
                                  (mel_m(v) * c.b1 * c.b1 * u * u + mel_n(v));
            return {du, c.b1 * u};
        }
        const double du =
            c.A_tilde(v) + c.B0_eff() + mu * (c.sigma_tilde(v) + c.B1_eff()) * u +
            mu * mu *
                ((c.P1_tilde(v) + B2v() + (c.b2 / c.b1) * c.Q0.deriv(v)) * u * u -
                 c.P0_tilde(v) * c.Q0.eval(v) / c.b1);
        const double dv =
            c.b1 * u + mu * c.b2 * u * u +
            mu * mu * (c.b3 * u * u * u +
                       (c.Q1.eval(v) - 2.0 * (c.b2 / c.b1) * c.Q0.eval(v)) * u);
        return {du, dv};
    }

    /// Amplitude scale of the unperturbed separatrix band, from the range of
    /// the leading-order potential.
    double separatrix_amplitude(int grid = 256) const {
        double vmin = 0.0, vmax = 0.0;
        for (int i = 0; i < grid; ++i) {
            const double p = potential(2.0 * M_PI * i / grid);
            vmin = std::min(vmin, p);
            vmax = std::max(vmax, p);
        }
        const double dv = vmax - vmin;
        return dv > 0.0 ? std::sqrt(2.0 * dv / std::fabs(coeffs.b1)) : 0.0;
    }

    /// Max amplitude of the mean-free divergence coefficient; zero means the
    /// phase portrait is symmetric under (u, tau) -> (-u, -tau).
    double sigma_tilde_amplitude(int grid = 128) const {
        double m = 0.0;
        for (int i = 0; i < grid; ++i)
            m = std::max(m, std::fabs(coeffs.sigma_tilde(2.0 * M_PI * i / grid)));
        return m;
    }
};

inline AveragedModel::Rates averaged_rhs(const AveragedModel& model, double v, double u) {
    return model.rhs(v, u);
}

enum class EquilibriumKind {
    center,
    saddle,
    focus_stable,
    focus_unstable,
    node_stable,
    node_unstable
};

inline const char* to_string(EquilibriumKind k) {
    switch (k) {
        case EquilibriumKind::center: return "center";
        case EquilibriumKind::saddle: return "saddle";
        case EquilibriumKind::focus_stable: return "stable focus";
        case EquilibriumKind::focus_unstable: return "unstable focus";
        case EquilibriumKind::node_stable: return "stable node";
        case EquilibriumKind::node_unstable: return "unstable node";
    }
    return "?";
}

struct Equilibrium {
    double v = 0.0;  ///< on [0, 2 pi)
    double u = 0.0;
    EquilibriumKind kind = EquilibriumKind::center;
    std::complex<double> eig1, eig2;
    bool attracting() const {
        return kind == EquilibriumKind::focus_stable || kind == EquilibriumKind::node_stable;
    }
};

namespace detail_dyn {

struct Jet {
    double a11, a12, a21, a22;  // Jacobian of (du, dv) w.r.t. (v, u) columns (v,u)
};

inline Jet jacobian(const AveragedModel& m, double v, double u) {
    const double hv = 1e-7, hu = 1e-7;
    const auto fvp = m.rhs(v + hv, u), fvm = m.rhs(v - hv, u);
    const auto fup = m.rhs(v, u + hu), fum = m.rhs(v, u - hu);
    return {(fvp.du - fvm.du) / (2 * hv), (fup.du - fum.du) / (2 * hu),
            (fvp.dv - fvm.dv) / (2 * hv), (fup.dv - fum.dv) / (2 * hu)};
}

inline void classify(Equilibrium& e, const AveragedModel& m) {
    // state ordering (v, u): J = [[dvdot/dv, dvdot/du], [dudot/dv, dudot/du]]
    const Jet j = jacobian(m, e.v, e.u);
    const double m11 = j.a21;  // d vdot / d v
    const double m12 = j.a22;  // d vdot / d u
    const double m21 = j.a11;  // d udot / d v
    const double m22 = j.a12;  // d udot / d u
    const double trace = m11 + m22;
    const double det = m11 * m22 - m12 * m21;
    const double disc = trace * trace - 4.0 * det;
    if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        e.eig1 = {0.5 * (trace + s), 0.0};
        e.eig2 = {0.5 * (trace - s), 0.0};
    } else {
        const double s = std::sqrt(-disc);
        e.eig1 = {0.5 * trace, 0.5 * s};
        e.eig2 = {0.5 * trace, -0.5 * s};
    }
    if (det < 0.0) {
        e.kind = EquilibriumKind::saddle;
    } else if (disc < 0.0) {
        const double scale = std::sqrt(std::fabs(det));
        if (std::fabs(trace) < 1e-7 * std::max(scale, 1e-12))
            e.kind = EquilibriumKind::center;
        else
            e.kind = trace < 0.0 ? EquilibriumKind::focus_stable
                                 : EquilibriumKind::focus_unstable;
    } else {
        e.kind = trace < 0.0 ? EquilibriumKind::node_stable : EquilibriumKind::node_unstable;
    }
}

}  // namespace detail_dyn

struct EquilibriumOptions {
    int v_seeds = 64;
    int u_seeds = 32;
    double u_window = 0.0;  ///< 0: derived from the separatrix amplitude
    double residual_tol = 1e-11;
    double dedupe_tol = 1e-6;
    int newton_iters = 80;
};

/// All equilibria on the full cylinder v in [0, 2 pi), found by damped Newton
/// iterations started from a seed grid and deduplicated.
inline std::vector<Equilibrium> find_equilibria(const AveragedModel& model,
                                                EquilibriumOptions opt = {}) {
    model.validate();
    double uw = opt.u_window;
    if (uw <= 0.0) {
        uw = 2.0 * model.separatrix_amplitude();
        if (uw <= 0.0) uw = 1.0;
    }
    std::vector<Equilibrium> out;
    auto try_seed = [&](double v0, double u0) {
        double v = v0, u = u0;
        for (int it = 0; it < opt.newton_iters; ++it) {
            const auto r = model.rhs(v, u);
            if (std::fabs(r.du) + std::fabs(r.dv) < opt.residual_tol) {
                double vv = std::fmod(v, 2.0 * M_PI);
                if (vv < 0.0) vv += 2.0 * M_PI;
                if (2.0 * M_PI - vv < opt.dedupe_tol) vv = 0.0;
                for (const auto& e : out) {
                    const double dv = std::remainder(e.v - vv, 2.0 * M_PI);
                    if (std::fabs(dv) < opt.dedupe_tol && std::fabs(e.u - u) < opt.dedupe_tol)
                        return;
                }
                Equilibrium e;
                e.v = vv;
                e.u = u;
                detail_dyn::classify(e, model);
                out.push_back(e);
                return;
            }
            const auto j = detail_dyn::jacobian(model, v, u);
            const double det = j.a11 * j.a22 - j.a12 * j.a21;
            if (det == 0.0 || !std::isfinite(det)) return;
            const double dv = (j.a22 * r.du - j.a12 * r.dv) / det;
            const double du = (-j.a21 * r.du + j.a11 * r.dv) / det;
            const double lim = 0.5;  // damp long Newton jumps
            const double scale = std::max(1.0, std::max(std::fabs(dv), std::fabs(du)) / lim);
            v -= dv / scale;
            u -= du / scale;
            if (std::fabs(u) > 4.0 * uw) return;
        }
    };
    for (int i = 0; i < opt.v_seeds; ++i)
        for (int j = 0; j < opt.u_seeds; ++j)
            try_seed(2.0 * M_PI * i / opt.v_seeds, -uw + 2.0 * uw * (j + 0.5) / opt.u_seeds);
    std::sort(out.begin(), out.end(), [](const Equilibrium& a, const Equilibrium& b) {
        return a.v != b.v ? a.v < b.v : a.u < b.u;
    });
    return out;
}

enum class SplittingKind { split_up, split_down, double_loop_bifurcation };

inline const char* to_string(SplittingKind k) {
    switch (k) {
        case SplittingKind::split_up: return "split_up";
        case SplittingKind::split_down: return "split_down";
        case SplittingKind::double_loop_bifurcation: return "double_loop_bifurcation";
    }
    return "?";
}

struct MelnikovResult {
    double saddle_v0 = 0.0;
    double delta1 = 0.0;
    std::function<double(double)> potential_gap;  ///< w -> V(w,v0) - V(0,v0)
    SplittingKind classification = SplittingKind::double_loop_bifurcation;
};

struct MelnikovOptions {
    double sigma_tol = 1e-9;   ///< max allowed mean-free divergence amplitude
    double zero_tol = 1e-9;    ///< |delta1| below this is the double-loop case
    int quad_n = 1024;
};

/// Saddle points of the leading-order truncation: zeros of A_tilde on the
/// fundamental period with b1 * A_tilde' > 0.
inline std::vector<double> leading_order_saddles(const AveragedModel& model, int scan_n = 1024) {
    const auto& c = model.coeffs;
    const double period = c.fundamental_period();
    std::vector<double> saddles;
    double prev_v = 0.0, prev_f = c.A_tilde(0.0);
    for (int i = 1; i <= scan_n; ++i) {
        const double v = period * i / scan_n;
        const double f = c.A_tilde(v);
        if (f * prev_f < 0.0 || prev_f == 0.0) {
            double root = prev_f == 0.0
                              ? prev_v
                              : numerics::bisect([&](double x) { return c.A_tilde(x); }, prev_v,
                                                 v, 1e-14);
            if (c.b1 * c.A.deriv(root) > 0.0) saddles.push_back(root);
        }
        prev_v = v;
        prev_f = f;
    }
    return saddles;
}

/// Leading-order separatrix splitting of the symmetric reduced system: the
/// signed gap between the perturbed stable and unstable separatrices of the
/// saddle, integrated in closed quadrature over one loop.  Positive values
/// mean the unstable branch carries the larger reduced energy at the
/// symmetry section.
inline MelnikovResult melnikov_delta1(const AveragedModel& model, MelnikovOptions opt = {}) {
    const auto& c = model.coeffs;
    if (model.sigma_tilde_amplitude() > opt.sigma_tol)
        throw std::logic_error(
            "melnikov_delta1: requires the symmetric regime (sigma_tilde = 0)");
    const auto saddles = leading_order_saddles(model);
    if (saddles.empty())
        throw std::logic_error("melnikov_delta1: no saddle on the fundamental period");
    const double v0 = saddles.front();
    const double period = c.fundamental_period();
    const double V0 = model.potential(v0);
    auto gap = [&c, v0, V0, m = &model](double w) { return m->potential(v0 + w) - V0; };
    // the loop exists only if the potential difference has the sign of b1
    const int probes = 64;
    for (int i = 1; i < probes; ++i) {
        const double w = period * i / probes;
        if (gap(w) / c.b1 < -1e-12)
            throw std::logic_error(
                "melnikov_delta1: potential gap changes sign along the loop (topology mismatch)");
    }
    const double delta1 =
        numerics::periodic_trapezoid(
            [&](double w) {
                return 2.0 * c.b1 * model.mel_m(v0 + w) * gap(w) + model.mel_n(v0 + w);
            },
            0.0, period, opt.quad_n) /
        c.b1;
    MelnikovResult res;
    res.saddle_v0 = v0;
    res.delta1 = delta1;
    res.potential_gap = [m = model, v0, V0](double w) { return m.potential(v0 + w) - V0; };
    if (std::fabs(delta1) < opt.zero_tol)
        res.classification = SplittingKind::double_loop_bifurcation;
    else
        res.classification =
            delta1 > 0.0 ? SplittingKind::split_up : SplittingKind::split_down;
    return res;
}

/// Directly measured separatrix gap for cross-checking the closed quadrature:
/// shoots the unstable manifold forward and the stable manifold backward from
/// the saddle pair bounding one loop and measures the u difference on the
/// mid-loop section.  Returns the gap with the same energy-sign convention as
/// melnikov_delta1 (gap * b1 * u_section ~ mu^2 delta1).
struct ShootingGap {
    double u_unstable = 0.0;
    double u_stable = 0.0;
    double gap = 0.0;        ///< u_unstable - u_stable at the section
    double energy_gap = 0.0; ///< reduced-energy difference, comparable to mu^2 delta1
};

inline ShootingGap measure_separatrix_gap(const AveragedModel& model, double offset = 1e-7,
                                          OdeOptions ode = {}) {
    const auto& c = model.coeffs;
    const auto saddles = leading_order_saddles(model);
    if (saddles.empty()) throw std::logic_error("measure_separatrix_gap: no saddle");
    const double v0 = saddles.front();
    const double period = c.fundamental_period();
    // refine the saddle of the full system near (v0, 0)
    double vs = v0, us = 0.0;
    for (int it = 0; it < 50; ++it) {
        const auto r = model.rhs(vs, us);
        const auto j = detail_dyn::jacobian(model, vs, us);
        const double det = j.a11 * j.a22 - j.a12 * j.a21;
        if (det == 0.0) break;
        vs -= (j.a22 * r.du - j.a12 * r.dv) / det;
        us -= (-j.a21 * r.du + j.a11 * r.dv) / det;
        if (std::fabs(r.du) + std::fabs(r.dv) < 1e-13) break;
    }
    // eigenvectors of the Jacobian in (v, u) coordinates
    const auto j = detail_dyn::jacobian(model, vs, us);
    const double m11 = j.a21, m12 = j.a22, m21 = j.a11, m22 = j.a12;
    const double trace = m11 + m22, det = m11 * m22 - m12 * m21;
    const double s = std::sqrt(std::max(0.0, trace * trace - 4.0 * det));
    const double lu = 0.5 * (trace + s), ls = 0.5 * (trace - s);
    auto eigvec = [&](double lambda, double& ev, double& eu) {
        // (M - lambda I) (ev, eu)^T = 0
        if (std::fabs(m12) > 1e-300) {
            ev = 1.0;
            eu = (lambda - m11) / m12;
        } else {
            ev = 0.0;
            eu = 1.0;
        }
        const double nrm = std::hypot(ev, eu);
        ev /= nrm;
        eu /= nrm;
    };
    double evu, euu, evs, eus;
    eigvec(lu, evu, euu);
    eigvec(ls, evs, eus);
    // pick the branches on the upper half-cylinder
    if (euu < 0.0) { evu = -evu; euu = -euu; }
    if (eus < 0.0) { evs = -evs; eus = -eus; }
    const double dir = c.b1 > 0.0 ? 1.0 : -1.0;  // travel direction of v for u > 0
    const double v_section = vs + dir * 0.5 * period;

    using Stepper = Rk45<2>;
    auto rhs_fwd = [&model](double, const std::array<double, 2>& y, std::array<double, 2>& d) {
        const auto r = model.rhs(y[0], y[1]);
        d[0] = r.dv;
        d[1] = r.du;
    };
    auto rhs_bwd = [&model](double, const std::array<double, 2>& y, std::array<double, 2>& d) {
        const auto r = model.rhs(y[0], y[1]);
        d[0] = -r.dv;
        d[1] = -r.du;
    };
    auto shoot = [&](bool unstable) {
        Stepper st(unstable ? Stepper::Rhs(rhs_fwd) : Stepper::Rhs(rhs_bwd), ode);
        std::array<double, 2> y0;
        if (unstable) {
            y0 = {vs + offset * evu, us + offset * euu};
        } else {
            // stable manifold of the saddle copy one loop ahead, shot backward
            y0 = {vs + dir * period + offset * evs, us + offset * eus};
        }
        st.start(0.0, y0);
        const double target = v_section;
        double prev = y0[0] - target;
        for (int step = 0; step < 2'000'000; ++step) {
            if (!st.step()) throw std::runtime_error("measure_separatrix_gap: integration stalled");
            const double cur = st.y()[0] - target;
            if (prev * cur <= 0.0 && prev != cur) {
                const double tc = locate_event(
                    st, [&](double, const std::array<double, 2>& y) { return y[0] - target; });
                return st.dense(tc)[1];
            }
            prev = cur;
            if (std::fabs(st.t()) > 1e5) throw std::runtime_error("measure_separatrix_gap: no section crossing");
        }
        throw std::runtime_error("measure_separatrix_gap: step budget exhausted");
    };
    ShootingGap g;
    g.u_unstable = shoot(true);
    g.u_stable = shoot(false);
    g.gap = g.u_unstable - g.u_stable;
    const double u_mid = 0.5 * (g.u_unstable + g.u_stable);
    // orient by the direction of increasing slow phase along the loop, which
    // is the integration orientation of the closed quadrature
    g.energy_gap = std::fabs(c.b1) * u_mid * g.gap;
    return g;
}

enum class CycleLocation { upper_half, lower_half, oscillatory };

inline const char* to_string(CycleLocation l) {
    switch (l) {
        case CycleLocation::upper_half: return "upper half-cylinder";
        case CycleLocation::lower_half: return "lower half-cylinder";
        case CycleLocation::oscillatory: return "oscillatory region";
    }
    return "?";
}

struct LimitCycle {
    CycleLocation location = CycleLocation::upper_half;
    bool stable = false;
    double u_section = 0.0;   ///< fixed point of the return map on the section
    double v_section = 0.0;
    double period = 0.0;      ///< in slow time
    double multiplier = 1.0;  ///< return-map derivative
    std::vector<std::array<double, 2>> points;  ///< sampled (v, u) over one period
};

struct CycleOptions {
    int band_points = 96;       ///< scan resolution per rotational band
    double band_inner = 1.005;  ///< inner edge, relative to the separatrix height at the section
    double band_outer = 3.0;    ///< outer edge, in separatrix amplitudes
    double escape = 5.0;        ///< abort when |u| exceeds this many amplitudes
    double noise_floor = 1e-8;  ///< reject return-map defects below this (times amplitude)
    OdeOptions ode{};
    int sample_points = 256;
};

namespace detail_dyn {

/// Return map for rotational orbits: from (v0, u0), integrate until v has
/// advanced by one fundamental period in the direction of travel; returns the
/// final u, or nullopt if the orbit leaves the rotational band.
inline std::optional<std::pair<double, double>> rotation_return(
    const AveragedModel& model, double v0, double u0, double escape_u,
    const OdeOptions& ode, std::vector<std::array<double, 2>>* trace = nullptr) {
    const double period = model.coeffs.fundamental_period();
    const auto r0 = model.rhs(v0, u0);
    const double dir = r0.dv > 0.0 ? 1.0 : -1.0;
    const double target = v0 + dir * period;
    Rk45<2> st([&model](double, const std::array<double, 2>& y, std::array<double, 2>& d) {
        const auto r = model.rhs(y[0], y[1]);
        d[0] = r.dv;
        d[1] = r.du;
    }, ode);
    st.start(0.0, {v0, u0});
    double prev = v0 - target;
    for (int step = 0; step < 4'000'000; ++step) {
        if (!st.step()) return std::nullopt;
        if (trace) trace->push_back({st.y()[0], st.y()[1]});
        if (std::fabs(st.y()[1]) > escape_u) return std::nullopt;
        if (st.y()[1] * u0 <= 0.0) return std::nullopt;  // fell out of the band
        const double cur = st.y()[0] - target;
        if (prev * cur <= 0.0 && prev != cur) {
            const double tc = locate_event(
                st, [&](double, const std::array<double, 2>& y) { return y[0] - target; });
            return std::make_pair(st.dense(tc)[1], tc);
        }
        prev = cur;
        if (std::fabs(st.t()) > 1e6) return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace detail_dyn

/// Rotational limit cycles on both half-cylinders (fixed points of the
/// rotation return map) and librational cycles around attracting or repelling
/// foci (fixed points of the loop return map on a ray through the focus).
inline std::vector<LimitCycle> find_limit_cycles(const AveragedModel& model,
                                                 CycleOptions opt = {}) {
    model.validate();
    std::vector<LimitCycle> cycles;
    const double amp = model.separatrix_amplitude();
    const double scale = amp > 0.0 ? amp : 1.0;
    const double escape_u = opt.escape * scale;

    auto polish_and_store = [&](double v_sec, double lo, double hi, double rlo, double rhi,
                                CycleLocation loc_hint,
                                auto&& ret_map) {
        // reject pseudo-fixed-points of a (numerically) conservative map: a
        // genuine cycle shows a defect well above integrator noise at the
        // bracketing points
        if (std::max(std::fabs(rlo), std::fabs(rhi)) < opt.noise_floor * scale) return;
        // bisection refinement of the return-map defect
        double a = lo, b = hi, fa = rlo, fb = rhi;
        for (int it = 0; it < 60 && std::fabs(b - a) > 1e-12 * scale; ++it) {
            const double m = 0.5 * (a + b);
            const auto pm = ret_map(m);
            if (!pm) return;
            const double fm = pm->first - m;
            if ((fm > 0.0) == (fa > 0.0)) {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
        }
        (void)fb;
        const double u_star = 0.5 * (a + b);
        const auto pr = ret_map(u_star);
        if (!pr) return;
        const double h = 1e-5 * scale;
        const auto pp = ret_map(u_star + h), pm2 = ret_map(u_star - h);
        if (!pp || !pm2) return;
        const double mult = (pp->first - pm2->first) / (2.0 * h);

        LimitCycle cyc;
        cyc.location = loc_hint;
        cyc.u_section = u_star;
        cyc.v_section = v_sec;
        cyc.period = pr->second;
        cyc.multiplier = mult;
        cyc.stable = std::fabs(mult) < 1.0;
        // sample the closed curve
        Rk45<2> st([&model](double, const std::array<double, 2>& y, std::array<double, 2>& d) {
            const auto r = model.rhs(y[0], y[1]);
            d[0] = r.dv;
            d[1] = r.du;
        }, opt.ode);
        st.start(0.0, {v_sec, u_star});
        const double dt = pr->second / opt.sample_points;
        double tnext = dt;
        cyc.points.push_back({v_sec, u_star});
        while (st.t() < pr->second && st.step()) {
            while (tnext <= st.t() && tnext < pr->second) {
                const auto y = st.dense(tnext);
                cyc.points.push_back({y[0], y[1]});
                tnext += dt;
            }
        }
        cycles.push_back(std::move(cyc));
    };

    // rotational bands: the inner edge hugs the separatrix height at the
    // section, which is below the global amplitude when the section does not
    // sit at the potential minimum
    const double v_sec = 0.0;
    double sep_h2 = 0.0;  // 2 (V(v_sec) - V(v_saddle)) / b1
    for (int i = 0; i < 256; ++i)
        sep_h2 = std::max(sep_h2,
                          2.0 * (model.potential(v_sec) - model.potential(2.0 * M_PI * i / 256.0)) /
                              model.coeffs.b1);
    const double u_sep_sec = sep_h2 > 0.0 ? std::sqrt(sep_h2) : 0.0;
    const double inner = std::max(u_sep_sec > 0.0 ? opt.band_inner * u_sep_sec : 0.0,
                                  0.05 * scale);
    for (const double sgn : {1.0, -1.0}) {
        auto ret = [&](double u0) {
            return detail_dyn::rotation_return(model, v_sec, u0, escape_u, opt.ode);
        };
        double prev_u = 0.0, prev_r = 0.0;
        bool have_prev = false;
        for (int i = 0; i <= opt.band_points; ++i) {
            const double u0 =
                sgn * (inner + (opt.band_outer * scale - inner) * i / opt.band_points);
            const auto p = ret(u0);
            if (!p) {
                have_prev = false;
                continue;
            }
            const double r = p->first - u0;
            if (have_prev && r * prev_r < 0.0) {
                polish_and_store(v_sec, prev_u, u0, prev_r, r,
                                 sgn > 0.0 ? CycleLocation::upper_half : CycleLocation::lower_half,
                                 ret);
            }
            prev_u = u0;
            prev_r = r;
            have_prev = true;
        }
    }

    // librational cycles around foci
    const auto eqs = find_equilibria(model);
    for (const auto& e : eqs) {
        if (e.kind != EquilibriumKind::focus_stable && e.kind != EquilibriumKind::focus_unstable &&
            e.kind != EquilibriumKind::center)
            continue;
        auto ret = [&](double u0) -> std::optional<std::pair<double, double>> {
            // loop return map on the ray v = e.v, u > e.u
            Rk45<2> st([&model](double, const std::array<double, 2>& y, std::array<double, 2>& d) {
                const auto r = model.rhs(y[0], y[1]);
                d[0] = r.dv;
                d[1] = r.du;
            }, opt.ode);
            st.start(0.0, {e.v, u0});
            double prev = 0.0;
            bool armed = false;
            for (int step = 0; step < 2'000'000; ++step) {
                if (!st.step()) return std::nullopt;
                if (std::fabs(st.y()[1] - e.u) > escape_u ||
                    std::fabs(std::remainder(st.y()[0] - e.v, 2.0 * M_PI)) > 0.9 * M_PI)
                    return std::nullopt;  // left the oscillatory pocket
                const double cur = st.y()[0] - e.v;
                if (armed && prev * cur <= 0.0 && prev != cur && st.y()[1] > e.u) {
                    const double tc = locate_event(
                        st, [&](double, const std::array<double, 2>& y) { return y[0] - e.v; });
                    const auto y = st.dense(tc);
                    if (y[1] > e.u) return std::make_pair(y[1], tc);
                }
                if (std::fabs(cur) > 1e-3) armed = true;
                prev = cur;
                if (st.t() > 2e5) return std::nullopt;
            }
            return std::nullopt;
        };
        double prev_u = 0.0, prev_r = 0.0;
        bool have_prev = false;
        for (int i = 1; i <= opt.band_points; ++i) {
            const double u0 = e.u + 0.9 * scale * i / opt.band_points;
            const auto p = ret(u0);
            if (!p) {
                have_prev = false;
                continue;
            }
            const double r = p->first - u0;
            if (have_prev && r * prev_r < 0.0)
                polish_and_store(e.v, prev_u, u0, prev_r, r, CycleLocation::oscillatory, ret);
            prev_u = u0;
            prev_r = r;
            have_prev = true;
        }
    }
    return cycles;
}

enum class Passability { impassable, partly_passable, passable, bifurcation_case };

inline const char* to_string(Passability p) {
    switch (p) {
        case Passability::impassable: return "impassable";
        case Passability::partly_passable: return "partly_passable";
        case Passability::passable: return "passable";
        case Passability::bifurcation_case: return "bifurcation_case";
    }
    return "?";
}

struct SampledCurve {
    std::string tag;
    std::vector<std::array<double, 2>> points;  ///< (v, u)
};

struct PhasePortrait {
    std::vector<Equilibrium> equilibria;
    std::vector<SampledCurve> separatrices;
    std::vector<LimitCycle> limit_cycles;
    std::vector<SampledCurve> trajectories;
    Passability taxonomy = Passability::impassable;
    std::string figure;        ///< matching qualitative regime, when recognized
    bool any_traversal = false;
    bool cycle_loop_merge = false;
    std::optional<double> delta1;  ///< filled in the symmetric regime
};

struct PortraitOptions {
    int grid_v = 20;
    int grid_u = 20;
    double horizon = 200.0;
    double escape_factor = 3.0;  ///< escape threshold in separatrix amplitudes
    int edge_seeds = 20;
    int threads = 0;             ///< 0: hardware concurrency
    int trajectory_stride = 8;   ///< keep every k-th scan trajectory
    double merge_tol = 0.05;     ///< cycle-to-saddle reduced-energy gap (relative) for a merge
    OdeOptions ode{1e-9, 1e-9};
    CycleOptions cycles{};
};

namespace detail_dyn {

struct ScanOutcome {
    int exit_side = 0;   // -1 bottom, +1 top, 0 none
    bool traversed = false;
    std::vector<std::array<double, 2>> samples;
};

inline ScanOutcome scan_trajectory(const AveragedModel& model, double v0, double u0,
                                   double u_esc, double horizon, const OdeOptions& ode,
                                   bool keep_samples) {
    ScanOutcome oc;
    Rk45<2> st([&model](double, const std::array<double, 2>& y, std::array<double, 2>& d) {
        const auto r = model.rhs(y[0], y[1]);
        d[0] = r.dv;
        d[1] = r.du;
    }, ode);
    st.start(0.0, {v0, u0});
    double umin = u0, umax = u0;
    const double sample_dt = horizon / 400.0;
    double tnext = 0.0;
    while (st.t() < horizon) {
        if (keep_samples) {
            while (tnext <= st.t()) {
                const auto y = st.dense(std::max(tnext, st.t_prev()));
                oc.samples.push_back({y[0], y[1]});
                tnext += sample_dt;
            }
        }
        const double u = st.y()[1];
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        if (u > 1.2 * u_esc || u < -1.2 * u_esc) {
            oc.exit_side = u > 0.0 ? 1 : -1;
            // traversal: reached well beyond the band on both sides
            oc.traversed = (oc.exit_side > 0 && umin < -u_esc) ||
                           (oc.exit_side < 0 && umax > u_esc) ||
                           (oc.exit_side > 0 && u0 <= -u_esc) ||
                           (oc.exit_side < 0 && u0 >= u_esc);
            break;
        }
        if (!st.step()) break;
    }
    return oc;
}

}  // namespace detail_dyn

/// Assembles the full qualitative picture of one resonance zone: equilibria,
/// saddle separatrices, limit cycles, a trajectory scan over the fundamental
/// cell, the passability label, and the matching figure-family tag.
inline PhasePortrait classify_portrait(const AveragedModel& model, PortraitOptions opt = {}) {
    model.validate();
    PhasePortrait pp;
    pp.equilibria = find_equilibria(model);
    const double amp = model.separatrix_amplitude();
    const double scale = amp > 0.0 ? amp : 1.0;
    const double u_esc = opt.escape_factor * scale;

    // separatrices by eigenvector-offset shooting from each saddle
    for (const auto& e : pp.equilibria) {
        if (e.kind != EquilibriumKind::saddle) continue;
        const auto j = detail_dyn::jacobian(model, e.v, e.u);
        const double m11 = j.a21, m12 = j.a22, m21 = j.a11, m22 = j.a12;
        const double trace = m11 + m22, det = m11 * m22 - m12 * m21;
        const double s = std::sqrt(std::max(0.0, trace * trace - 4.0 * det));
        for (const double lambda : {0.5 * (trace + s), 0.5 * (trace - s)}) {
            const bool unstable = lambda > 0.0;
            double ev, eu;
            if (std::fabs(m12) > 1e-300) {
                ev = 1.0;
                eu = (lambda - m11) / m12;
            } else {
                ev = 0.0;
                eu = 1.0;
            }
            const double nrm = std::hypot(ev, eu);
            ev /= nrm;
            eu /= nrm;
            for (const double sgn : {1.0, -1.0}) {
                SampledCurve curve;
                curve.tag = std::string(unstable ? "unstable" : "stable") + "_separatrix";
                Rk45<2> st(
                    [&model, unstable](double, const std::array<double, 2>& y,
                                       std::array<double, 2>& d) {
                        const auto r = model.rhs(y[0], y[1]);
                        d[0] = unstable ? r.dv : -r.dv;
                        d[1] = unstable ? r.du : -r.du;
                    },
                    opt.ode);
                st.start(0.0, {e.v + sgn * 1e-7 * ev, e.u + sgn * 1e-7 * eu});
                curve.points.push_back({st.y()[0], st.y()[1]});
                while (st.t() < opt.horizon && std::fabs(st.y()[1]) < 1.5 * u_esc &&
                       std::fabs(st.y()[0] - e.v) < 4.0 * M_PI) {
                    if (!st.step()) break;
                    curve.points.push_back({st.y()[0], st.y()[1]});
                }
                pp.separatrices.push_back(std::move(curve));
            }
        }
    }

    pp.limit_cycles = find_limit_cycles(model, opt.cycles);

    // cycle merging into a separatrix loop: the cycle's reduced energy
    // H = b1 u^2/2 - V(v) approaches the saddle level.  Only meaningful when
    // the leading-order mean vanishes (otherwise the potential is tilted).
    if (std::fabs(model.coeffs.B0_eff()) <
        1e-6 * std::max(1e-300, model.coeffs.A.max_abs_tilde())) {
        const double b1 = model.coeffs.b1;
        const double h_scale = 0.5 * std::fabs(b1) * scale * scale;
        for (const auto& cyc : pp.limit_cycles) {
            for (const auto& e : pp.equilibria) {
                if (e.kind != EquilibriumKind::saddle) continue;
                const double h_sad = 0.5 * b1 * e.u * e.u - model.potential(e.v);
                double closest = 1e300;
                for (const auto& p : cyc.points) {
                    const double h = 0.5 * b1 * p[1] * p[1] - model.potential(p[0]);
                    closest = std::min(closest, std::fabs(h - h_sad));
                }
                if (closest < opt.merge_tol * h_scale) pp.cycle_loop_merge = true;
            }
        }
    }

    // trajectory scan: interior grid plus edge seeds, distributed over a pool
    const double period = model.coeffs.fundamental_period();
    struct Task {
        double v0, u0;
        bool keep;
    };
    std::vector<Task> tasks;
    for (int i = 0; i < opt.grid_v; ++i)
        for (int jj = 0; jj < opt.grid_u; ++jj)
            tasks.push_back({period * (i + 0.5) / opt.grid_v,
                             -u_esc + 2.0 * u_esc * (jj + 0.5) / opt.grid_u,
                             (i * opt.grid_u + jj) % opt.trajectory_stride == 0});
    for (int i = 0; i < opt.edge_seeds; ++i) {
        tasks.push_back({period * (i + 0.5) / opt.edge_seeds, +u_esc, false});
        tasks.push_back({period * (i + 0.5) / opt.edge_seeds, -u_esc, false});
    }
    std::vector<detail_dyn::ScanOutcome> outcomes(tasks.size());
    int nthreads = opt.threads > 0 ? opt.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
    if (nthreads < 1) nthreads = 1;
    nthreads = std::min<int>(nthreads, static_cast<int>(tasks.size()));
    {
        std::vector<std::thread> pool;
        const std::size_t chunk = (tasks.size() + nthreads - 1) / nthreads;
        for (int w = 0; w < nthreads; ++w) {
            const std::size_t lo = w * chunk, hi = std::min(tasks.size(), lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi]() {
                for (std::size_t idx = lo; idx < hi; ++idx)
                    outcomes[idx] = detail_dyn::scan_trajectory(model, tasks[idx].v0,
                                                                tasks[idx].u0, u_esc,
                                                                opt.horizon, opt.ode,
                                                                tasks[idx].keep);
            });
        }
        for (auto& th : pool) th.join();
    }
    for (std::size_t idx = 0; idx < tasks.size(); ++idx) {
        if (outcomes[idx].traversed) pp.any_traversal = true;
        if (tasks[idx].keep && !outcomes[idx].samples.empty()) {
            SampledCurve c;
            c.tag = "scan";
            c.points = std::move(outcomes[idx].samples);
            pp.trajectories.push_back(std::move(c));
        }
    }

    // passability
    if (pp.equilibria.empty())
        pp.taxonomy = Passability::passable;
    else if (pp.cycle_loop_merge)
        pp.taxonomy = Passability::bifurcation_case;
    else if (pp.any_traversal)
        pp.taxonomy = Passability::partly_passable;
    else
        pp.taxonomy = Passability::impassable;

    // figure-family tag
    const auto& c = model.coeffs;
    const double sig_amp = model.sigma_tilde_amplitude();
    const double b2v = model.B2v();
    const bool means_zero = std::fabs(c.B0_eff()) < 1e-9 && std::fabs(c.B1_eff()) < 1e-9;
    const double a_amp = c.A.max_abs_tilde();
    const double sig_tol = 1e-9 * std::max(1.0, a_amp);
    if (means_zero && sig_amp <= sig_tol) {
        try {
            pp.delta1 = melnikov_delta1(model).delta1;
        } catch (const std::exception&) {
        }
        if (std::fabs(b2v) < 1e-9 && pp.delta1 && std::fabs(*pp.delta1) < 1e-9)
            pp.figure = "1b";
        else
            pp.figure = (pp.delta1 && *pp.delta1 < 0.0) ? "1a" : "1c";
    } else if (means_zero) {
        if (std::fabs(b2v) < 1e-9)
            pp.figure = "2a";
        else if (pp.cycle_loop_merge)
            pp.figure = "2c";
        else if (pp.any_traversal)
            pp.figure = "2d";
        else if (!pp.limit_cycles.empty())
            pp.figure = "2b";
        else
            pp.figure = "2";
    } else {
        const bool sigma_changes_sign = sig_amp > std::fabs(c.B1_eff());
        pp.figure = sigma_changes_sign ? "4" : "3";
    }
    return pp;
}

}  // namespace reskit
