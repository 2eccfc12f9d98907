#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "reskit/averaging.hpp"
#include "reskit/chart.hpp"
#include "reskit/ode.hpp"

namespace reskit {

/// A sampled trajectory of the full planar system, projected onto the cell
/// coordinates.  theta and v are unwrapped (tracked by continuity), so slow
/// drifts of the resonance phase across many periods are visible directly.
struct FullTrajectory {
    std::vector<double> t;
    std::vector<double> x, y;
    std::vector<double> I;
    std::vector<double> theta;  ///< unwrapped angle
    std::vector<double> v;      ///< resonance phase theta - (m1 th1 + m2 th2)/n
    bool exited = false;        ///< left the chart cell before the horizon
    double exit_time = 0.0;
};

struct SimulateOptions {
    double sample_dt = 0.25;
    ResonanceIndex index{3, 1, 1};
    OdeOptions ode{1e-9, 1e-9};
    double I_seed = 0.0;      ///< 0: seed the first projection from a coarse scan
    double theta_seed = 0.0;
};

/// Integrates the full forced system from (x0, y0) over [0, T] and projects
/// each sample onto (I, theta) through the chart inverse, seeded by
/// continuity from the previous sample.
inline FullTrajectory integrate_full_system(const PerturbedSystem& sys,
                                            const ActionAngleChart& chart, double x0, double y0,
                                            double T, SimulateOptions opt = {}) {
    FullTrajectory out;
    using State = std::array<double, 2>;
    Rk45<2> st(
        [&sys](double t, const State& s, State& d) {
            const double th1 = sys.omega1 * t, th2 = sys.omega2 * t;
            const double g = sys.g_field ? sys.g_field(s[0], s[1], th1, th2) : 0.0;
            const double f = sys.f_field ? sys.f_field(s[0], s[1], th1, th2) : 0.0;
            d[0] = sys.hy(s[0], s[1]) + sys.epsilon * g;
            d[1] = -sys.hx(s[0], s[1]) + sys.epsilon * f;
        },
        opt.ode);
    st.start(0.0, {x0, y0});

    // first projection: coarse seed scan unless the caller supplied one
    double I_prev = opt.I_seed, th_prev = opt.theta_seed;
    if (I_prev <= 0.0) {
        double best = 1e300;
        for (int i = 1; i <= 24; ++i) {
            const double I = chart.I_range.lo + chart.I_range.width() * i / 25.0;
            for (int j = 0; j < 32; ++j) {
                const double th = 2.0 * M_PI * j / 32.0;
                const double dx = chart.x_of(I, th) - x0, dy = chart.y_of(I, th) - y0;
                const double r = dx * dx + dy * dy;
                if (r < best) {
                    best = r;
                    I_prev = I;
                    th_prev = th;
                }
            }
        }
    }
    {
        const auto inv0 = chart.invert(x0, y0, I_prev, th_prev);
        if (!inv0.converged)
            throw std::invalid_argument("integrate_full_system: initial point is outside the cell");
        I_prev = inv0.I;
        th_prev = inv0.theta;
    }

    const double rate = (opt.index.m1 * sys.omega1 + opt.index.m2 * sys.omega2) / opt.index.n;
    double th_rate = chart.omega ? chart.omega(I_prev) : rate;  // predictor slope

    auto reseed = [&](double x, double y) {
        // coarse grid restart for the rare sample where the continuity seed
        // lands in a bad Newton basin; the angle is re-anchored to the
        // previous unwrapped value afterwards
        double bi = I_prev, bt = th_prev, best = 1e300;
        for (int i = 1; i <= 24; ++i) {
            const double I = chart.I_range.lo + chart.I_range.width() * i / 25.0;
            for (int j = 0; j < 48; ++j) {
                const double th = 2.0 * M_PI * j / 48.0;
                const double dx = chart.x_of(I, th) - x, dy = chart.y_of(I, th) - y;
                if (dx * dx + dy * dy < best) {
                    best = dx * dx + dy * dy;
                    bi = I;
                    bt = th;
                }
            }
        }
        auto inv = chart.invert(x, y, bi, bt);
        if (inv.converged)
            inv.theta += std::round((th_prev + th_rate * opt.sample_dt - inv.theta) /
                                    (2.0 * M_PI)) * 2.0 * M_PI;
        return inv;
    };

    auto record = [&](double t, double x, double y) {
        auto inv = chart.invert(x, y, I_prev, th_prev + th_rate * opt.sample_dt);
        if (!inv.converged) inv = reseed(x, y);
        if (!inv.converged) {
            out.exited = true;
            out.exit_time = t;
            return false;
        }
        I_prev = inv.I;
        th_prev = inv.theta;
        if (chart.omega) th_rate = chart.omega(inv.I);
        out.t.push_back(t);
        out.x.push_back(x);
        out.y.push_back(y);
        out.I.push_back(inv.I);
        out.theta.push_back(inv.theta);
        out.v.push_back(inv.theta - rate * t);
        return true;
    };

    if (!record(0.0, x0, y0)) return out;
    double tnext = opt.sample_dt;
    while (st.t() < T) {
        if (!st.step()) break;
        while (tnext <= st.t() && tnext <= T) {
            const auto ys = st.dense(tnext);
            if (!record(tnext, ys[0], ys[1])) return out;
            tnext += opt.sample_dt;
        }
    }
    return out;
}

/// Summary metrics of a trajectory relative to a resonance level.
struct DriftReport {
    double max_abs_dI = 0.0;   ///< max |I(t) - I_ref|
    double v_span = 0.0;       ///< total unwrapped span of the resonance phase
    bool crossed_full_period = false;
};

inline DriftReport drift_report(const FullTrajectory& tr, double I_ref, int n) {
    DriftReport r;
    if (tr.v.empty()) return r;
    double vmin = tr.v.front(), vmax = tr.v.front();
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        r.max_abs_dI = std::max(r.max_abs_dI, std::fabs(tr.I[i] - I_ref));
        vmin = std::min(vmin, tr.v[i]);
        vmax = std::max(vmax, tr.v[i]);
    }
    r.v_span = vmax - vmin;
    r.crossed_full_period = r.v_span >= 2.0 * M_PI / n;
    return r;
}

}  // namespace reskit
