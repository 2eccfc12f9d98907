#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>

namespace reskit {

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-10;
    double h_init = 1e-3;
    double h_max = std::numeric_limits<double>::infinity();
    long max_steps = 50'000'000;
};

/// Adaptive embedded Runge-Kutta 5(4) (Dormand-Prince pair) with the
/// standard fifth-order dense interpolant.  The stepper exposes one accepted
/// step at a time so that callers can run event detection or sampling on the
/// dense output between t_prev() and t().
template <std::size_t N>
class Rk45 {
public:
    using State = std::array<double, N>;
    using Rhs = std::function<void(double, const State&, State&)>;

    Rk45(Rhs rhs, OdeOptions opt = {}) : rhs_(std::move(rhs)), opt_(opt) {}

    void start(double t0, const State& y0, double direction = 1.0) {
        t_ = tp_ = t0;
        y_ = yp_ = y0;
        dir_ = direction >= 0.0 ? 1.0 : -1.0;
        h_ = std::min(opt_.h_init, opt_.h_max) * dir_;
        rhs_(t_, y_, k_[0]);
        steps_ = 0;
        have_dense_ = false;
    }

    double t() const { return t_; }
    double t_prev() const { return tp_; }
    const State& y() const { return y_; }
    const State& y_prev() const { return yp_; }
    long steps() const { return steps_; }

    /// Advance one accepted step.  Returns false when the step budget is
    /// exhausted or the step size underflows.
    bool step() {
        for (int attempt = 0; attempt < 64; ++attempt) {
            if (++steps_ > opt_.max_steps) return false;
            if (std::fabs(h_) < 1e-14 * std::max(1.0, std::fabs(t_))) return false;
            const double h = h_;
            State ytmp;
            for (int s = 1; s < 7; ++s) {
                for (std::size_t i = 0; i < N; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < s; ++j) acc += kA[s - 1][j] * k_[j][i];
                    ytmp[i] = y_[i] + h * acc;
                }
                rhs_(t_ + kC[s] * h, ytmp, k_[s]);
            }
            // fifth-order solution is stage 7's base point (FSAL)
            State y5;
            for (std::size_t i = 0; i < N; ++i) {
                double acc = 0.0;
                for (int j = 0; j < 6; ++j) acc += kB5[j] * k_[j][i];
                y5[i] = y_[i] + h * acc;
            }
            State k7;
            rhs_(t_ + h, y5, k7);
            double err = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                double e = 0.0;
                for (int j = 0; j < 6; ++j) e += kE[j] * k_[j][i];
                e += kE[6] * k7[i];
                e *= h;
                const double sc =
                    opt_.atol + opt_.rtol * std::max(std::fabs(y_[i]), std::fabs(y5[i]));
                err += (e / sc) * (e / sc);
            }
            err = std::sqrt(err / N);
            const double fac =
                std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-16), -0.2)));
            if (err <= 1.0) {
                make_dense(h, y5, k7);
                tp_ = t_;
                yp_ = y_;
                t_ += h;
                y_ = y5;
                k_[0] = k7;
                h_ = dir_ * std::min(std::fabs(h) * fac, opt_.h_max);
                return true;
            }
            h_ = h * fac;
        }
        return false;
    }

    /// Dense solution inside the last accepted step [t_prev(), t()].
    State dense(double t) const {
        if (!have_dense_) return y_;
        const double h = t_ - tp_;
        const double th = (t - tp_) / h;
        State out;
        for (std::size_t i = 0; i < N; ++i) {
            out[i] = rc1_[i] +
                     th * (rc2_[i] + (1.0 - th) * (rc3_[i] + th * (rc4_[i] + (1.0 - th) * rc5_[i])));
        }
        return out;
    }

private:
    void make_dense(double h, const State& y5, const State& k7) {
        for (std::size_t i = 0; i < N; ++i) {
            const double dy = y5[i] - y_[i];
            rc1_[i] = y_[i];
            rc2_[i] = dy;
            rc3_[i] = h * k_[0][i] - dy;
            rc4_[i] = dy - h * k7[i] - rc3_[i];
            rc5_[i] = h * (kD[0] * k_[0][i] + kD[2] * k_[2][i] + kD[3] * k_[3][i] +
                           kD[4] * k_[4][i] + kD[5] * k_[5][i] + kD[6] * k7[i]);
        }
        have_dense_ = true;
    }

    static constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
    static constexpr double kA[6][6] = {
        {1.0 / 5, 0, 0, 0, 0, 0},
        {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
        {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
        {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
    static constexpr double kB5[6] = {35.0 / 384,      0.0,        500.0 / 1113,
                                      125.0 / 192,     -2187.0 / 6784, 11.0 / 84};
    // y5 - y4 error weights (includes the FSAL stage)
    static constexpr double kE[7] = {
        35.0 / 384 - 5179.0 / 57600,   0.0,
        500.0 / 1113 - 7571.0 / 16695, 125.0 / 192 - 393.0 / 640,
        -2187.0 / 6784 + 92097.0 / 339200, 11.0 / 84 - 187.0 / 2100, -1.0 / 40};
    static constexpr double kD[7] = {-12715105075.0 / 11282082432.0,
                                     0.0,
                                     87487479700.0 / 32700410799.0,
                                     -10690763975.0 / 1880347072.0,
                                     701980252875.0 / 199316789632.0,
                                     -1453857185.0 / 822651844.0,
                                     69997945.0 / 29380423.0};

    Rhs rhs_;
    OdeOptions opt_;
    double t_ = 0.0, tp_ = 0.0, h_ = 1e-3, dir_ = 1.0;
    State y_{}, yp_{};
    State k_[7]{};
    State rc1_{}, rc2_{}, rc3_{}, rc4_{}, rc5_{};
    long steps_ = 0;
    bool have_dense_ = false;
};

/// Locates a zero of `event` inside the last accepted step of an Rk45 by
/// bisection on the dense output.  The caller must ensure a sign change
/// between t_prev() and t().
template <std::size_t N, typename Event>
double locate_event(const Rk45<N>& stepper, Event&& event, double tol = 1e-13) {
    double a = stepper.t_prev(), b = stepper.t();
    double fa = event(a, stepper.dense(a));
    for (int i = 0; i < 200 && std::fabs(b - a) > tol * std::max(1.0, std::fabs(b)); ++i) {
        const double m = 0.5 * (a + b);
        const double fm = event(m, stepper.dense(m));
        if ((fm > 0.0) == (fa > 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace reskit
