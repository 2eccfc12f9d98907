#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

#include "reskit/numerics.hpp"

namespace reskit {

using Field2 = std::function<double(double, double)>;
using Field4 = std::function<double(double, double, double, double)>;

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    double width() const { return hi - lo; }
    bool contains(double x) const { return x > lo && x < hi; }  // open interval
    double clamp_interior(double x, double margin) const {
        return std::min(hi - margin, std::max(lo + margin, x));
    }
};

enum class DomainKind { plane, cylinder };

/// A planar near-Hamiltonian system driven by two incommensurable forcing
/// frequencies:
///   x' =  dH/dy + eps * g(x, y, w1 t, w2 t)
///   y' = -dH/dx + eps * f(x, y, w1 t, w2 t)
/// g and f must be 2 pi periodic in both forcing phases.
struct PerturbedSystem {
    Field2 hamiltonian;
    Field2 dH_dx;   ///< optional; finite differences of `hamiltonian` if empty
    Field2 dH_dy;
    Field4 g_field;
    Field4 f_field;
    double omega1 = 1.0;
    double omega2 = M_SQRT2;
    double epsilon = 1e-3;
    DomainKind domain = DomainKind::plane;

    double hx(double x, double y) const {
        if (dH_dx) return dH_dx(x, y);
        return numerics::diff1([&](double xx) { return hamiltonian(xx, y); }, x, 1e-5);
    }
    double hy(double x, double y) const {
        if (dH_dy) return dH_dy(x, y);
        return numerics::diff1([&](double yy) { return hamiltonian(x, yy); }, y, 1e-5);
    }

    /// Checks the structural invariants: positive epsilon and frequencies,
    /// frequency ratio not within 1e-9 of any rational p/q with q <= 64, and
    /// 2 pi periodicity of the perturbation in both forcing phases (spot
    /// check).  Throws std::invalid_argument on the first violation.
    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("PerturbedSystem: epsilon must be > 0");
        if (!(omega1 > 0.0) || !(omega2 > 0.0))
            throw std::invalid_argument("PerturbedSystem: forcing frequencies must be > 0");
        const double r = omega1 / omega2;
        for (int q = 1; q <= 64; ++q) {
            const double p = std::round(r * q);
            if (std::fabs(r - p / q) < 1e-9) {
                throw std::invalid_argument(
                    "PerturbedSystem: omega1/omega2 within 1e-9 of " +
                    std::to_string(static_cast<long>(p)) + "/" + std::to_string(q));
            }
        }
        const double pts[][4] = {{0.3, -0.2, 0.7, 1.9}, {-1.1, 0.4, 2.6, 0.5}, {0.9, 1.3, 4.0, 3.1}};
        for (const auto& p : pts) {
            for (const Field4* fld : {&g_field, &f_field}) {
                if (!*fld) continue;
                const double base = (*fld)(p[0], p[1], p[2], p[3]);
                const double s1 = (*fld)(p[0], p[1], p[2] + 2.0 * M_PI, p[3]);
                const double s2 = (*fld)(p[0], p[1], p[2], p[3] + 2.0 * M_PI);
                const double scale = std::max(1.0, std::fabs(base));
                if (std::fabs(s1 - base) > 1e-9 * scale || std::fabs(s2 - base) > 1e-9 * scale)
                    throw std::invalid_argument(
                        "PerturbedSystem: perturbation is not 2 pi periodic in the forcing phases");
            }
        }
    }
};

/// Action-angle chart of the unperturbed cell: x = X(I, theta), y = Y(I, theta),
/// 2 pi periodic in theta, canonical ( dX/dtheta dY/dI - dX/dI dY/dtheta = 1 ).
/// Derivative fields must be consistent with the maps; `omega` is optional
/// (derived from the Hamiltonian restriction by finite differences if empty).
struct ActionAngleChart {
    using Map = std::function<double(double, double)>;  // (I, theta) -> value

    Map x_of, y_of;
    Map x_dI, y_dI;
    Map x_dtheta, y_dtheta;
    Map x_dII, x_dItheta;
    Interval I_range;
    std::function<double(double)> omega;  ///< natural frequency, if known analytically

    void require_in_range(double I) const {
        if (!I_range.contains(I))
            throw std::domain_error("ActionAngleChart: action outside the open cell interval");
    }

    /// Canonicity residual max | {X,Y} - 1 | over a sample grid.
    double canonicity_residual(int nI = 20, int ntheta = 32) const {
        double worst = 0.0;
        for (int i = 1; i <= nI; ++i) {
            const double I = I_range.lo + I_range.width() * i / (nI + 1.0);
            for (int j = 0; j < ntheta; ++j) {
                const double th = 2.0 * M_PI * j / ntheta;
                const double det = x_dtheta(I, th) * y_dI(I, th) - x_dI(I, th) * y_dtheta(I, th);
                worst = std::max(worst, std::fabs(det - 1.0));
            }
        }
        return worst;
    }

    /// Invert (x, y) -> (I, theta) by a damped 2D Newton iteration from the
    /// supplied seed.  theta is not reduced mod 2 pi, so tracking a trajectory
    /// with the previous solution as seed yields an unwrapped angle.
    struct InverseResult {
        double I;
        double theta;
        bool converged;
    };
    InverseResult invert(double x, double y, double I_seed, double theta_seed,
                         double tol = 1e-12, int max_iter = 60) const {
        double I = I_range.clamp_interior(I_seed, 1e-12 * I_range.width());
        double th = theta_seed;
        const double margin = 1e-9 * I_range.width();
        for (int it = 0; it < max_iter; ++it) {
            const double rx = x_of(I, th) - x;
            const double ry = y_of(I, th) - y;
            if (std::fabs(rx) + std::fabs(ry) < tol) return {I, th, true};
            const double a = x_dI(I, th), b = x_dtheta(I, th);
            const double c = y_dI(I, th), d = y_dtheta(I, th);
            const double det = a * d - b * c;
            if (det == 0.0) break;
            double dI = (d * rx - b * ry) / det;
            double dth = (-c * rx + a * ry) / det;
            // keep the action inside the open cell
            double lambda = 1.0;
            while (lambda > 1e-4 && !I_range.contains(I - lambda * dI))
                lambda *= 0.5;
            I = I_range.clamp_interior(I - lambda * dI, margin);
            th -= lambda * dth;
        }
        return {I, th, false};
    }
};

/// Right-hand side of the action-angle form of the perturbed system:
///   I'     = eps * F,   F = f X_theta' - g Y_theta'
///   theta' = omega + eps * G,   G = -f X_I' + g Y_I'
/// Returns (F, G) at the given action, angle, and forcing phases.
inline std::pair<double, double> action_angle_rhs(const ActionAngleChart& chart,
                                                  const PerturbedSystem& sys, double I,
                                                  double theta, double theta1, double theta2) {
    chart.require_in_range(I);
    const double x = chart.x_of(I, theta), y = chart.y_of(I, theta);
    const double f = sys.f_field ? sys.f_field(x, y, theta1, theta2) : 0.0;
    const double g = sys.g_field ? sys.g_field(x, y, theta1, theta2) : 0.0;
    const double F = f * chart.x_dtheta(I, theta) - g * chart.y_dtheta(I, theta);
    const double G = -f * chart.x_dI(I, theta) + g * chart.y_dI(I, theta);
    return {F, G};
}

/// Natural frequency and its scaled action derivatives
///   b1 = omega', b2 = omega''/2, b3 = omega'''/6.
struct FrequencyProfile {
    std::function<double(double)> omega;
    std::function<double(double)> b1;
    std::function<double(double)> b2;
    std::function<double(double)> b3;

    /// Checks monotonicity and nonvanishing of omega on a grid; a violation
    /// is a configuration error of the supplied chart.
    void validate(const Interval& I_range, int n = 64) const {
        double prev = omega(I_range.lo + I_range.width() / (n + 1.0));
        double wmin = prev, wmax = prev, dir = 0.0;
        for (int i = 2; i <= n; ++i) {
            const double I = I_range.lo + I_range.width() * i / (n + 1.0);
            const double cur = omega(I);
            if (cur == 0.0 || prev == 0.0 || cur * prev < 0.0)
                throw std::invalid_argument("FrequencyProfile: omega vanishes on the cell");
            const double step = cur - prev;
            if (dir == 0.0) dir = step;
            if (step * dir < 0.0)
                throw std::invalid_argument("FrequencyProfile: omega is not monotone on the cell");
            wmin = std::min(wmin, cur);
            wmax = std::max(wmax, cur);
            prev = cur;
        }
        if (wmax - wmin < 1e-12 * std::max(1.0, std::fabs(wmax)))
            throw std::invalid_argument("FrequencyProfile: omega is degenerate (constant)");
    }
};

/// Builds a frequency profile from a chart by differencing the Hamiltonian
/// restriction H(X(I, theta0), Y(I, theta0)), which is theta-independent on a
/// valid chart.  Analytic charts should provide `chart.omega` (used directly)
/// or override the whole profile with closed forms.
inline FrequencyProfile frequency_profile_from_chart(const ActionAngleChart& chart,
                                                     const Field2& hamiltonian) {
    std::function<double(double)> omega;
    if (chart.omega) {
        omega = chart.omega;
    } else {
        const double theta0 = 0.8137;  // arbitrary interior angle
        auto h_of = [chart, hamiltonian, theta0](double I) {
            return hamiltonian(chart.x_of(I, theta0), chart.y_of(I, theta0));
        };
        const double h1 = 1e-5 * chart.I_range.width();
        omega = [h_of, h1](double I) { return numerics::diff1(h_of, I, h1); };
    }
    const double w = chart.I_range.width();
    FrequencyProfile p;
    p.omega = omega;
    p.b1 = [omega, w](double I) { return numerics::diff1(omega, I, 1e-4 * w); };
    p.b2 = [omega, w](double I) { return numerics::diff2(omega, I, 2e-3 * w) / 2.0; };
    p.b3 = [omega, w](double I) { return numerics::diff3(omega, I, 5e-3 * w) / 6.0; };
    return p;
}

}  // namespace reskit
