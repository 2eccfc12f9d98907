#pragma once

// Test-only oracles, independent of the library's own quadrature and
// differentiation paths.

#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracles {

namespace detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_step(F&& f, double a, double b, double fa, double fm, double fb, double whole,
                     double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    if (depth <= 0) return left + right;
    if (std::fabs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature.
template <typename F>
double integrate(F&& f, double a, double b, double tol = 1e-13) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = detail::simpson(a, b, fa, fm, fb);
    return detail::adaptive_step(f, a, b, fa, fm, fb, whole, tol, 48);
}

/// Central difference with one Richardson step (test-side implementation).
template <typename F>
double derivative(F&& f, double x, double h) {
    const double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    const double d2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h;
    return (4.0 * d2 - d1) / 3.0;
}

template <typename F>
double second_derivative(F&& f, double x, double h) {
    const double f0 = f(x);
    const double s1 = (f(x + h) - 2.0 * f0 + f(x - h)) / (h * h);
    const double s2 = (f(x + 0.5 * h) - 2.0 * f0 + f(x - 0.5 * h)) / (0.25 * h * h);
    return (4.0 * s2 - s1) / 3.0;
}

}  // namespace oracles
