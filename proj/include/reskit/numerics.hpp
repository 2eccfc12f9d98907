#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace reskit {

/// Shared numerical machinery: periodic quadrature, trigonometric series,
/// Richardson-extrapolated difference stencils, scalar root finding, and a
/// reproducible uniform generator.
namespace numerics {

/// Equal-weight trapezoid rule over one period [a, b); spectrally accurate
/// for smooth periodic integrands.
template <typename F>
double periodic_trapezoid(F&& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += f(a + i * h);
    return s * h;
}

/// Periodic trapezoid with node doubling until successive values agree to
/// `tol` (absolute).  Throws on nonconvergence.
template <typename F>
double integrate_periodic(F&& f, double a, double b, double tol = 1e-12,
                          int n0 = 64, int nmax = 1 << 16) {
    int n = n0;
    double prev = periodic_trapezoid(f, a, b, n);
    while (n < nmax) {
        // refine by interleaving midpoints
        const double h = (b - a) / n;
        double mids = 0.0;
        for (int i = 0; i < n; ++i) mids += f(a + (i + 0.5) * h);
        const double cur = 0.5 * (prev + mids * h);
        n *= 2;
        if (std::fabs(cur - prev) < tol * std::max(1.0, std::fabs(cur))) return cur;
        prev = cur;
    }
    throw std::runtime_error("integrate_periodic: quadrature did not converge");
}

/// Real trigonometric polynomial  a0 + sum_j [ac_j cos(j w v) + as_j sin(j w v)]
/// with fundamental frequency w.  Used for the resonance-zone coefficient
/// functions, which are smooth and (2 pi / n)-periodic in the slow phase.
struct FourierSeries {
    double w = 1.0;                ///< fundamental angular frequency
    double a0 = 0.0;               ///< mean value
    std::vector<double> ac, as;    ///< harmonic coefficients, index j-1

    double mean() const { return a0; }

    double eval(double v) const {
        double s = a0;
        for (std::size_t j = 1; j <= ac.size(); ++j) {
            const double t = j * w * v;
            s += ac[j - 1] * std::cos(t) + as[j - 1] * std::sin(t);
        }
        return s;
    }

    /// Mean-free part.
    double eval_tilde(double v) const { return eval(v) - a0; }

    double deriv(double v) const {
        double s = 0.0;
        for (std::size_t j = 1; j <= ac.size(); ++j) {
            const double jw = j * w, t = jw * v;
            s += jw * (-ac[j - 1] * std::sin(t) + as[j - 1] * std::cos(t));
        }
        return s;
    }

    /// Antiderivative of the mean-free part, normalized to vanish at v = 0.
    double antideriv_tilde(double v) const {
        double s = 0.0;
        for (std::size_t j = 1; j <= ac.size(); ++j) {
            const double jw = j * w, t = jw * v;
            s += (ac[j - 1] * std::sin(t) - as[j - 1] * (std::cos(t) - 1.0)) / jw;
        }
        return s;
    }

    double max_abs_tilde() const {
        double s = 0.0;
        for (std::size_t j = 0; j < ac.size(); ++j)
            s += std::hypot(ac[j], as[j]);
        return s;  // upper bound by the triangle inequality
    }
};

/// Fit a FourierSeries to M equispaced samples of one period [0, 2 pi / w).
/// Keeps harmonics below the Nyquist index; the caller is responsible for
/// sampling densely enough that the spectrum has decayed.
inline FourierSeries fit_fourier(const std::vector<double>& samples, double w) {
    const int m = static_cast<int>(samples.size());
    if (m < 4) throw std::invalid_argument("fit_fourier: need at least 4 samples");
    FourierSeries f;
    f.w = w;
    double mean = 0.0;
    for (double s : samples) mean += s;
    f.a0 = mean / m;
    const int jmax = (m - 1) / 2;
    f.ac.resize(jmax);
    f.as.resize(jmax);
    for (int j = 1; j <= jmax; ++j) {
        double c = 0.0, s = 0.0;
        for (int i = 0; i < m; ++i) {
            const double t = 2.0 * M_PI * j * i / m;
            c += samples[i] * std::cos(t);
            s += samples[i] * std::sin(t);
        }
        f.ac[j - 1] = 2.0 * c / m;
        f.as[j - 1] = 2.0 * s / m;
    }
    return f;
}

/// Richardson-extrapolated central first derivative, O(h^4).
template <typename F>
double diff1(F&& f, double x, double h) {
    const double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    const double d2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h;
    return (4.0 * d2 - d1) / 3.0;
}

/// Richardson-extrapolated central second derivative, O(h^4).
template <typename F>
double diff2(F&& f, double x, double h) {
    const double f0 = f(x);
    const double s1 = (f(x + h) - 2.0 * f0 + f(x - h)) / (h * h);
    const double s2 = (f(x + 0.5 * h) - 2.0 * f0 + f(x - 0.5 * h)) / (0.25 * h * h);
    return (4.0 * s2 - s1) / 3.0;
}

/// Richardson-extrapolated central third derivative, O(h^4).
template <typename F>
double diff3(F&& f, double x, double h) {
    auto stencil = [&](double hh) {
        return (f(x + 2.0 * hh) - 2.0 * f(x + hh) + 2.0 * f(x - hh) - f(x - 2.0 * hh)) /
               (2.0 * hh * hh * hh);
    };
    const double t1 = stencil(h), t2 = stencil(0.5 * h);
    return (4.0 * t2 - t1) / 3.0;
}

/// Bisection: f(lo), f(hi) must bracket a sign change.  Returns the midpoint
/// of the final bracket; width tolerance is absolute.
template <typename F>
double bisect(F&& f, double lo, double hi, double xtol = 1e-14, int max_iter = 200) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw std::invalid_argument("bisect: endpoints do not bracket a root");
    for (int i = 0; i < max_iter && hi - lo > xtol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Newton refinement with bisection fallback inside a bracketing interval.
template <typename F, typename DF>
double newton_bisect(F&& f, DF&& df, double lo, double hi, double x0,
                     double xtol = 1e-13, int max_iter = 100) {
    double flo = f(lo), fhi = f(hi);
    if ((flo > 0.0) == (fhi > 0.0))
        throw std::invalid_argument("newton_bisect: endpoints do not bracket a root");
    double x = x0;
    for (int i = 0; i < max_iter; ++i) {
        const double fx = f(x);
        if (fx == 0.0) return x;
        if ((fx > 0.0) == (flo > 0.0)) lo = x; else hi = x;
        const double d = df(x);
        double xn = (d != 0.0) ? x - fx / d : 0.5 * (lo + hi);
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        if (std::fabs(xn - x) < xtol) return xn;
        x = xn;
    }
    return x;
}

/// Deterministic uniform generator on [0, 1).  splitmix64-based so that
/// streams are identical across platforms and standard library versions.
class UniformRng {
public:
    explicit UniformRng(std::uint64_t seed) : state_(seed) {}

    double next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }

    /// Uniform on [lo, hi).
    double range(double lo, double hi) { return lo + (hi - lo) * next(); }

private:
    std::uint64_t state_;
};

}  // namespace numerics
}  // namespace reskit
