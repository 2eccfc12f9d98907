#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace reskit {

/// Complete elliptic integrals, Jacobi elliptic functions, the nome, and the
/// trigonometric (nome-power) series used by the oscillation-cell chart of a
/// pendulum-type system.  Everything is computed from scratch: K and E by the
/// arithmetic-geometric mean, sn/cn/dn and the zeta function by a descending
/// Landen chain built on the same AGM scale sequence.
namespace elliptic {

namespace detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

inline void require(bool cond, const char* msg) {
    if (!cond) throw std::domain_error(msg);
}

/// Complementary modulus sqrt(1 - k^2) without cancellation near k = 1.
inline double complementary_modulus(double k) {
    return k < 0.5 ? std::sqrt(1.0 - k * k)
                   : std::sqrt((1.0 - k) * (1.0 + k));
}

/// Scale sequence of the descending Landen transformation for modulus k.
/// Iterates a <- (a+b)/2, b <- sqrt(ab) until the transformed modulus
/// c/a underflows; quadratic convergence keeps the depth below ~10 for
/// any modulus representable in double precision.
struct AgmChain {
    static constexpr int kMaxDepth = 32;
    std::array<double, kMaxDepth + 1> a{}, b{}, c{};
    int depth = 0;

    explicit AgmChain(double k) {
        a[0] = 1.0;
        b[0] = complementary_modulus(k);
        c[0] = k;
        while (depth < kMaxDepth && std::fabs(c[depth]) > kEps * a[depth]) {
            const double an = 0.5 * (a[depth] + b[depth]);
            const double bn = std::sqrt(a[depth] * b[depth]);
            const double cn = 0.5 * (a[depth] - b[depth]);
            ++depth;
            a[depth] = an;
            b[depth] = bn;
            c[depth] = cn;
        }
    }

    double complete_k() const { return M_PI / (2.0 * a[depth]); }
};

}  // namespace detail

/// K(k), complete elliptic integral of the first kind.  Valid for 0 <= k < 1.
inline double complete_k(double k) {
    detail::require(k >= 0.0 && k < 1.0, "complete_k: modulus must satisfy 0 <= k < 1");
    if (k == 0.0) return M_PI_2;
    return detail::AgmChain(k).complete_k();
}

/// E(k), complete elliptic integral of the second kind.  Valid for 0 <= k <= 1.
inline double complete_e(double k) {
    detail::require(k >= 0.0 && k <= 1.0, "complete_e: modulus must satisfy 0 <= k <= 1");
    if (k == 0.0) return M_PI_2;
    if (k == 1.0) return 1.0;
    const detail::AgmChain chain(k);
    double sum = 0.5 * k * k;  // 2^{-1} c_0^2
    double pow2 = 0.5;
    for (int n = 1; n <= chain.depth; ++n) {
        pow2 *= 2.0;
        sum += pow2 * chain.c[n] * chain.c[n];
    }
    return chain.complete_k() * (1.0 - sum);
}

/// Nome a = exp(-pi K(k') / K(k)).  Valid for 0 < k < 1; the k -> 0 and
/// k -> 1 limits (0 and 1) are singular for downstream series and rejected.
inline double nome(double k) {
    detail::require(k > 0.0 && k < 1.0, "nome: modulus must satisfy 0 < k < 1");
    const double kp = detail::complementary_modulus(k);
    return std::exp(-M_PI * complete_k(kp) / complete_k(k));
}

struct JacobiTriple {
    double sn;
    double cn;
    double dn;
};

/// sn, cn, dn at argument u by the descending Landen transformation: unwind
/// the amplitude through the AGM chain.  Accuracy is uniform over the full
/// period; valid for finite u and 0 <= k < 1.
inline JacobiTriple jacobi_sn_cn_dn(double u, double k) {
    detail::require(std::isfinite(u), "jacobi_sn_cn_dn: argument must be finite");
    detail::require(k >= 0.0 && k < 1.0, "jacobi_sn_cn_dn: modulus must satisfy 0 <= k < 1");
    if (k == 0.0) return {std::sin(u), std::cos(u), 1.0};
    if (k < 1e-10) {
        // circular limit with the leading modulus correction
        const double su = std::sin(u), cu = std::cos(u), m = k * k;
        return {su - 0.25 * m * (u - su * cu) * cu,
                cu + 0.25 * m * (u - su * cu) * su,
                1.0 - 0.5 * m * su * su};
    }
    const detail::AgmChain chain(k);
    std::array<double, detail::AgmChain::kMaxDepth + 1> phi{};
    phi[chain.depth] = std::ldexp(chain.a[chain.depth] * u, chain.depth);
    for (int n = chain.depth; n > 0; --n) {
        const double s = chain.c[n] / chain.a[n] * std::sin(phi[n]);
        phi[n - 1] = 0.5 * (phi[n] + std::asin(std::clamp(s, -1.0, 1.0)));
    }
    const double sn = std::sin(phi[0]);
    const double cn = std::cos(phi[0]);
    // dn^2 = k'^2 + k^2 cn^2: cancellation-free, exact at the quarter period.
    const double kp = detail::complementary_modulus(k);
    const double dn = std::sqrt(kp * kp + k * k * cn * cn);
    return {sn, cn, dn};
}

/// Jacobi zeta Z(u,k) = E(u,k) - u E(k)/K(k); odd in u, 2K-periodic.
/// Accumulated from the same Landen amplitude unwinding as sn/cn/dn.
inline double jacobi_zeta(double u, double k) {
    detail::require(std::isfinite(u), "jacobi_zeta: argument must be finite");
    detail::require(k > 0.0 && k < 1.0, "jacobi_zeta: modulus must satisfy 0 < k < 1");
    const detail::AgmChain chain(k);
    double phi = std::ldexp(chain.a[chain.depth] * u, chain.depth);
    double zeta = 0.0;
    for (int n = chain.depth; n > 0; --n) {
        zeta += chain.c[n] * std::sin(phi);
        const double s = chain.c[n] / chain.a[n] * std::sin(phi);
        phi = 0.5 * (phi + std::asin(std::clamp(s, -1.0, 1.0)));
    }
    return zeta;
}

/// Series in the nome for the oscillation-cell chart x(k,theta) of the
/// pendulum cell and its action derivatives through second order.  Each
/// series runs over odd harmonics (2j-1) with terms decaying like a^j, so
/// the adaptive truncation (relative 1e-15, hard cap 64 terms) converges
/// in a handful of terms except very close to the separatrix.
class FourierKernels {
public:
    static constexpr int kMaxTerms = 64;

    explicit FourierKernels(double k)
        : k_(k),
          a_(nome(k)),
          bigk_(complete_k(k)),
          bige_(complete_e(k)) {
        const double k2 = k_ * k_, kp2 = 1.0 - k2;
        const double k3 = bigk_ * bigk_ * bigk_;
        c1_ = M_PI * M_PI * M_PI / (4.0 * k2 * kp2 * k3);
        c2_ = std::pow(M_PI, 4) / (32.0 * k2 * k2 * kp2 * kp2 * k3 * bigk_ * bigk_);
        g1_ = (1.0 + k2) * bigk_ - 3.0 * bige_;
        g2_ = M_PI * M_PI / (4.0 * bigk_);
        sqrt_a_ = std::sqrt(a_);
    }

    double modulus() const { return k_; }
    double nome_value() const { return a_; }
    double big_k() const { return bigk_; }
    double big_e() const { return bige_; }

    /// x(theta): odd-harmonic sine series of the chart angle map.
    double x(double theta) const {
        return sum([&](int j, double aj, double q) {
            return std::pair{8.0 * aj / ((2 * j - 1) * (1.0 + q)),
                             std::sin((2 * j - 1) * theta)};
        });
    }

    /// dx/dtheta = (4kK/pi) cn(2K theta/pi, k) as a cosine series.
    double x_dtheta(double theta) const {
        return sum([&](int j, double aj, double q) {
            return std::pair{8.0 * aj / (1.0 + q), std::cos((2 * j - 1) * theta)};
        });
    }

    /// dx/dI.
    double x_dI(double theta) const {
        return c1_ * sum([&](int j, double aj, double q) {
            const double d = 1.0 + q;
            return std::pair{aj * (1.0 - q) / (d * d), std::sin((2 * j - 1) * theta)};
        });
    }

    /// d/dI (dx/dtheta).
    double x_dI_dtheta(double theta) const {
        return c1_ * sum([&](int j, double aj, double q) {
            const double d = 1.0 + q;
            return std::pair{(2 * j - 1) * aj * (1.0 - q) / (d * d),
                             std::cos((2 * j - 1) * theta)};
        });
    }

    /// d^2x/dI^2.
    double x_dII(double theta) const {
        const double s1 = sum([&](int j, double aj, double q) {
            const double d = 1.0 + q;
            return std::pair{aj * (1.0 - q) / (d * d), std::sin((2 * j - 1) * theta)};
        });
        const double s2 = sum([&](int j, double aj, double q) {
            const double d = 1.0 + q;
            return std::pair{(2 * j - 1) * aj * (1.0 - 6.0 * q + q * q) / (d * d * d),
                             std::sin((2 * j - 1) * theta)};
        });
        return c2_ * (g1_ * s1 + g2_ * s2);
    }

    /// d^2/dI^2 (dx/dtheta).
    double x_dII_dtheta(double theta) const {
        const double s1 = sum([&](int j, double aj, double q) {
            const double d = 1.0 + q;
            return std::pair{(2 * j - 1) * aj * (1.0 - q) / (d * d),
                             std::cos((2 * j - 1) * theta)};
        });
        const double s2 = sum([&](int j, double aj, double q) {
            const double d = 1.0 + q;
            const double m = 2 * j - 1;
            return std::pair{m * m * aj * (1.0 - 6.0 * q + q * q) / (d * d * d),
                             std::cos((2 * j - 1) * theta)};
        });
        return c2_ * (g1_ * s1 + g2_ * s2);
    }

private:
    // Term callbacks return the coefficient and angular factor separately;
    // truncation tests the angle-free coefficient envelope so that an
    // accidental zero of cos((2j-1)theta) cannot cut the series short.
    template <typename Term>
    double sum(Term term) const {
        double acc = 0.0, scale = 0.0;
        double aj = sqrt_a_;         // a^{j-1/2}
        double q = a_;               // a^{2j-1}
        const double a2 = a_ * a_;
        for (int j = 1; j <= kMaxTerms; ++j) {
            const auto [coef, angular] = term(j, aj, q);
            acc += coef * angular;
            scale = std::max({scale, std::fabs(acc), std::fabs(coef)});
            if (std::fabs(coef) < 1e-15 * scale || std::fabs(coef) < 1e-300) break;
            aj *= a_;
            q *= a2;
        }
        return acc;
    }

    double k_, a_, bigk_, bige_;
    double c1_, c2_, g1_, g2_, sqrt_a_;
};

/// Partial sum of (4kK/pi) cn(2K theta/pi, k) as a cosine series in the nome,
/// truncated adaptively (see FourierKernels) with a hard cap of max_terms.
inline double fourier_cn_series(double k, double theta, int max_terms = FourierKernels::kMaxTerms) {
    detail::require(k > 0.0 && k < 1.0, "fourier_cn_series: modulus must satisfy 0 < k < 1");
    const double a = nome(k);
    const double a2 = a * a;
    double aj = std::sqrt(a), q = a;
    double acc = 0.0, scale = 0.0;
    for (int j = 1; j <= max_terms; ++j) {
        const double coef = 8.0 * aj / (1.0 + q);
        acc += coef * std::cos((2 * j - 1) * theta);
        scale = std::max({scale, std::fabs(acc), coef});
        if (coef < 1e-15 * scale || coef < 1e-300) break;
        aj *= a;
        q *= a2;
    }
    return acc;
}

}  // namespace elliptic
}  // namespace reskit
