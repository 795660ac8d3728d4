#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "hypotube/skeleton.hpp"

namespace hypotube {

/// Calibration constants of the tube bound formulas. The theorems only assert
/// existence of universal values, so these are user-facing configuration.
struct BoundConstants {
    double K = 1.0;
    double q = 1.0;
    double mu = 1.0;
    double h = 1.0;

    void validate() const {
        if (!(K >= 1.0) || !(q >= 1.0) || !(mu >= 1.0) || !(h > 0.0))
            throw ConfigError("bound constants need K, q, mu >= 1 and h > 0");
    }
};

/// Hypothesis bounds and control along the skeleton, as functions of time.
struct TubeProfiles {
    std::function<double(double)> n_t;       // >= 1
    std::function<double(double)> lambda_t;  // in (0, 1]
    Control phi;
};

/// Lower-bound driving rate
/// f_R(t) = K (mu n_t / lambda_t)^q (1/h + 1/R + |phi_t|^2).
inline double rate_f(const BoundConstants& c, double R, const TubeProfiles& p, double t) {
    c.validate();
    if (!(R > 0.0) || R > 1.0) throw RangeError("rate_f: R must lie in (0, 1]");
    const double v = p.phi.value_at(t);
    return c.K * std::pow(c.mu * p.n_t(t) / p.lambda_t(t), c.q) * (1.0 / c.h + 1.0 / R + v * v);
}

/// Upper-bound driving rate
/// g_R(t) = (1/K) (lambda_t / (mu n_t))^q (1/R + |phi_t|^2). No 1/h term.
inline double rate_g(const BoundConstants& c, double R, const TubeProfiles& p, double t) {
    c.validate();
    if (!(R > 0.0) || R > 1.0) throw RangeError("rate_g: R must lie in (0, 1]");
    const double v = p.phi.value_at(t);
    return std::pow(p.lambda_t(t) / (c.mu * p.n_t(t)), c.q) / c.K * (1.0 / R + v * v);
}

namespace detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double fa, double fm, double fb, double whole, double tol,
                               int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    if (b <= a) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    return adaptive_simpson(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 40);
}

/// Brent root finder on [a, b] for a function with f(a) f(b) <= 0.
inline double brent(const std::function<double(double)>& f, double a, double b, double tol) {
    double fa = f(a), fb = f(b);
    if (fa * fb > 0.0) throw RangeError("brent: root not bracketed");
    if (std::abs(fa) < std::abs(fb)) {
        std::swap(a, b);
        std::swap(fa, fb);
    }
    double c = a, fc = fa, d = b - a;
    bool mflag = true;
    for (int it = 0; it < 200 && std::abs(fb) > tol && std::abs(b - a) > 1e-15; ++it) {
        double s;
        if (fa != fc && fb != fc) {
            s = a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) +
                c * fa * fb / ((fc - fa) * (fc - fb));
        } else {
            s = b - fb * (b - a) / (fb - fa);
        }
        const double lo = 0.25 * (3.0 * a + b);
        const bool bad = !((s > std::min(lo, b) && s < std::max(lo, b))) ||
                         (mflag && std::abs(s - b) >= 0.5 * std::abs(b - c)) ||
                         (!mflag && std::abs(s - b) >= 0.5 * std::abs(c - d));
        if (bad) {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        const double fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if (fa * fs < 0.0) {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if (std::abs(fa) < std::abs(fb)) {
            std::swap(a, b);
            std::swap(fa, fb);
        }
    }
    return b;
}

}  // namespace detail

/// Adaptive concatenation grid: successive knots carrying unit integral of
/// the driving rate. The trailing partial interval is kept (with its
/// integral), and both knot-count conventions are recoverable:
/// n_complete intervals of integral one, plus the flagged tail.
struct GridSpec {
    std::vector<double> knots;               // t_0 = 0 < ... <= T
    std::vector<double> interval_integrals;  // = 1 +- 1e-10 except possibly the last
    std::size_t n_complete = 0;
    bool partial_tail = false;
    bool degenerate_tail = false;  // rate vanished identically on a suffix
};

inline GridSpec build_grid(const std::function<double(double)>& rate, double T) {
    if (!(T > 0.0)) throw RangeError("build_grid: T must be positive");
    constexpr double kTol = 1e-10;
    GridSpec g;
    g.knots.push_back(0.0);
    double t = 0.0;
    while (t < T) {
        const double remaining = detail::integrate(rate, t, T, 1e-13);
        if (remaining < 1.0 - kTol) {
            g.knots.push_back(T);
            g.interval_integrals.push_back(remaining);
            g.partial_tail = true;
            g.degenerate_tail = remaining <= 10.0 * kTol;  // zero up to the knot tolerance
            break;
        }
        const auto shortfall = [&](double u) { return detail::integrate(rate, t, u, 1e-13) - 1.0; };
        // locate a point past the unit level, then refine to the infimum (the
        // rate may vanish on a plateau, where the level set is an interval)
        double hi = remaining <= 1.0 + kTol ? T : detail::brent(shortfall, t, T, kTol);
        double lo = t;
        while (hi - lo > 1e-12 * (1.0 + T)) {
            const double mid = 0.5 * (lo + hi);
            if (shortfall(mid) >= -kTol)
                hi = mid;
            else
                lo = mid;
        }
        g.knots.push_back(hi);
        g.interval_integrals.push_back(detail::integrate(rate, t, hi, 1e-13));
        ++g.n_complete;
        t = hi;
    }
    return g;
}

namespace detail {

/// Quadrature of a rate over [0, T] split at the control knots: exact for
/// per-interval-constant profiles, high-order Simpson panels otherwise.
inline double integrate_over_control(const std::function<double(double)>& rate,
                                     const Control& phi, double T) {
    double total = 0.0;
    const auto& knots = phi.knots();
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double a = std::min(knots[i], T), b = std::min(knots[i + 1], T);
        if (b <= a) continue;
        const int panels = 16;
        const double h = (b - a) / panels;
        double s = rate(a) + rate(b);
        for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * rate(a + k * h);
        total += s * h / 3.0;
    }
    return total;
}

}  // namespace detail

/// exp(- int_0^T f_R): valid for every R in (0, 1].
inline double tube_lower_bound(const BoundConstants& c, double R, const TubeProfiles& p,
                               double T) {
    c.validate();
    const auto f = [&](double t) { return rate_f(c, R, p, t); };
    return std::exp(-detail::integrate_over_control(f, p.phi, T));
}

/// exp(- int_0^T g_R): valid only in the regime R <= R_*(phi).
inline double tube_upper_bound(const BoundConstants& c, double R, const TubeProfiles& p, double T,
                               double r_star_value) {
    c.validate();
    if (R > r_star_value * (1.0 + 1e-12)) throw ValidityError(R, r_star_value);
    const auto g = [&](double t) { return rate_g(c, R, p, t); };
    return std::exp(-detail::integrate_over_control(g, p.phi, T));
}

}  // namespace hypotube
