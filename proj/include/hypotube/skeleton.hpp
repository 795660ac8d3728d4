#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "hypotube/model.hpp"

namespace hypotube {

/// Scalar control, piecewise constant on a knot grid covering [0, T].
class Control {
  public:
    Control() = default;
    Control(std::vector<double> knots, std::vector<double> values)
        : knots_(std::move(knots)), values_(std::move(values)) {
        if (knots_.size() < 2 || values_.size() + 1 != knots_.size())
            throw ConfigError("control: need n+1 knots for n interval values");
        if (knots_.front() != 0.0) throw ConfigError("control: grid must start at 0");
        for (std::size_t i = 0; i + 1 < knots_.size(); ++i)
            if (!(knots_[i] < knots_[i + 1]))
                throw ConfigError("control: knots must be strictly increasing");
        for (double v : values_)
            if (!std::isfinite(v)) throw ConfigError("control: values must be finite");
    }

    static Control zero(double T) { return Control({0.0, T}, {0.0}); }
    static Control constant(double c, double T) { return Control({0.0, T}, {c}); }

    /// Piecewise-constant sampling of a function at interval midpoints.
    static Control sampled(const std::function<double(double)>& f, double T, int n_intervals) {
        if (n_intervals < 1) throw ConfigError("control: need at least one interval");
        std::vector<double> knots(n_intervals + 1), values(n_intervals);
        for (int i = 0; i <= n_intervals; ++i) knots[i] = T * i / n_intervals;
        for (int i = 0; i < n_intervals; ++i) values[i] = f(0.5 * (knots[i] + knots[i + 1]));
        return Control(std::move(knots), std::move(values));
    }

    double T() const { return knots_.back(); }
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }

    double value_at(double t) const {
        if (t <= knots_.front()) return values_.front();
        if (t >= knots_.back()) return values_.back();
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
    }

    /// Exact integral of |phi|^2 over [t0, t1] within [0, T].
    double energy_sq(double t0, double t1) const {
        double s = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i) {
            const double a = std::max(t0, knots_[i]);
            const double b = std::min(t1, knots_[i + 1]);
            if (b > a) s += values_[i] * values_[i] * (b - a);
        }
        return s;
    }

  private:
    std::vector<double> knots_{0.0, 1.0};
    std::vector<double> values_{0.0};
};

/// Control energy over a window: sqrt of int_t^{t+delta} |phi|^2.
inline double energy(const Control& phi, double t, double delta) {
    constexpr double kSlack = 1e-12;
    if (delta < 0.0 || t < -kSlack || t + delta > phi.T() * (1.0 + kSlack) + kSlack)
        throw RangeError("energy window must lie inside [0, T]");
    return std::sqrt(phi.energy_sq(t, t + delta));
}

struct SkeletonPath {
    std::vector<double> times;
    std::vector<Vec2> points;

    /// Node lookup (the solvers place nodes at every requested time).
    const Vec2& at_time(double t) const {
        const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12);
        if (it == times.end() || std::abs(*it - t) > 1e-9)
            throw RangeError("skeleton path has no node at the requested time");
        return points[static_cast<std::size_t>(it - times.begin())];
    }
};

namespace detail {

inline Vec2 skeleton_rhs(const DiffusionModel& m, const Vec2& x, double phi) {
    return phi * m.sigma.value(x) + m.drift.value(x);
}

/// One classical fourth-order step of dx = sigma(x) phi + b(x) over [t, t+h]
/// with phi constant on the step.
inline Vec2 rk4_step(const DiffusionModel& m, const Vec2& x, double phi, double h) {
    const Vec2 k1 = skeleton_rhs(m, x, phi);
    const Vec2 k2 = skeleton_rhs(m, x + (0.5 * h) * k1, phi);
    const Vec2 k3 = skeleton_rhs(m, x + (0.5 * h) * k2, phi);
    const Vec2 k4 = skeleton_rhs(m, x + h * k3, phi);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Integrates across the union of control knots and requested output times,
/// with `substeps` uniform stages per gap; records a node at every breakpoint.
inline SkeletonPath integrate_on(const DiffusionModel& m, const Vec2& x0, const Control& phi,
                                 std::span<const double> breakpoints, int substeps) {
    SkeletonPath path;
    path.times.assign(breakpoints.begin(), breakpoints.end());
    path.points.reserve(breakpoints.size());
    Vec2 x = x0;
    m.require_inside(x);
    path.points.push_back(x);
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const double a = breakpoints[i], b = breakpoints[i + 1];
        const double v = phi.value_at(0.5 * (a + b));
        const double h = (b - a) / substeps;
        for (int s = 0; s < substeps; ++s) x = rk4_step(m, x, v, h);
        if (!m.domain.contains(x)) throw DomainExit(b);
        path.points.push_back(x);
    }
    return path;
}

inline std::vector<double> merge_breakpoints(const std::vector<double>& a,
                                             std::span<const double> b) {
    std::vector<double> out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [](double u, double v) { return std::abs(u - v) < 1e-13; }),
              out.end());
    return out;
}

}  // namespace detail

/// Deterministic skeleton dx = sigma(x) phi_t + b(x) dt from x0 over [0, T].
/// Fourth-order one-step integration per knot interval; the step count is
/// doubled until the endpoint moves by less than 1e-6 relative.
inline SkeletonPath solve_skeleton(const DiffusionModel& model, const Vec2& x0,
                                   const Control& phi, int steps_per_knot = 16) {
    if (steps_per_knot < 1) throw ConfigError("solve_skeleton: steps_per_knot >= 1 required");
    model.require_inside(x0);
    SkeletonPath prev = detail::integrate_on(model, x0, phi, phi.knots(), steps_per_knot);
    for (int refine = 0; refine < 8; ++refine) {
        steps_per_knot *= 2;
        SkeletonPath next = detail::integrate_on(model, x0, phi, phi.knots(), steps_per_knot);
        const double scale = 1.0 + norm(next.points.back());
        if (norm(next.points.back() - prev.points.back()) <= 1e-6 * scale) return next;
        prev = std::move(next);
    }
    throw StepFailure("solve_skeleton: step halving did not converge");
}

/// Skeleton solved so that every requested time is a node (plus the knots).
inline SkeletonPath solve_skeleton_on(const DiffusionModel& model, const Vec2& x0,
                                      const Control& phi, std::span<const double> times,
                                      int substeps = 4) {
    return detail::integrate_on(model, x0, phi,
                                detail::merge_breakpoints(phi.knots(), times), substeps);
}

struct GrowthCheckResult {
    bool pass = true;
    double witness_s = 0.0;  // f(t) > mu f(s) at this pair when pass is false
    double witness_t = 0.0;
    double ratio = 0.0;
};

/// Membership test for the growth class: f(t) <= mu f(s) whenever |t-s| <= h,
/// over samples of f on a uniform grid covering [0, T]. The grid must be
/// finer than h/4. Equality at the boundary passes (relative slack 1e-12).
inline GrowthCheckResult growth_class_check(std::span<const double> f, double T, double mu,
                                            double h) {
    if (f.size() < 2) throw GridTooCoarse("growth_class_check: need at least two samples");
    if (!(mu >= 1.0) || !(h > 0.0))
        throw RangeError("growth_class_check: need mu >= 1 and h > 0");
    const double spacing = T / static_cast<double>(f.size() - 1);
    if (spacing > h / 4.0)
        throw GridTooCoarse("growth_class_check: sample grid coarser than h/4");
    const auto window = static_cast<std::ptrdiff_t>(std::floor(h / spacing + 1e-9));
    const auto n = static_cast<std::ptrdiff_t>(f.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        for (std::ptrdiff_t d = window; d >= 1; --d) {
            const std::ptrdiff_t j = i + d;
            if (j >= n) continue;
            // check both orderings of (s, t)
            const double hi = std::max(f[i], f[j]);
            const double lo = std::min(f[i], f[j]);
            if (hi > mu * lo * (1.0 + 1e-12)) {
                GrowthCheckResult r;
                r.pass = false;
                r.witness_s = (f[i] <= f[j] ? i : j) * spacing;
                r.witness_t = (f[i] <= f[j] ? j : i) * spacing;
                r.ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
                return r;
            }
        }
    }
    return {};
}

namespace detail {

/// Length of the shortest window over which the control accumulates unit
/// energy; +infinity when the total energy stays below one. Exact for
/// piecewise-constant controls: the cumulative energy is piecewise linear,
/// so the minimum is attained with one endpoint at a knot (or its unit-level
/// preimage).
inline double min_unit_energy_window(const Control& phi) {
    const auto& knots = phi.knots();
    std::vector<double> cum(knots.size(), 0.0);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i)
        cum[i + 1] = cum[i] + phi.energy_sq(knots[i], knots[i + 1]);
    const double total = cum.back();
    if (total < 1.0) return std::numeric_limits<double>::infinity();

    // cumulative energy and its inverse, both read off the same table so the
    // window arithmetic is self-consistent
    const auto cum_at = [&](double t) {
        if (t <= knots.front()) return 0.0;
        if (t >= knots.back()) return total;
        const auto it = std::upper_bound(knots.begin(), knots.end(), t);
        const std::size_t i = static_cast<std::size_t>(it - knots.begin()) - 1;
        const double w = (t - knots[i]) / (knots[i + 1] - knots[i]);
        return cum[i] + w * (cum[i + 1] - cum[i]);
    };
    const auto inv = [&](double e) {  // earliest time at or past level e
        if (e <= 0.0) return knots.front();
        if (e >= total) return knots.back();
        const auto it = std::lower_bound(cum.begin(), cum.end(), e);
        const std::size_t k = static_cast<std::size_t>(it - cum.begin());
        const double de = cum[k] - cum[k - 1];  // > 0 since cum[k-1] < e <= cum[k]
        return knots[k - 1] + (e - cum[k - 1]) / de * (knots[k] - knots[k - 1]);
    };

    std::vector<double> starts(knots.begin(), knots.end());
    for (double c : cum)
        if (c >= 1.0) starts.push_back(inv(c - 1.0));
    double best = std::numeric_limits<double>::infinity();
    for (double t : starts) {
        const double target = cum_at(t) + 1.0;
        if (target > total * (1.0 + 1e-12) + 1e-12) continue;
        best = std::min(best, std::max(0.0, inv(std::min(target, total)) - t));
    }
    return best;
}

}  // namespace detail

/// Largest admissible tube scale R_*: the infimum over time of
/// (lambda_t / (K mu n_t))^q multiplied by min(h, shortest unit-energy
/// window of the control). Profiles are sampled on the control knots plus a
/// uniform refinement.
inline double r_star(const Control& phi, const std::function<double(double)>& n_profile,
                     const std::function<double(double)>& lambda_profile, double mu, double h,
                     double K, double q) {
    if (!(mu >= 1.0) || !(K >= 1.0) || !(q >= 1.0) || !(h > 0.0))
        throw RangeError("r_star: need K, q, mu >= 1 and h > 0");
    std::vector<double> grid(513);
    for (std::size_t i = 0; i < grid.size(); ++i)
        grid[i] = phi.T() * static_cast<double>(i) / static_cast<double>(grid.size() - 1);
    std::vector<double> ts = detail::merge_breakpoints(phi.knots(), grid);
    double factor = std::numeric_limits<double>::infinity();
    for (double t : ts)
        factor = std::min(factor, std::pow(lambda_profile(t) / (K * mu * n_profile(t)), q));
    const double window = std::min(h, detail::min_unit_energy_window(phi));
    return factor * window;
}

}  // namespace hypotube
