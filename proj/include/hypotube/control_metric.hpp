#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "hypotube/norms.hpp"
#include "hypotube/parallel.hpp"
#include "hypotube/rng.hpp"

namespace hypotube {

/// Two-component control on the unit time interval, piecewise constant.
/// Steers dv = sigma(v) phi1 + [b,sigma](v) phi2.
struct Control2 {
    std::vector<double> knots;                   // 0 = t_0 < ... < t_m = 1
    std::vector<std::array<double, 2>> values;   // per interval

    static Control2 uniform(int n_intervals, std::array<double, 2> v = {0.0, 0.0}) {
        if (n_intervals < 1) throw ConfigError("Control2: need at least one interval");
        Control2 c;
        c.knots.resize(n_intervals + 1);
        for (int i = 0; i <= n_intervals; ++i)
            c.knots[i] = static_cast<double>(i) / n_intervals;
        c.values.assign(n_intervals, v);
        return c;
    }

    std::size_t intervals() const { return values.size(); }
};

/// Anisotropic control cost: the L2 norm of (|phi1|, |phi2|^{1/3}) over the
/// unit time interval; exact piecewise quadrature.
inline double norm_13(const Control2& phi) {
    double s = 0.0;
    for (std::size_t i = 0; i < phi.values.size(); ++i) {
        const double len = phi.knots[i + 1] - phi.knots[i];
        const double a = phi.values[i][0], b = phi.values[i][1];
        s += (a * a + std::cbrt(b * b)) * len;
    }
    return std::sqrt(s);
}

/// Endpoint of dv = A(v) phi over [0, 1]; classical fourth-order integration
/// with `steps` stages per control interval. Checks that A(v) stays
/// numerically invertible along the trajectory.
inline Vec2 shoot(const DiffusionModel& model, const Vec2& x, const Control2& phi,
                  int steps = 8) {
    model.require_inside(x);
    const auto rhs = [&](const Vec2& v, double p1, double p2) {
        const Vec2 s = model.sigma.value(v);
        const Vec2 br = model.bracket_b_sigma(v);
        const Mat2 a = Mat2::from_columns(s, br);
        if (std::abs(a.det()) < 1e-14 * a.frobenius_sq())
            throw SingularFrame("shoot: A(v) numerically singular along the trajectory");
        return p1 * s + p2 * br;
    };
    Vec2 v = x;
    for (std::size_t i = 0; i < phi.values.size(); ++i) {
        const double p1 = phi.values[i][0], p2 = phi.values[i][1];
        const double h = (phi.knots[i + 1] - phi.knots[i]) / steps;
        for (int s = 0; s < steps; ++s) {
            const Vec2 k1 = rhs(v, p1, p2);
            const Vec2 k2 = rhs(v + (0.5 * h) * k1, p1, p2);
            const Vec2 k3 = rhs(v + (0.5 * h) * k2, p1, p2);
            const Vec2 k4 = rhs(v + h * k3, p1, p2);
            v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!model.domain.contains(v)) throw DomainExit(phi.knots[i] + (s + 1) * h);
        }
    }
    return v;
}

namespace detail {

inline Vec2 shoot_constant(const DiffusionModel& model, const Vec2& x, double t1, double t2,
                           int steps = 64) {
    Control2 c = Control2::uniform(1, {t1, t2});
    return shoot(model, x, c, steps);
}

/// Damped Newton on the constant-control endpoint map; Jacobian by central
/// differences. Returns the steering theta with shoot(x, theta) = y.
inline Vec2 constant_control_newton(const DiffusionModel& model, const Vec2& x, const Vec2& y) {
    const Mat2 a = model.matrix_A(x);
    if (std::abs(a.det()) < 1e-14 * a.frobenius_sq())
        throw SingularFrame("constant-control solve: A(x) numerically singular");
    Vec2 theta = a.inverse() * (y - x);
    const double tol = 1e-10 * (1.0 + norm(y - x));
    Vec2 res = shoot_constant(model, x, theta.x1, theta.x2) - y;
    for (int it = 0; it < 100; ++it) {
        if (norm(res) <= tol) return theta;
        const double h = 1e-6 * (1.0 + std::max(std::abs(theta.x1), std::abs(theta.x2)));
        const Vec2 fp1 = shoot_constant(model, x, theta.x1 + h, theta.x2);
        const Vec2 fm1 = shoot_constant(model, x, theta.x1 - h, theta.x2);
        const Vec2 fp2 = shoot_constant(model, x, theta.x1, theta.x2 + h);
        const Vec2 fm2 = shoot_constant(model, x, theta.x1, theta.x2 - h);
        const Mat2 jac = Mat2::from_columns((0.5 / h) * (fp1 - fm1), (0.5 / h) * (fp2 - fm2));
        if (std::abs(jac.det()) < 1e-14 * jac.frobenius_sq())
            throw NewtonFailure("constant-control solve: endpoint Jacobian singular");
        const Vec2 full_step = jac.inverse() * res;
        double lambda = 1.0;
        bool accepted = false;
        for (int half = 0; half < 25; ++half) {
            const Vec2 trial = theta - lambda * full_step;
            const Vec2 trial_res = shoot_constant(model, x, trial.x1, trial.x2) - y;
            if (norm(trial_res) < norm(res)) {
                theta = trial;
                res = trial_res;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) throw NewtonFailure("constant-control solve: damped step stalled");
    }
    throw NewtonFailure("constant-control solve: no convergence after 100 iterations");
}

}  // namespace detail

/// Constant-control pseudo-distance: solves shoot(x, theta) = y for a
/// constant theta and returns max(|theta1|, |theta2|^{1/3}).
inline double rho2_estimate(const DiffusionModel& model, const Vec2& x, const Vec2& y) {
    model.require_inside(x);
    if (x.x1 == y.x1 && x.x2 == y.x2) return 0.0;
    const Vec2 theta = detail::constant_control_newton(model, x, y);
    return std::max(std::abs(theta.x1), std::cbrt(std::abs(theta.x2)));
}

/// Certified upper bound for the control distance: a feasible control is in
/// hand whenever the result reports success.
struct DcResult {
    double upper_bound = 0.0;
    double endpoint_gap = 0.0;
    Control2 control;
    int restarts_used = 0;
};

namespace detail {

struct DcObjective {
    const DiffusionModel& model;
    Vec2 x, y;
    int steps;
    double weight = 0.0;

    double gap(const std::vector<double>& p, Control2& scratch) const {
        for (std::size_t i = 0; i < scratch.values.size(); ++i)
            scratch.values[i] = {p[2 * i], p[2 * i + 1]};
        try {
            return norm(shoot(model, x, scratch, steps) - y);
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    }

    double cost_sq(const std::vector<double>& p, const Control2& grid) const {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < grid.knots.size(); ++i) {
            const double len = grid.knots[i + 1] - grid.knots[i];
            s += (p[2 * i] * p[2 * i] + std::cbrt(p[2 * i + 1] * p[2 * i + 1])) * len;
        }
        return s;
    }

    double operator()(const std::vector<double>& p, Control2& scratch) const {
        const double g = gap(p, scratch);
        if (!std::isfinite(g)) return g;
        return cost_sq(p, scratch) + weight * g * g;
    }
};

/// Derivative-free coordinate descent with per-coordinate adaptive steps;
/// robust to the |phi2|^{2/3} kink at zero. Plain single-coordinate moves
/// stall in a zigzag once the penalty is stiff, so each sweep also tries
/// exchange moves between adjacent slots of the same component: these barely
/// move the endpoint and let mass redistribute along the time grid.
inline void coordinate_descent(DcObjective& obj, std::vector<double>& p, Control2& scratch) {
    std::vector<double> step(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) step[i] = 0.2 * std::max(0.25, std::abs(p[i]));
    std::vector<double> xstep = step;
    double best = obj(p, scratch);
    for (int sweep = 0; sweep < 400; ++sweep) {
        double max_step = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            bool improved = false;
            for (const double dir : {+1.0, -1.0}) {
                const double old = p[i];
                p[i] = old + dir * step[i];
                const double val = obj(p, scratch);
                if (val < best) {
                    best = val;
                    improved = true;
                    break;
                }
                p[i] = old;
            }
            step[i] *= improved ? 1.6 : 0.5;
            max_step = std::max(max_step, step[i]);
        }
        for (std::size_t i = 0; i + 2 < p.size(); ++i) {
            const std::size_t j = i + 2;  // same component, next interval
            bool improved = false;
            for (const double dir : {+1.0, -1.0}) {
                const double oi = p[i], oj = p[j];
                p[i] = oi + dir * xstep[i];
                p[j] = oj - dir * xstep[i];
                const double val = obj(p, scratch);
                if (val < best) {
                    best = val;
                    improved = true;
                    break;
                }
                p[i] = oi;
                p[j] = oj;
            }
            xstep[i] *= improved ? 1.6 : 0.5;
            max_step = std::max(max_step, xstep[i]);
        }
        if (max_step < 1e-10) break;
    }
}

/// Minimal-norm Gauss-Newton correction driving the endpoint onto the target;
/// finite-difference Jacobian of the endpoint map.
inline void feasibility_polish(const DcObjective& obj, std::vector<double>& p, Control2& scratch,
                               double tol) {
    const std::size_t m = p.size();
    for (int it = 0; it < 30; ++it) {
        for (std::size_t i = 0; i < scratch.values.size(); ++i)
            scratch.values[i] = {p[2 * i], p[2 * i + 1]};
        Vec2 endpoint;
        try {
            endpoint = shoot(obj.model, obj.x, scratch, obj.steps);
        } catch (const Error&) {
            return;
        }
        const Vec2 r = obj.y - endpoint;
        if (norm(r) <= 0.25 * tol) return;

        std::vector<double> j1(m), j2(m);  // rows of the 2 x m Jacobian
        const double h = 1e-7;
        for (std::size_t i = 0; i < m; ++i) {
            std::vector<double> q = p;
            q[i] += h;
            for (std::size_t k = 0; k < scratch.values.size(); ++k)
                scratch.values[k] = {q[2 * k], q[2 * k + 1]};
            Vec2 e;
            try {
                e = shoot(obj.model, obj.x, scratch, obj.steps);
            } catch (const Error&) {
                return;
            }
            j1[i] = (e.x1 - endpoint.x1) / h;
            j2[i] = (e.x2 - endpoint.x2) / h;
        }
        // J J^T (2x2), then the least-norm update J^T (J J^T)^{-1} r
        double a = 0.0, b = 0.0, c = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            a += j1[i] * j1[i];
            b += j1[i] * j2[i];
            c += j2[i] * j2[i];
        }
        const double det = a * c - b * b;
        if (!(std::abs(det) > 1e-30)) return;
        const double u1 = (c * r.x1 - b * r.x2) / det;
        const double u2 = (-b * r.x1 + a * r.x2) / det;
        for (std::size_t i = 0; i < m; ++i) p[i] += j1[i] * u1 + j2[i] * u2;
    }
}

}  // namespace detail

/// Upper bound for d_c(x, y): minimizes norm_13(phi)^2 + w |shoot(x,phi)-y|^2
/// over piecewise-constant controls through an increasing penalty schedule,
/// from several initial guesses (the two single-direction constant controls
/// among them), then restores feasibility with a minimal-norm correction.
/// A result is only reported from restarts whose final endpoint gap is within
/// 1e-6 (1 + |y - x|).
inline DcResult dc_estimate(const DiffusionModel& model, const Vec2& x, const Vec2& y,
                            int n_intervals = 8, int restarts = 6,
                            std::vector<double> penalty_schedule = {1e2, 1e4, 1e6},
                            std::uint64_t seed = 0x5eedULL, const Control2* warm_start = nullptr,
                            int steps_per_interval = 8) {
    model.require_inside(x);
    if (restarts < 1) throw ConfigError("dc_estimate: need at least one restart");
    if (penalty_schedule.empty()) throw ConfigError("dc_estimate: empty penalty schedule");
    const double tol = 1e-6 * (1.0 + norm(y - x));

    if (x.x1 == y.x1 && x.x2 == y.x2)
        return {0.0, 0.0, Control2::uniform(n_intervals), 0};

    const Mat2 a = model.matrix_A(x);
    if (std::abs(a.det()) < 1e-14 * a.frobenius_sq())
        throw SingularFrame("dc_estimate: A(x) numerically singular");
    const Vec2 lin = a.inverse() * (y - x);

    Vec2 feasible_theta = lin;
    try {
        feasible_theta = detail::constant_control_newton(model, x, y);
    } catch (const Error&) {
        // fall back to the linearization as a merely approximate start
    }

    const auto constant_guess = [&](double v1, double v2) {
        std::vector<double> p(2 * static_cast<std::size_t>(n_intervals));
        for (int i = 0; i < n_intervals; ++i) {
            p[2 * i] = v1;
            p[2 * i + 1] = v2;
        }
        return p;
    };
    const auto concentrated_guess = [&](int slot) {
        std::vector<double> p = constant_guess(lin.x1, 0.0);
        p[2 * slot + 1] = lin.x2 * n_intervals;
        return p;
    };

    std::vector<std::vector<double>> guesses;
    if (warm_start) {
        if (static_cast<int>(warm_start->intervals()) != n_intervals)
            throw ConfigError("dc_estimate: warm start has the wrong interval count");
        std::vector<double> p(2 * static_cast<std::size_t>(n_intervals));
        for (int i = 0; i < n_intervals; ++i) {
            p[2 * i] = warm_start->values[i][0];
            p[2 * i + 1] = warm_start->values[i][1];
        }
        guesses.push_back(std::move(p));
    }
    guesses.push_back(constant_guess(lin.x1, 0.0));   // single-direction, volatility
    guesses.push_back(constant_guess(0.0, lin.x2));   // single-direction, bracket
    guesses.push_back(constant_guess(feasible_theta.x1, feasible_theta.x2));
    guesses.push_back(concentrated_guess(n_intervals - 1));
    guesses.push_back(concentrated_guess(0));
    {
        UniformStream jitter(seed, 0);
        while (static_cast<int>(guesses.size()) < restarts) {
            std::vector<double> p = constant_guess(lin.x1, lin.x2);
            for (double& v : p) v *= 0.5 + jitter.next();
            guesses.push_back(std::move(p));
        }
    }
    guesses.resize(static_cast<std::size_t>(restarts));

    struct Attempt {
        double cost = std::numeric_limits<double>::infinity();
        double gap = std::numeric_limits<double>::infinity();
        std::vector<double> p;
    };
    std::vector<Attempt> attempts(guesses.size());
    parallel_for(guesses.size(), [&](std::size_t r) {
        detail::DcObjective obj{model, x, y, steps_per_interval, 0.0};
        Control2 scratch = Control2::uniform(n_intervals);
        std::vector<double> p = guesses[r];
        for (const double w : penalty_schedule) {
            obj.weight = w;
            detail::coordinate_descent(obj, p, scratch);
        }
        detail::feasibility_polish(obj, p, scratch, tol);
        Attempt& out = attempts[r];
        out.gap = obj.gap(p, scratch);
        out.cost = std::isfinite(out.gap) ? std::sqrt(obj.cost_sq(p, scratch))
                                          : std::numeric_limits<double>::infinity();
        out.p = std::move(p);
    });

    int best = -1;
    for (std::size_t r = 0; r < attempts.size(); ++r) {
        if (attempts[r].gap > tol) continue;
        if (best < 0 || attempts[r].cost < attempts[static_cast<std::size_t>(best)].cost)
            best = static_cast<int>(r);
    }
    if (best < 0) {
        double closest = std::numeric_limits<double>::infinity();
        for (const Attempt& at : attempts) closest = std::min(closest, at.gap);
        throw Unreachable("dc_estimate: no restart reached the target (best endpoint gap " +
                          std::to_string(closest) + ")");
    }
    const Attempt& win = attempts[static_cast<std::size_t>(best)];
    DcResult res;
    res.control = Control2::uniform(n_intervals);
    for (int i = 0; i < n_intervals; ++i)
        res.control.values[i] = {win.p[2 * i], win.p[2 * i + 1]};
    res.upper_bound = win.cost;
    res.endpoint_gap = win.gap;
    res.restarts_used = static_cast<int>(attempts.size());
    return res;
}

struct EquivalenceRow {
    double angle = 0.0;
    double radius = 0.0;
    double d = 0.0;
    bool d_saturated = false;
    double dc_upper = 0.0;
    double dc_gap = 0.0;
    double rho2 = 0.0;
    double ratio_d_dc = 0.0;
    double ratio_rho2_d = 0.0;
};

/// Compares the frame quasi-distance with the control distance (upper bound)
/// and the constant-control pseudo-distance on a star of targets around x.
inline std::vector<EquivalenceRow> equivalence_report(const DiffusionModel& model, const Vec2& x,
                                                      std::span<const double> angles,
                                                      std::span<const double> radii,
                                                      int n_intervals = 8, int restarts = 6,
                                                      std::uint64_t seed = 0x5eedULL) {
    std::vector<EquivalenceRow> rows;
    rows.reserve(angles.size() * radii.size());
    for (const double ang : angles) {
        const Vec2 dir{std::cos(ang), std::sin(ang)};
        for (const double r : radii) {
            const Vec2 y = x + r * dir;
            EquivalenceRow row;
            row.angle = ang;
            row.radius = r;
            const QuasiDistanceResult qd = quasi_distance(model, x, y, 1e-10);
            row.d = qd.d;
            row.d_saturated = qd.saturated;
            const DcResult dc = dc_estimate(model, x, y, n_intervals, restarts, {1e2, 1e4, 1e6},
                                            seed);
            row.dc_upper = dc.upper_bound;
            row.dc_gap = dc.endpoint_gap;
            row.rho2 = rho2_estimate(model, x, y);
            row.ratio_d_dc = row.dc_upper > 0.0 ? row.d / row.dc_upper : 0.0;
            row.ratio_rho2_d = row.d > 0.0 ? row.rho2 / row.d : 0.0;
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace hypotube
