#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "hypotube/parallel.hpp"
#include "hypotube/rng.hpp"
#include "hypotube/taylor.hpp"

namespace hypotube {

/// Monte Carlo run configuration. `horizon` is T for tube runs and delta for
/// short-time runs; short-time entry points enforce dt <= delta / 50.
struct SimConfig {
    double dt = 1e-3;
    std::size_t n_paths = 1;
    std::uint64_t master_seed = 0;
    double horizon = 1.0;

    void validate() const {
        if (n_paths < 1) throw ConfigError("simulation needs n_paths >= 1");
        if (!(dt > 0.0) || !(horizon > 0.0) || dt > horizon)
            throw ConfigError("simulation needs 0 < dt <= horizon");
    }

    std::size_t steps() const {
        return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    }
    double effective_dt() const { return horizon / static_cast<double>(steps()); }
};

struct WilsonInterval {
    double low = 0.0;
    double high = 1.0;
};

/// Wilson score interval at 95% coverage.
inline WilsonInterval wilson95(std::size_t successes, std::size_t n) {
    constexpr double z = 1.959963984540054;
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double z2n = z * z / nn;
    const double denom = 1.0 + z2n;
    const double center = (p + 0.5 * z2n) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + 0.25 * z2n / nn) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace detail {

/// Stratonovich dynamics integrated as Ito with the exact drift correction
/// b + 1/2 d_sigma sigma; the correction is assembled symbolically once so
/// the Euler-Maruyama step stays a handful of small polynomial evaluations.
struct ItoScheme {
    VectorField2 sigma;
    VectorField2 corrected_drift;
    Box domain;

    explicit ItoScheme(const DiffusionModel& m) : sigma(m.sigma), domain(m.domain) {
        const auto corr = [&](int c) {
            return m.drift.component(c) +
                   (m.sigma.partial(c, 1, 0) * m.sigma.component(0)).scaled(0.5) +
                   (m.sigma.partial(c, 0, 1) * m.sigma.component(1)).scaled(0.5);
        };
        corrected_drift = VectorField2(corr(0), corr(1), m.domain);
    }

    Vec2 step(const Vec2& x, double dt, double dw) const {
        return x + dt * corrected_drift.value(x) + dw * sigma.value(x);
    }
};

}  // namespace detail

struct PathSample {
    std::vector<double> times;
    std::vector<Vec2> points;
    BrownianSegment segment;
    std::optional<double> exit_time;  // flagged, never discarded
};

/// One Euler-Maruyama path over [0, horizon] with its driving increments.
/// The noise stream is keyed by (master_seed, path_index), so any path of any
/// ensemble can be reproduced in isolation.
inline PathSample simulate_path(const DiffusionModel& model, const Vec2& x0, const SimConfig& cfg,
                                std::uint64_t path_index = 0) {
    cfg.validate();
    model.require_inside(x0);
    const detail::ItoScheme scheme(model);
    const std::size_t steps = cfg.steps();
    const double dt = cfg.effective_dt();
    const double sdt = std::sqrt(dt);

    PathSample out;
    out.segment.dt = dt;
    out.segment.increments.reserve(steps);
    out.times.reserve(steps + 1);
    out.points.reserve(steps + 1);

    NormalStream rng(cfg.master_seed, path_index);
    Vec2 x = x0;
    out.times.push_back(0.0);
    out.points.push_back(x);
    for (std::size_t k = 0; k < steps; ++k) {
        const double dw = sdt * rng.next();
        out.segment.increments.push_back(dw);
        x = scheme.step(x, dt, dw);
        const double t = dt * static_cast<double>(k + 1);
        out.times.push_back(t);
        out.points.push_back(x);
        if (!out.exit_time && !model.domain.contains(x)) out.exit_time = t;
    }
    return out;
}

struct TubeResult {
    double p_hat = 0.0;
    double ci_low = 0.0;
    double ci_high = 1.0;
    std::size_t n_paths = 0;
    double R = 0.0;
    std::vector<std::size_t> exit_time_histogram;  // first crossing, 50 bins over [0, horizon]
    double horizon = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

constexpr std::size_t kHistogramBins = 50;
constexpr std::uint32_t kNoFailure = 0xffffffffu;

inline TubeResult reduce_failures(const std::vector<std::uint32_t>& first_fail,
                                  std::size_t n_steps, double horizon, double R,
                                  std::uint64_t seed) {
    TubeResult res;
    res.n_paths = first_fail.size();
    res.R = R;
    res.horizon = horizon;
    res.seed = seed;
    res.exit_time_histogram.assign(kHistogramBins, 0);
    std::size_t ok = 0;
    for (const std::uint32_t f : first_fail) {
        if (f == kNoFailure) {
            ++ok;
            continue;
        }
        const double t = horizon * static_cast<double>(f) / static_cast<double>(n_steps);
        const auto bin = std::min(kHistogramBins - 1,
                                  static_cast<std::size_t>(t / horizon * kHistogramBins));
        ++res.exit_time_histogram[bin];
    }
    res.p_hat = static_cast<double>(ok) / static_cast<double>(res.n_paths);
    const WilsonInterval ci = wilson95(ok, res.n_paths);
    res.ci_low = ci.low;
    res.ci_high = ci.high;
    return res;
}

// Inverse frame rows and center, flattened for the monitoring loop.
struct MonitorFrame {
    double c1, c2;  // center (skeleton point)
    double i00, i01, i10, i11;
};

}  // namespace detail

/// Probability that the diffusion stays inside the unit anisotropic tube
/// around the skeleton of phi for all monitoring times (every Euler step).
/// Leaving the model domain counts as a tube failure.
inline TubeResult tube_probability(const DiffusionModel& model, const Vec2& x0, const Control& phi,
                                   double R, const SimConfig& cfg) {
    cfg.validate();
    model.require_inside(x0);
    const std::size_t steps = cfg.steps();
    const double dt = cfg.effective_dt();
    const double sdt = std::sqrt(dt);

    std::vector<double> monitor(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) monitor[k] = dt * static_cast<double>(k);
    monitor.back() = cfg.horizon;
    const SkeletonPath skel = solve_skeleton_on(model, x0, phi, monitor);

    std::vector<detail::MonitorFrame> frames(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        const Vec2 c = skel.at_time(monitor[k]);
        const NormFrame f = frame_from_matrix(model.matrix_A(c), c, R);
        frames[k] = {c.x1, c.x2, f.inverse.m00, f.inverse.m01, f.inverse.m10, f.inverse.m11};
    }

    const detail::ItoScheme scheme(model);
    std::vector<std::uint32_t> first_fail(cfg.n_paths, detail::kNoFailure);
    parallel_for(cfg.n_paths, [&](std::size_t p) {
        NormalStream rng(cfg.master_seed, p);
        Vec2 x = x0;
        for (std::size_t k = 0; k <= steps; ++k) {
            const detail::MonitorFrame& f = frames[k];
            const double d1 = x.x1 - f.c1, d2 = x.x2 - f.c2;
            const double v1 = f.i00 * d1 + f.i01 * d2;
            const double v2 = f.i10 * d1 + f.i11 * d2;
            if (v1 * v1 + v2 * v2 > 1.0) {
                first_fail[p] = static_cast<std::uint32_t>(k);
                break;
            }
            if (k == steps) break;
            x = scheme.step(x, dt, sdt * rng.next());
            if (!model.domain.contains(x)) {
                first_fail[p] = static_cast<std::uint32_t>(k + 1);
                break;
            }
        }
    });
    return detail::reduce_failures(first_fail, steps, cfg.horizon, R, cfg.master_seed);
}

struct RescaledSamples {
    std::vector<Vec2> f;  // Abar^{-1}(X_delta - x_hat)
    std::vector<Vec2> g;  // principal part only, for variance comparison
    std::size_t n_exited = 0;
};

/// Ensemble of short-time rescaled endpoints F = Abar_delta^{-1}(X_delta -
/// x_hat), together with the principal-part samples from the same increments.
inline RescaledSamples rescaled_samples(const DiffusionModel& model, const Vec2& x, double delta,
                                        const SimConfig& cfg) {
    cfg.validate();
    if (cfg.horizon != delta) throw ConfigError("rescaled_samples: cfg.horizon must equal delta");
    if (cfg.dt > delta / 50.0)
        throw ConfigError("rescaled_samples: short-time runs need dt <= delta / 50");
    model.require_inside(x);

    const NormFrame bar = frame_bar(model, x, delta);
    const Vec2 x_hat = x + delta * model.drift.value(x);
    const double sqrt_delta = std::sqrt(delta);
    const detail::ItoScheme scheme(model);
    const std::size_t steps = cfg.steps();
    const double dt = cfg.effective_dt();
    const double sdt = std::sqrt(dt);

    RescaledSamples out;
    out.f.resize(cfg.n_paths);
    out.g.resize(cfg.n_paths);
    std::vector<std::uint8_t> exited(cfg.n_paths, 0);
    parallel_for(cfg.n_paths, [&](std::size_t p) {
        NormalStream rng(cfg.master_seed, p);
        Vec2 xp = x;
        double w = 0.0, weighted = 0.0;
        for (std::size_t k = 0; k < steps; ++k) {
            const double s = dt * static_cast<double>(k);
            const double dw = sdt * rng.next();
            w += dw;
            weighted += (delta - s) * dw;
            xp = scheme.step(xp, dt, dw);
            if (!model.domain.contains(xp)) exited[p] = 1;
        }
        const ThetaVector theta{w / sqrt_delta, weighted / (sqrt_delta * delta)};
        const Vec2 corr = bar.inverse * eta_correction(model, x, sqrt_delta * theta.theta1);
        out.g[p] = Vec2{theta.theta1, theta.theta2} + corr;
        out.f[p] = bar.inverse * (xp - x_hat);
    });
    for (std::uint8_t e : exited) out.n_exited += e;
    return out;
}

/// Two-sided Gaussian envelope fitted to a kernel density estimate.
struct DensityFit {
    int grid_n = 0;
    double grid_radius = 0.0;
    double bandwidth = 0.0;
    double noise_floor = 0.0;
    double K1 = 0.0, L1 = 0.0;  // lower envelope K1 exp(-L1 |z|^2)
    double K2 = 0.0, L2 = 0.0;  // upper envelope K2 exp(-L2 |z|^2)
    double p_at_origin = 0.0;
    bool tail_warning = false;  // fitted decay ~ 0: non-Gaussian tail
    std::vector<Vec2> grid;
    std::vector<double> p_hat;
    std::vector<std::uint8_t> valid;  // above the noise floor

    bool envelope_holds() const {
        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (!valid[j]) continue;
            const double q = norm_sq(grid[j]);
            if (K1 * std::exp(-L1 * q) > p_hat[j] * (1.0 + 1e-9)) return false;
            if (K2 * std::exp(-L2 * q) < p_hat[j] * (1.0 - 1e-9)) return false;
        }
        return true;
    }
};

/// Product-Gaussian kernel density estimate on a square grid, with a
/// least-squares Gaussian decay fit over the annulus 0.5 <= |z| <= radius and
/// envelope constants chosen extremal over every grid point above the noise
/// floor 10 / (n h^2). Kernel truncated at 6 bandwidths (relative error
/// ~1e-8, far below the Monte Carlo noise).
inline DensityFit density_fit(std::span<const Vec2> samples, double grid_radius, int grid_n,
                              double bandwidth_override = 0.0) {
    if (samples.size() < 10000)
        throw InsufficientSamples("density_fit: need at least 1e4 samples");
    if (grid_radius < 0.5) throw ConfigError("density_fit: annulus empty (grid_radius < 0.5)");
    if (grid_n < 5) throw ConfigError("density_fit: grid_n too small");

    const double n = static_cast<double>(samples.size());
    DensityFit fit;
    fit.grid_n = grid_n;
    fit.grid_radius = grid_radius;

    if (bandwidth_override > 0.0) {
        fit.bandwidth = bandwidth_override;
    } else {
        // Silverman-style rule for two dimensions: h = s * n^{-1/6}
        double m1 = 0.0, m2 = 0.0;
        for (const Vec2& s : samples) {
            m1 += s.x1;
            m2 += s.x2;
        }
        m1 /= n;
        m2 /= n;
        double v1 = 0.0, v2 = 0.0;
        for (const Vec2& s : samples) {
            v1 += (s.x1 - m1) * (s.x1 - m1);
            v2 += (s.x2 - m2) * (s.x2 - m2);
        }
        const double s1 = std::sqrt(v1 / (n - 1.0)), s2 = std::sqrt(v2 / (n - 1.0));
        fit.bandwidth = std::sqrt(s1 * s2) * std::pow(n, -1.0 / 6.0);
    }
    if (!(fit.bandwidth > 0.0)) throw ConfigError("density_fit: degenerate bandwidth");

    const double h = fit.bandwidth;
    fit.noise_floor = 10.0 / (n * h * h);

    fit.grid.resize(static_cast<std::size_t>(grid_n) * grid_n);
    for (int a = 0; a < grid_n; ++a)
        for (int b = 0; b < grid_n; ++b) {
            const double z1 = -grid_radius + 2.0 * grid_radius * a / (grid_n - 1);
            const double z2 = -grid_radius + 2.0 * grid_radius * b / (grid_n - 1);
            fit.grid[static_cast<std::size_t>(a) * grid_n + b] = {z1, z2};
        }

    fit.p_hat.assign(fit.grid.size(), 0.0);
    const double inv2h2 = 1.0 / (2.0 * h * h);
    const double norm_const = 1.0 / (n * 2.0 * 3.14159265358979323846 * h * h);
    const double cutoff = 36.0 * h * h;  // squared truncation radius
    parallel_for(fit.grid.size(), [&](std::size_t j) {
        const Vec2 z = fit.grid[j];
        double acc = 0.0;
        for (const Vec2& s : samples) {
            const double dx = z.x1 - s.x1, dy = z.x2 - s.x2;
            const double q = dx * dx + dy * dy;
            if (q < cutoff) acc += std::exp(-q * inv2h2);
        }
        fit.p_hat[j] = acc * norm_const;
    });

    fit.valid.resize(fit.grid.size());
    for (std::size_t j = 0; j < fit.grid.size(); ++j)
        fit.valid[j] = fit.p_hat[j] >= fit.noise_floor ? 1 : 0;

    // decay exponent: least squares of -log p on |z|^2 over the annulus
    double sq = 0.0, sy = 0.0, sqq = 0.0, sqy = 0.0, cnt = 0.0;
    for (std::size_t j = 0; j < fit.grid.size(); ++j) {
        if (!fit.valid[j]) continue;
        const double r = norm(fit.grid[j]);
        if (r < 0.5 || r > grid_radius) continue;
        const double q = r * r;
        const double y = -std::log(fit.p_hat[j]);
        sq += q;
        sy += y;
        sqq += q * q;
        sqy += q * y;
        cnt += 1.0;
    }
    if (cnt < 2.0)
        throw InsufficientSamples("density_fit: no usable grid points in the fit annulus");
    const double var = sqq - sq * sq / cnt;
    if (!(var > 0.0)) throw ConfigError("density_fit: degenerate annulus geometry");
    const double slope = (sqy - sq * sy / cnt) / var;
    fit.tail_warning = slope < 0.01;
    fit.L1 = fit.L2 = std::max(slope, 0.0);

    double k_lo = std::numeric_limits<double>::infinity();
    double k_hi = 0.0;
    for (std::size_t j = 0; j < fit.grid.size(); ++j) {
        if (!fit.valid[j]) continue;
        const double e = std::exp(fit.L1 * norm_sq(fit.grid[j]));
        k_lo = std::min(k_lo, fit.p_hat[j] * e);
        k_hi = std::max(k_hi, fit.p_hat[j] * e);
    }
    fit.K1 = k_lo;
    fit.K2 = k_hi;

    // density at the origin: nearest grid node (exact center for odd grid_n)
    std::size_t best = 0;
    double best_r = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < fit.grid.size(); ++j) {
        const double r = norm_sq(fit.grid[j]);
        if (r < best_r) {
            best_r = r;
            best = j;
        }
    }
    fit.p_at_origin = fit.p_hat[best];
    return fit;
}

/// Escape probability from the moving Euler point x_hat(t) = x + b(x) t in
/// the fixed frame A_R(x) over the short horizon delta.
inline TubeResult short_time_escape(const DiffusionModel& model, const Vec2& x, double delta,
                                    double R, double threshold, const SimConfig& cfg) {
    cfg.validate();
    if (cfg.horizon != delta) throw ConfigError("short_time_escape: cfg.horizon must equal delta");
    if (cfg.dt > delta / 50.0)
        throw ConfigError("short_time_escape: short-time runs need dt <= delta / 50");
    if (R < delta) throw ConfigError("short_time_escape: regime requires R >= delta");
    model.require_inside(x);

    const NormFrame fr = frame(model, x, R);
    const Vec2 b0 = model.drift.value(x);
    const detail::ItoScheme scheme(model);
    const std::size_t steps = cfg.steps();
    const double dt = cfg.effective_dt();
    const double sdt = std::sqrt(dt);

    std::vector<std::uint32_t> first_escape(cfg.n_paths, detail::kNoFailure);
    parallel_for(cfg.n_paths, [&](std::size_t p) {
        NormalStream rng(cfg.master_seed, p);
        Vec2 xp = x;
        for (std::size_t k = 0; k <= steps; ++k) {
            const double t = dt * static_cast<double>(k);
            const Vec2 center = x + t * b0;
            if (fr.norm(xp - center) >= threshold) {
                first_escape[p] = static_cast<std::uint32_t>(k);
                break;
            }
            if (k == steps) break;
            xp = scheme.step(xp, dt, sdt * rng.next());
        }
    });

    // the reported probability is the escape event itself
    TubeResult res = detail::reduce_failures(first_escape, steps, delta, R, cfg.master_seed);
    std::size_t escapes = 0;
    for (const std::uint32_t f : first_escape) escapes += f != detail::kNoFailure ? 1 : 0;
    res.p_hat = static_cast<double>(escapes) / static_cast<double>(res.n_paths);
    const WilsonInterval ci = wilson95(escapes, res.n_paths);
    res.ci_low = ci.low;
    res.ci_high = ci.high;
    return res;
}

}  // namespace hypotube
