#pragma once

#include <cmath>
#include <vector>

#include "hypotube/norms.hpp"
#include "hypotube/skeleton.hpp"

namespace hypotube {

/// Increments of the driving Brownian motion on [0, delta], uniform step dt.
struct BrownianSegment {
    double dt = 0.0;
    std::vector<double> increments;  // i.i.d. N(0, dt)

    double delta() const { return dt * static_cast<double>(increments.size()); }
};

/// The rescaled Gaussian pair (delta^{-1/2} W_delta,
/// delta^{-3/2} int_0^delta (delta - s) dW_s).
struct ThetaVector {
    double theta1 = 0.0;
    double theta2 = 0.0;
};

/// Left-endpoint evaluation of the weighted integral; the integrand is
/// deterministic and continuous so the Riemann sum error is O(dt) and covered
/// by the dt-refinement checks.
inline ThetaVector theta_from_segment(const BrownianSegment& seg) {
    const double delta = seg.delta();
    if (seg.increments.empty() || !(seg.dt > 0.0) || delta > 1.0)
        throw RangeError("theta_from_segment: segment needs dt > 0 and delta in (0, 1]");
    double w = 0.0, weighted = 0.0;
    for (std::size_t i = 0; i < seg.increments.size(); ++i) {
        const double s = seg.dt * static_cast<double>(i);
        w += seg.increments[i];
        weighted += (delta - s) * seg.increments[i];
    }
    const double rt = std::sqrt(delta);
    return {w / rt, weighted / (rt * delta)};
}

/// The cubic volatility-directed correction
/// eta(u) = (kappa/2 u^2 + (d_sigma kappa + kappa^2)/6 u^3) sigma(x).
inline Vec2 eta_correction(const DiffusionModel& model, const Vec2& x, double u) {
    if (!model.kappa)
        throw H3Violated(model.name + ": cubic correction needs the volatility factor kappa");
    model.require_inside(x);
    const double k = model.kappa->value(x);
    const double dk = model.kappa->sigma_derivative(x);
    const double c = 0.5 * k * u * u + (dk + k * k) / 6.0 * u * u * u;
    return c * model.sigma.value(x);
}

/// G = Theta + Abar_delta^{-1} eta(delta^{1/2} Theta_1).
inline Vec2 principal_part(const DiffusionModel& model, const Vec2& x, double delta,
                           const ThetaVector& theta) {
    const NormFrame bar = frame_bar(model, x, delta);
    const Vec2 corr = bar.inverse * eta_correction(model, x, std::sqrt(delta) * theta.theta1);
    return Vec2{theta.theta1, theta.theta2} + corr;
}

/// Development of the diffusion at time delta around the Euler point
/// x_hat = x + delta b(x): X_delta = x_hat + Abar_delta (G + remainder).
/// The remainder is recovered by subtraction, which reconstructs exactly at
/// the path level.
struct TaylorDecomposition {
    Vec2 x_hat;
    NormFrame frame;  // Abar_delta(x)
    ThetaVector theta;
    Vec2 principal;  // G
    Vec2 remainder;  // R~_delta
};

inline TaylorDecomposition decompose(const DiffusionModel& model, const Vec2& x, double delta,
                                     const BrownianSegment& seg, const Vec2& x_delta) {
    TaylorDecomposition d;
    d.x_hat = x + delta * model.drift.value(x);
    d.frame = frame_bar(model, x, delta);
    d.theta = theta_from_segment(seg);
    const Vec2 corr = d.frame.inverse * eta_correction(model, x, std::sqrt(delta) * d.theta.theta1);
    d.principal = Vec2{d.theta.theta1, d.theta.theta2} + corr;
    d.remainder = d.frame.inverse * (x_delta - d.x_hat) - d.principal;
    return d;
}

/// Deterministic analogue along a control: exact quadrature of
/// Theta_phi = (delta^{-1/2} int phi, delta^{-3/2} int (delta - s) phi_s ds)
/// for piecewise-constant phi, with the remainder from the skeleton solve.
struct ControlDecomposition {
    ThetaVector theta;
    Vec2 principal;
    Vec2 remainder;
};

inline ThetaVector theta_from_control(const Control& phi, double delta) {
    if (delta > phi.T() * (1.0 + 1e-12))
        throw RangeError("theta_from_control: window exceeds the control horizon");
    double plain = 0.0, weighted = 0.0;
    const auto& knots = phi.knots();
    const auto& vals = phi.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double a = std::max(0.0, knots[i]);
        const double b = std::min(delta, knots[i + 1]);
        if (b <= a) continue;
        plain += vals[i] * (b - a);
        weighted += vals[i] * (delta * (b - a) - 0.5 * (b * b - a * a));
    }
    const double rt = std::sqrt(delta);
    return {plain / rt, weighted / (rt * delta)};
}

inline ControlDecomposition decompose_control(const DiffusionModel& model, const Vec2& x,
                                              double delta, const Control& phi,
                                              int steps_per_knot = 16) {
    ControlDecomposition d;
    d.theta = theta_from_control(phi, delta);
    const NormFrame bar = frame_bar(model, x, delta);
    const Vec2 corr = bar.inverse * eta_correction(model, x, std::sqrt(delta) * d.theta.theta1);
    d.principal = Vec2{d.theta.theta1, d.theta.theta2} + corr;

    const double times[] = {delta};
    const SkeletonPath path = solve_skeleton_on(model, x, phi, times, steps_per_knot);
    const Vec2 x_hat = x + delta * model.drift.value(x);
    d.remainder = bar.inverse * (path.at_time(delta) - x_hat) - d.principal;
    return d;
}

}  // namespace hypotube
