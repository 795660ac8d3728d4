#pragma once

#include <cmath>
#include <iostream>

#include "hypotube/model.hpp"

namespace hypotube {

/// Anisotropic frame at a base point: the matrix (R^{1/2} v0, R^{3/2} v1)
/// built from two generating vectors, together with its inverse. The induced
/// norm of xi is |inverse * xi| (Euclidean).
struct NormFrame {
    Vec2 base;
    double scale = 1.0;  // R (or delta for the perturbed frame)
    Mat2 matrix;
    Mat2 inverse;

    double norm(const Vec2& xi) const { return hypotube::norm(inverse * xi); }
};

namespace detail {

// Singularity and conditioning are judged on the unscaled generating matrix
// (v0, v1); the power-of-scale dilation is inverted exactly, so the scaled
// inverse is diag(scale^{-1/2}, scale^{-3/2}) applied to the closed-form
// inverse of (v0, v1).
inline NormFrame build_frame(const Vec2& base, double scale, const Vec2& v0, const Vec2& v1,
                             const char* what) {
    const Mat2 a = Mat2::from_columns(v0, v1);
    const double d = std::abs(a.det());
    const double gauge = a.frobenius_sq();
    if (d < 1e-14 * gauge)
        throw SingularFrame(std::string(what) + ": generating matrix numerically singular at (" +
                            std::to_string(base.x1) + ", " + std::to_string(base.x2) + ")");
    if (d < 1e-10 * gauge)
        std::cerr << "hypotube: warning: ill-conditioned frame at (" << base.x1 << ", " << base.x2
                  << "), |det| = " << d << "\n";
    const double rh = std::sqrt(scale);
    const Mat2 scaled = Mat2::from_columns(rh * v0, (scale * rh) * v1);
    const Mat2 ainv = a.inverse();
    const Mat2 scaled_inv{ainv.m00 / rh, ainv.m01 / rh, ainv.m10 / (scale * rh),
                          ainv.m11 / (scale * rh)};
    return {base, scale, scaled, scaled_inv};
}

}  // namespace detail

/// A_R(x): columns R^{1/2} sigma(x) and R^{3/2} [b,sigma](x).
inline NormFrame frame(const DiffusionModel& model, const Vec2& x, double R) {
    model.require_inside(x);
    if (!(R > 0.0) || R > 1.0) throw RangeError("frame scale R must lie in (0, 1]");
    return detail::build_frame(x, R, model.sigma.value(x), model.bracket_b_sigma(x), "frame");
}

/// Scaled frame from a precomputed generating matrix A = (sigma, [b,sigma]);
/// lets the tube estimator reuse skeleton-point matrices.
inline NormFrame frame_from_matrix(const Mat2& a, const Vec2& base, double R) {
    if (!(R > 0.0) || R > 1.0) throw RangeError("frame scale R must lie in (0, 1]");
    return detail::build_frame(base, R, a.col(0), a.col(1), "frame");
}

/// Perturbed development frame: columns delta^{1/2} (sigma + delta d_b sigma)
/// and delta^{3/2} [b,sigma].
inline NormFrame frame_bar(const DiffusionModel& model, const Vec2& x, double delta) {
    model.require_inside(x);
    if (!(delta > 0.0) || delta > 1.0) throw RangeError("frame scale delta must lie in (0, 1]");
    const Vec2 first = model.sigma.value(x) +
                       delta * directional_derivative(model.sigma, model.drift, x);
    return detail::build_frame(x, delta, first, model.bracket_b_sigma(x), "frame_bar");
}

struct QuasiDistanceResult {
    double d = 0.0;
    bool saturated = false;  // even the unit scale leaves the pair at norm > 1
};

/// Quasi-distance induced by the frames: d(x,y) = sqrt(R*) where R* solves
/// |x - y|_{A_{R*}(x)} = 1. The map R -> |xi|_{A_R(x)} is strictly decreasing,
/// so R* is found by bisection (in log scale) over [1e-12, 1]; convergence is
/// declared when the norm is within tol of 1.
inline QuasiDistanceResult quasi_distance(const DiffusionModel& model, const Vec2& x,
                                          const Vec2& y, double tol = 1e-10) {
    if (!(tol > 0.0)) throw RangeError("quasi_distance: tol must be positive");
    model.require_inside(x);
    const Vec2 xi = y - x;
    if (xi.x1 == 0.0 && xi.x2 == 0.0) return {0.0, false};

    const Mat2 a = model.matrix_A(x);
    const auto norm_at = [&](double R) { return frame_from_matrix(a, x, R).norm(xi); };

    constexpr double kRMin = 1e-12;
    if (norm_at(1.0) > 1.0) return {1.0, true};
    if (norm_at(kRMin) < 1.0) return {std::sqrt(kRMin), false};

    double lo = std::log(kRMin), hi = 0.0, mid = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        const double v = norm_at(std::exp(mid));
        if (std::abs(v - 1.0) <= tol) break;
        if (v > 1.0)
            lo = mid;  // norm too large: need bigger R
        else
            hi = mid;
    }
    return {std::sqrt(std::exp(mid)), false};
}

/// Smooth localisation bump: 1 on [-a, a], supported on (-2a, 2a), C^1.
inline double bump(double a, double x) {
    if (!(a > 0.0)) throw RangeError("bump: a must be positive");
    const double t = std::abs(x);
    if (t <= a) return 1.0;
    if (t >= 2.0 * a) return 0.0;
    const double s = t - a;
    return std::exp(1.0 - a * a / (a * a - s * s));
}

}  // namespace hypotube
