#pragma once

#include <cmath>
#include <limits>

#include "hypotube/errors.hpp"

namespace hypotube {

// Point / vector in the plane. Used both for states and for tangent vectors.
struct Vec2 {
    double x1 = 0.0;
    double x2 = 0.0;

    bool finite() const { return std::isfinite(x1) && std::isfinite(x2); }
};

using Point2 = Vec2;

inline Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
inline Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x1, s * v.x2}; }
inline Vec2 operator*(const Vec2& v, double s) { return s * v; }
inline Vec2& operator+=(Vec2& a, const Vec2& b) { a.x1 += b.x1; a.x2 += b.x2; return a; }

inline double dot(const Vec2& a, const Vec2& b) { return a.x1 * b.x1 + a.x2 * b.x2; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x1 * b.x2 - a.x2 * b.x1; }
inline double norm_sq(const Vec2& v) { return dot(v, v); }
inline double norm(const Vec2& v) { return std::hypot(v.x1, v.x2); }

// 2x2 real matrix, row-major entries m(row, col). The anisotropic matrices of
// the library are built from column vectors: column 0 is the first generating
// vector, column 1 the second.
struct Mat2 {
    double m00 = 0.0, m01 = 0.0;
    double m10 = 0.0, m11 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2 from_columns(const Vec2& c0, const Vec2& c1) {
        return {c0.x1, c1.x1, c0.x2, c1.x2};
    }
    static Mat2 diag(double a, double b) { return {a, 0.0, 0.0, b}; }

    Vec2 col(int j) const { return j == 0 ? Vec2{m00, m10} : Vec2{m01, m11}; }
    double det() const { return m00 * m11 - m01 * m10; }
    double frobenius_sq() const { return m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11; }
    double frobenius() const { return std::sqrt(frobenius_sq()); }

    // Adjugate-over-determinant closed form; caller is responsible for
    // checking the determinant first.
    Mat2 inverse() const {
        const double d = det();
        return {m11 / d, -m01 / d, -m10 / d, m00 / d};
    }
    Mat2 transpose() const { return {m00, m10, m01, m11}; }
};

inline Vec2 operator*(const Mat2& m, const Vec2& v) {
    return {m.m00 * v.x1 + m.m01 * v.x2, m.m10 * v.x1 + m.m11 * v.x2};
}
inline Mat2 operator*(const Mat2& a, const Mat2& b) {
    return {a.m00 * b.m00 + a.m01 * b.m10, a.m00 * b.m01 + a.m01 * b.m11,
            a.m10 * b.m00 + a.m11 * b.m10, a.m10 * b.m01 + a.m11 * b.m11};
}
inline Mat2 operator-(const Mat2& a, const Mat2& b) {
    return {a.m00 - b.m00, a.m01 - b.m01, a.m10 - b.m10, a.m11 - b.m11};
}

// Smallest and largest eigenvalue of M*M^T (the squared singular values of M).
// This is the variational form inf/sup over |xi| = 1 of sum_i <M_i, xi>^2 with
// M_i the columns of M, which is how the matrix norms use it.
struct EigBounds {
    double lambda_min;
    double lambda_max;
};

inline EigBounds eig_bounds(const Mat2& m) {
    const double p = m.m00 * m.m00 + m.m01 * m.m01;
    const double r = m.m10 * m.m10 + m.m11 * m.m11;
    const double q = m.m00 * m.m10 + m.m01 * m.m11;
    const double tr = p + r;
    const double disc = std::sqrt(std::max(0.0, (p - r) * (p - r) + 4.0 * q * q));
    return {std::max(0.0, 0.5 * (tr - disc)), 0.5 * (tr + disc)};
}

// Axis-aligned box of validity (closed).
struct Box {
    Vec2 lo{-1e100, -1e100};
    Vec2 hi{1e100, 1e100};

    static Box all() { return {}; }

    bool contains(const Vec2& p) const {
        return p.x1 >= lo.x1 && p.x1 <= hi.x1 && p.x2 >= lo.x2 && p.x2 <= hi.x2;
    }
};

}  // namespace hypotube
