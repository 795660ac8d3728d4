#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hypotube/norms.hpp"
#include "hypotube/rng.hpp"

namespace hypotube {

struct LemmaCheck {
    std::string lemma;
    std::size_t cases = 0;
    std::size_t violations = 0;
    double empirical_constant = 0.0;
    bool pass = false;
};

namespace detail {

inline Vec2 random_point(UniformStream& u, const Box& b) {
    return {u.range(b.lo.x1, b.hi.x1), u.range(b.lo.x2, b.hi.x2)};
}

inline Vec2 random_direction(UniformStream& u) {
    const double a = u.range(0.0, 6.283185307179586);
    return {std::cos(a), std::sin(a)};
}

}  // namespace detail

/// Randomized verification of the matrix-norm lemmas on one model:
///   - scaling sandwich between the norms at two scales,
///   - two-sided comparison with the Euclidean norm through the extreme
///     eigenvalues of A A^T,
///   - mutual boundedness of the plain, perturbed, and Euler-shifted frames
///     (empirical constant recorded, required <= 8 for delta <= 0.1),
///   - factor-4 stability of the norm under a base-point move that is small
///     in the norm itself.
inline std::vector<LemmaCheck> norms_check_report(const DiffusionModel& model,
                                                  std::uint64_t seed, std::size_t cases) {
    constexpr double kSlack = 1e-9;  // relative slack for exact-algebra suites
    std::vector<LemmaCheck> out;

    {
        LemmaCheck c;
        c.lemma = "scaling-sandwich";
        c.cases = cases;
        UniformStream u(seed, 1);
        double worst = 1.0;
        for (std::size_t i = 0; i < cases; ++i) {
            const Vec2 x = detail::random_point(u, model.sample_box);
            const double r_hi = std::pow(10.0, u.range(-3.0, 0.0));
            const double r_lo = r_hi * std::pow(10.0, u.range(-2.0, 0.0));
            const Vec2 xi = std::pow(10.0, u.range(-2.0, 2.0)) * detail::random_direction(u);
            const Mat2 a = model.matrix_A(x);
            const double n_lo = frame_from_matrix(a, x, r_lo).norm(xi);
            const double n_hi = frame_from_matrix(a, x, r_hi).norm(xi);
            const double s = std::sqrt(r_lo / r_hi);
            const bool ok = n_hi <= s * n_lo * (1.0 + kSlack) &&
                            n_hi >= s * s * s * n_lo * (1.0 - kSlack);
            if (!ok) ++c.violations;
            if (s * n_lo > 0.0) worst = std::max(worst, n_hi / (s * n_lo));
        }
        c.empirical_constant = worst;
        c.pass = c.violations == 0;
        out.push_back(c);
    }

    {
        LemmaCheck c;
        c.lemma = "euclidean-comparison";
        c.cases = cases;
        UniformStream u(seed, 2);
        for (std::size_t i = 0; i < cases; ++i) {
            const Vec2 x = detail::random_point(u, model.sample_box);
            const double R = std::pow(10.0, u.range(-3.0, 0.0));
            const Vec2 xi = std::pow(10.0, u.range(-2.0, 2.0)) * detail::random_direction(u);
            const Mat2 a = model.matrix_A(x);
            const EigBounds eig = eig_bounds(a);
            const double n = frame_from_matrix(a, x, R).norm(xi);
            const double lower = hypotube::norm(xi) / std::sqrt(R * eig.lambda_max);
            const double upper = hypotube::norm(xi) / (R * std::sqrt(R * eig.lambda_min));
            if (n < lower * (1.0 - kSlack) || n > upper * (1.0 + kSlack)) ++c.violations;
        }
        c.empirical_constant = 1.0;
        c.pass = c.violations == 0;
        out.push_back(c);
    }

    {
        LemmaCheck c;
        c.lemma = "frame-comparison";
        c.cases = cases;
        UniformStream u(seed, 3);
        double worst = 1.0;
        for (std::size_t i = 0; i < cases; ++i) {
            const Vec2 x = detail::random_point(u, model.sample_box);
            const double delta = std::pow(10.0, u.range(-3.0, -1.0));  // delta <= 0.1
            const Vec2 xi = detail::random_direction(u);
            const Vec2 x_hat = x + delta * model.drift.value(x);
            if (!model.domain.contains(x_hat)) continue;
            const double n_plain = frame(model, x, delta).norm(xi);
            const double n_bar = frame_bar(model, x, delta).norm(xi);
            const double n_hat = frame(model, x_hat, delta).norm(xi);
            const double hi = std::max({n_plain, n_bar, n_hat});
            const double lo = std::min({n_plain, n_bar, n_hat});
            const double ratio = lo > 0.0 ? hi / lo : 1.0;
            worst = std::max(worst, ratio);
            if (ratio > 8.0) ++c.violations;
        }
        c.empirical_constant = worst;
        c.pass = c.violations == 0;
        out.push_back(c);
    }

    {
        LemmaCheck c;
        c.lemma = "base-point-stability";
        c.cases = cases;
        UniformStream u(seed, 4);
        double worst = 1.0;
        for (std::size_t i = 0; i < cases; ++i) {
            const Vec2 x = detail::random_point(u, model.sample_box);
            const double delta = model.norm_delta_star * std::pow(10.0, u.range(-2.0, 0.0));
            const NormFrame fx = frame(model, x, delta);
            // |x - y|_{A_delta(x)} <= rho by construction
            const Vec2 w = (model.norm_rho * u.next()) * detail::random_direction(u);
            const Vec2 y = x + fx.matrix * w;
            if (!model.domain.contains(y)) continue;
            const Vec2 xi = detail::random_direction(u);
            const double ratio = frame(model, y, delta).norm(xi) / fx.norm(xi);
            worst = std::max({worst, ratio, 1.0 / ratio});
            if (ratio < 0.25 * (1.0 - kSlack) || ratio > 4.0 * (1.0 + kSlack)) ++c.violations;
        }
        c.empirical_constant = worst;
        c.pass = c.violations == 0;
        out.push_back(c);
    }

    return out;
}

}  // namespace hypotube
