#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypotube/errors.hpp"
#include "hypotube/geometry.hpp"
#include "hypotube/poly.hpp"

namespace hypotube {

/// Planar vector field with analytic derivatives up to order three. The
/// components are polynomials; every partial is precomputed symbolically, so
/// the Jacobian, bilinear and trilinear forms never fall back to differencing.
class VectorField2 {
  public:
    VectorField2() : VectorField2(Poly2::zero(), Poly2::zero()) {}
    VectorField2(Poly2 f1, Poly2 f2, Box domain = Box::all()) : domain_(domain) {
        comp_[0] = std::move(f1);
        comp_[1] = std::move(f2);
        for (int c = 0; c < 2; ++c) {
            partial_[c][0][0] = comp_[c];
            for (int k = 1; k <= 3; ++k)
                for (int i = k; i >= 0; --i) {
                    const int j = k - i;
                    partial_[c][i][j] = i > 0 ? partial_[c][i - 1][j].derivative(0)
                                              : partial_[c][i][j - 1].derivative(1);
                }
        }
    }

    Vec2 value(const Vec2& x) const { return {comp_[0].eval(x), comp_[1].eval(x)}; }

    /// Jacobian J with J(row c, col a) = d f_c / d x_a.
    Mat2 jacobian(const Vec2& x) const {
        return {partial_[0][1][0].eval(x), partial_[0][0][1].eval(x),
                partial_[1][1][0].eval(x), partial_[1][0][1].eval(x)};
    }

    /// Bilinear form: second derivative applied to (u, v).
    Vec2 second_derivative(const Vec2& x, const Vec2& u, const Vec2& v) const {
        const auto comp = [&](int c) {
            return partial_[c][2][0].eval(x) * u.x1 * v.x1 +
                   partial_[c][1][1].eval(x) * (u.x1 * v.x2 + u.x2 * v.x1) +
                   partial_[c][0][2].eval(x) * u.x2 * v.x2;
        };
        return {comp(0), comp(1)};
    }

    /// Trilinear form: third derivative applied to (u, v, w).
    Vec2 third_derivative(const Vec2& x, const Vec2& u, const Vec2& v, const Vec2& w) const {
        const double uvw[4] = {
            u.x1 * v.x1 * w.x1,
            u.x1 * v.x1 * w.x2 + u.x1 * v.x2 * w.x1 + u.x2 * v.x1 * w.x1,
            u.x1 * v.x2 * w.x2 + u.x2 * v.x1 * w.x2 + u.x2 * v.x2 * w.x1,
            u.x2 * v.x2 * w.x2};
        const auto comp = [&](int c) {
            return partial_[c][3][0].eval(x) * uvw[0] + partial_[c][2][1].eval(x) * uvw[1] +
                   partial_[c][1][2].eval(x) * uvw[2] + partial_[c][0][3].eval(x) * uvw[3];
        };
        return {comp(0), comp(1)};
    }

    /// Sum over all multi-indices of order 0..3 of |d^a f(x)| (Euclidean norm
    /// of the vector value); one of the two halves of the derivative bound.
    double partial_norm_sum(const Vec2& x) const {
        double s = 0.0;
        for (int k = 0; k <= 3; ++k)
            for (int i = k; i >= 0; --i) {
                const int j = k - i;
                s += std::hypot(partial_[0][i][j].eval(x), partial_[1][i][j].eval(x));
            }
        return s;
    }

    const Poly2& component(int c) const { return comp_[c]; }
    const Poly2& partial(int c, int i, int j) const { return partial_[c][i][j]; }
    const Box& domain() const { return domain_; }
    void set_domain(const Box& b) { domain_ = b; }

    /// Self-consistency: analytic Jacobian against a central difference of the
    /// value, relative tolerance rtol.
    bool self_check(const Vec2& x, double rtol = 1e-4) const {
        const double h = 1e-5 * (1.0 + std::abs(x.x1) + std::abs(x.x2));
        const Mat2 j = jacobian(x);
        const Mat2 fd{
            (value({x.x1 + h, x.x2}).x1 - value({x.x1 - h, x.x2}).x1) / (2 * h),
            (value({x.x1, x.x2 + h}).x1 - value({x.x1, x.x2 - h}).x1) / (2 * h),
            (value({x.x1 + h, x.x2}).x2 - value({x.x1 - h, x.x2}).x2) / (2 * h),
            (value({x.x1, x.x2 + h}).x2 - value({x.x1, x.x2 - h}).x2) / (2 * h)};
        const double scale = j.frobenius() + 1e-8;
        return (j - fd).frobenius() <= rtol * scale;
    }

  private:
    Poly2 comp_[2];
    Poly2 partial_[2][4][4];
    Box domain_;
};

/// Directional derivative d_g f(x) = J_f(x) g(x).
inline Vec2 directional_derivative(const VectorField2& f, const VectorField2& g, const Vec2& x) {
    if (!f.domain().contains(x) || !g.domain().contains(x))
        throw DomainError("directional derivative evaluated outside the declared domain");
    return f.jacobian(x) * g.value(x);
}

/// Lie bracket [f,g](x) = d_g f(x) - d_f g(x); lie_bracket(b, sigma, x)
/// realizes the drift-volatility bracket used throughout.
inline Vec2 lie_bracket(const VectorField2& f, const VectorField2& g, const Vec2& x) {
    if (!f.domain().contains(x) || !g.domain().contains(x))
        throw DomainError("Lie bracket evaluated outside the declared domain");
    return f.jacobian(x) * g.value(x) - g.jacobian(x) * f.value(x);
}

/// The volatility collinearity factor kappa and its sigma-directional
/// derivative, both analytic, present only when the geometric volatility
/// condition holds for the model.
struct KappaField {
    std::function<double(const Vec2&)> value;
    std::function<double(const Vec2&)> sigma_derivative;
};

struct DiffusionModel {
    std::string name;
    VectorField2 sigma;
    VectorField2 drift;
    std::optional<KappaField> kappa;
    std::function<double(const Vec2&)> n_bound;       // >= 1 on the domain
    std::function<double(const Vec2&)> lambda_bound;  // in (0, 1] on the domain
    Box domain;
    std::string note;

    // Region and scales for the randomized norm suites; chosen per model so
    // the empirical lemma constants stay in their documented bands.
    Box sample_box;
    double norm_delta_star = 0.1;
    double norm_rho = 1.0;
    bool h3_compliant = true;

    void require_inside(const Vec2& x) const {
        if (!domain.contains(x))
            throw DomainError(name + ": point (" + std::to_string(x.x1) + ", " +
                              std::to_string(x.x2) + ") outside the model domain");
    }

    Vec2 bracket_b_sigma(const Vec2& x) const { return lie_bracket(drift, sigma, x); }

    /// A(x) = (sigma(x), [b,sigma](x)) as columns.
    Mat2 matrix_A(const Vec2& x) const {
        return Mat2::from_columns(sigma.value(x), bracket_b_sigma(x));
    }
};

constexpr double kLambdaFloor = 1e-12;

namespace detail {

inline std::function<double(const Vec2&)> default_n_bound(const VectorField2& s,
                                                          const VectorField2& b) {
    return [s, b](const Vec2& x) {
        return std::max(1.0, s.partial_norm_sum(x) + b.partial_norm_sum(x));
    };
}

inline std::function<double(const Vec2&)> default_lambda_bound(const VectorField2& s,
                                                               const VectorField2& b) {
    return [s, b](const Vec2& x) {
        const Mat2 a = Mat2::from_columns(s.value(x), lie_bracket(b, s, x));
        return std::min(1.0, std::max(kLambdaFloor, eig_bounds(a).lambda_min));
    };
}

}  // namespace detail

struct H3Report {
    std::vector<Vec2> points;
    std::vector<double> kappa;  // fitted <d_sigma sigma, sigma> / |sigma|^2
};

/// Checks the geometric volatility condition d_sigma sigma = kappa * sigma at
/// the sample points: requires |sin(angle)| <= tol between d_sigma sigma and
/// sigma. Violations are collected and reported together.
inline H3Report check_H3(const DiffusionModel& model, std::span<const Vec2> sample_points,
                         double tol) {
    H3Report report;
    std::vector<std::pair<double, double>> bad;
    for (const Vec2& x : sample_points) {
        model.require_inside(x);
        const Vec2 s = model.sigma.value(x);
        const double s2 = norm_sq(s);
        if (s2 == 0.0)
            throw SingularSigma(model.name + ": sigma vanishes at (" + std::to_string(x.x1) +
                                ", " + std::to_string(x.x2) + ")");
        const Vec2 d = directional_derivative(model.sigma, model.sigma, x);
        const double dn = norm(d);
        const double sine = dn == 0.0 ? 0.0 : std::abs(cross(d, s)) / (dn * std::sqrt(s2));
        if (sine > tol) {
            bad.emplace_back(x.x1, x.x2);
            continue;
        }
        report.points.push_back(x);
        report.kappa.push_back(dot(d, s) / s2);
    }
    if (!bad.empty())
        throw H3Violated(model.name + ": volatility collinearity fails at " +
                             std::to_string(bad.size()) + " point(s)",
                         std::move(bad));
    return report;
}

namespace detail {

/// Deterministic low-discrepancy cover of the open unit disk: Vogel spiral,
/// radii capped at 0.995 so every sample stays strictly inside the ball.
inline std::vector<Vec2> unit_ball_samples(const Vec2& center, int count) {
    constexpr double kGolden = 2.39996322972865332;  // pi (3 - sqrt 5)
    std::vector<Vec2> pts;
    pts.reserve(count + 1);
    pts.push_back(center);
    for (int i = 0; i < count; ++i) {
        const double r = 0.995 * std::sqrt((i + 0.5) / count);
        pts.push_back({center.x1 + r * std::cos(kGolden * i), center.x2 + r * std::sin(kGolden * i)});
    }
    return pts;
}

}  // namespace detail

struct HypothesisProfile {
    std::vector<double> n_t;       // max of the derivative bound over each unit ball
    std::vector<double> lambda_t;  // min of the ellipticity bound over each unit ball
};

/// Evaluates the locally-uniform hypothesis bounds along a path: for each
/// point, the declared bounds are sampled over the unit ball around it
/// (128-point Vogel spiral plus the center).
inline HypothesisProfile hypothesis_profile(const DiffusionModel& model,
                                            std::span<const Vec2> path,
                                            int samples_per_ball = 128) {
    HypothesisProfile profile;
    profile.n_t.reserve(path.size());
    profile.lambda_t.reserve(path.size());
    for (const Vec2& p : path) {
        model.require_inside(p);
        double n_max = 0.0;
        double l_min = 1.0;
        for (const Vec2& s : detail::unit_ball_samples(p, samples_per_ball)) {
            if (!model.domain.contains(s))
                throw DomainError(model.name + ": unit neighbourhood of path point exits domain");
            n_max = std::max(n_max, model.n_bound(s));
            l_min = std::min(l_min, model.lambda_bound(s));
        }
        profile.n_t.push_back(n_max);
        profile.lambda_t.push_back(l_min);
    }
    return profile;
}

// ---------------------------------------------------------------------------
// Built-in models
// ---------------------------------------------------------------------------

/// Asian-option dynamics: sigma = (x1, 0), b = (0, x1); kappa = 1.
inline DiffusionModel make_asian() {
    DiffusionModel m;
    m.name = "asian";
    m.domain = Box{{1e-3, -50.0}, {50.0, 50.0}};
    m.sigma = VectorField2(Poly2::x1(), Poly2::zero(), m.domain);
    m.drift = VectorField2(Poly2::zero(), Poly2::x1(), m.domain);
    m.kappa = KappaField{[](const Vec2&) { return 1.0; }, [](const Vec2&) { return 0.0; }};
    m.n_bound = detail::default_n_bound(m.sigma, m.drift);
    m.lambda_bound = detail::default_lambda_bound(m.sigma, m.drift);
    m.sample_box = Box{{0.25, -2.0}, {4.0, 2.0}};
    m.note = "integrated geometric Brownian motion";
    return m;
}

/// Controllability counterexample: sigma = (1, 0), b = (0, x1^2); starting at
/// (1, 0) the second component stays positive, so the density vanishes on
/// {y2 <= 0} even though the local bracket condition holds.
inline DiffusionModel make_counterexample() {
    DiffusionModel m;
    m.name = "counterexample";
    m.domain = Box{{-10.0, -10.0}, {10.0, 10.0}};
    m.sigma = VectorField2(Poly2::constant(1.0), Poly2::zero(), m.domain);
    m.drift = VectorField2(Poly2::zero(), Poly2{{{1.0, 2, 0}}}, m.domain);
    m.kappa = KappaField{[](const Vec2&) { return 0.0; }, [](const Vec2&) { return 0.0; }};
    m.n_bound = detail::default_n_bound(m.sigma, m.drift);
    m.lambda_bound = detail::default_lambda_bound(m.sigma, m.drift);
    m.sample_box = Box{{0.5, -2.0}, {3.0, 2.0}};
    m.note = "density vanishes on {y2 <= 0} from x = (1,0)";
    return m;
}

/// Asian dynamics with a drift term along sigma: sigma = (x1, 0),
/// b = (mu0 * x1, x1). Here d_b sigma = mu0 * sigma, so the perturbed frame
/// differs from the plain one.
inline DiffusionModel make_asian_drift(double mu0) {
    DiffusionModel m;
    m.name = "asian-drift";
    m.domain = Box{{1e-3, -50.0}, {50.0, 50.0}};
    m.sigma = VectorField2(Poly2::x1(), Poly2::zero(), m.domain);
    m.drift = VectorField2(Poly2::x1().scaled(mu0), Poly2::x1(), m.domain);
    m.kappa = KappaField{[](const Vec2&) { return 1.0; }, [](const Vec2&) { return 0.0; }};
    m.n_bound = detail::default_n_bound(m.sigma, m.drift);
    m.lambda_bound = detail::default_lambda_bound(m.sigma, m.drift);
    m.sample_box = Box{{0.25, -2.0}, {4.0, 2.0}};
    m.note = "asian with drift mu0 = " + std::to_string(mu0) + " along sigma";
    return m;
}

inline DiffusionModel make_model(const std::string& name, double mu0 = 1.0) {
    if (name == "asian") return make_asian();
    if (name == "counterexample") return make_counterexample();
    if (name == "asian-drift") return make_asian_drift(mu0);
    throw ConfigError("unknown model '" + name + "'");
}

inline std::vector<std::string> builtin_model_names() {
    return {"asian", "counterexample", "asian-drift"};
}

}  // namespace hypotube
