#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "hypotube/model.hpp"
#include "hypotube/rng.hpp"

using namespace hypotube;

namespace {

// Independent oracle: central finite differences of the raw field values.
Vec2 fd_directional(const VectorField2& f, const VectorField2& g, const Vec2& x) {
    const Vec2 gv = g.value(x);
    const double h = 1e-6 * (1.0 + std::abs(x.x1) + std::abs(x.x2));
    const Vec2 fp = f.value(x + h * gv);
    const Vec2 fm = f.value(x - h * gv);
    return (0.5 / h) * (fp - fm);
}

Vec2 fd_lie_bracket(const VectorField2& f, const VectorField2& g, const Vec2& x) {
    return fd_directional(f, g, x) - fd_directional(g, f, x);
}

Poly2 random_poly(UniformStream& u) {
    std::vector<Poly2::Term> terms;
    for (int i = 0; i <= 2; ++i)
        for (int j = 0; i + j <= 2; ++j) terms.push_back({u.range(-2.0, 2.0), i, j});
    return Poly2(std::move(terms));
}

VectorField2 random_field(UniformStream& u) { return {random_poly(u), random_poly(u)}; }

bool close(const Vec2& a, const Vec2& b, double tol) { return norm(a - b) <= tol; }

}  // namespace

TEST_CASE("directional derivative on the built-in models") {
    const DiffusionModel asian = make_asian();
    // the drift annihilates the volatility gradient
    CHECK(close(directional_derivative(asian.sigma, asian.drift, {1.7, 0.4}), {0.0, 0.0}, 0.0));

    const Vec2 x{2.0, 3.0};
    const Vec2 got = directional_derivative(asian.drift, asian.sigma, x);
    CHECK(close(got, fd_directional(asian.drift, asian.sigma, x), 1e-7));
    CHECK(got.x1 == doctest::Approx(0.0));
    CHECK(got.x2 == doctest::Approx(2.0));

    const DiffusionModel ce = make_counterexample();
    const Vec2 d = directional_derivative(ce.drift, ce.sigma, {1.0, 0.0});
    CHECK(d.x1 == doctest::Approx(0.0));
    CHECK(d.x2 == doctest::Approx(2.0));
}

TEST_CASE("directional derivative rejects points outside the domain") {
    const DiffusionModel asian = make_asian();
    CHECK_THROWS_AS(directional_derivative(asian.sigma, asian.drift, {-1.0, 0.0}), DomainError);
}

TEST_CASE("lie bracket basics") {
    VectorField2 c1(Poly2::constant(1.0), Poly2::zero());
    VectorField2 c2(Poly2::zero(), Poly2::constant(1.0));
    CHECK(close(lie_bracket(c1, c2, {0.3, -0.7}), {0.0, 0.0}, 0.0));

    const DiffusionModel ce = make_counterexample();
    const Vec2 br = lie_bracket(ce.drift, ce.sigma, {1.0, 0.0});
    CHECK(br.x1 == doctest::Approx(0.0));
    CHECK(br.x2 == doctest::Approx(2.0));

    const DiffusionModel asian = make_asian();
    const Vec2 x{1.0, 1.0};
    const Vec2 got = asian.bracket_b_sigma(x);
    CHECK(close(got, fd_lie_bracket(asian.drift, asian.sigma, x), 1e-6));
    CHECK(got.x2 == doctest::Approx(1.0));
}

TEST_CASE("lie bracket antisymmetry over random fields") {
    UniformStream u(11, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const VectorField2 f = random_field(u);
        const VectorField2 g = random_field(u);
        const Vec2 x{u.range(-2.0, 2.0), u.range(-2.0, 2.0)};
        const Vec2 fg = lie_bracket(f, g, x);
        const Vec2 gf = lie_bracket(g, f, x);
        CHECK(close(fg, -1.0 * gf, 1e-12 * (1.0 + norm(fg))));
    }
}

TEST_CASE("analytic jacobians match central differences on the built-ins") {
    for (const std::string& name : builtin_model_names()) {
        const DiffusionModel m = make_model(name);
        UniformStream u(17, 1);
        for (int trial = 0; trial < 1000; ++trial) {
            const Vec2 x{u.range(m.sample_box.lo.x1, m.sample_box.hi.x1),
                         u.range(m.sample_box.lo.x2, m.sample_box.hi.x2)};
            CHECK(m.sigma.self_check(x));
            CHECK(m.drift.self_check(x));
        }
    }
}

TEST_CASE("second and third derivative forms match differencing") {
    UniformStream u(23, 0);
    const VectorField2 f = random_field(u);
    const Vec2 x{0.3, -0.4}, v{1.0, -2.0}, w{0.5, 0.25};
    const double h = 1e-5;
    // difference the jacobian along v, applied to w
    const Mat2 jp = f.jacobian(x + h * v);
    const Mat2 jm = f.jacobian(x - h * v);
    const Vec2 expect = (0.5 / h) * ((jp - jm) * w);
    CHECK(close(f.second_derivative(x, v, w), expect, 1e-6 * (1.0 + norm(expect))));

    const Vec2 sp = f.second_derivative(x + h * v, v, w);
    const Vec2 sm = f.second_derivative(x - h * v, v, w);
    const Vec2 expect3 = (0.5 / h) * (sp - sm);
    CHECK(close(f.third_derivative(x, v, v, w), expect3, 1e-5 * (1.0 + norm(expect3))));
}

TEST_CASE("volatility collinearity check") {
    const DiffusionModel asian = make_asian();
    const Vec2 pts[] = {{1.0, 0.0}, {2.5, 1.0}, {0.4, -3.0}};
    const H3Report rep = check_H3(asian, pts, 1e-8);
    REQUIRE(rep.kappa.size() == 3);
    for (const double k : rep.kappa) CHECK(k == doctest::Approx(1.0));
    // finite-difference cross-check of d_sigma sigma at the first point
    const Vec2 ds = fd_directional(asian.sigma, asian.sigma, pts[0]);
    CHECK(close(ds, rep.kappa[0] * asian.sigma.value(pts[0]), 1e-6));

    const DiffusionModel ce = make_counterexample();
    const H3Report rep0 = check_H3(ce, pts, 1e-8);
    for (const double k : rep0.kappa) CHECK(k == doctest::Approx(0.0));
}

TEST_CASE("collinearity violation and vanishing sigma are reported") {
    DiffusionModel m;
    m.name = "crooked";
    m.domain = Box::all();
    m.sigma = VectorField2(Poly2::x2(), Poly2::constant(1.0));
    m.drift = VectorField2(Poly2::zero(), Poly2::x1());
    m.n_bound = detail::default_n_bound(m.sigma, m.drift);
    m.lambda_bound = detail::default_lambda_bound(m.sigma, m.drift);
    // d_sigma sigma = (1, 0) at the origin, not collinear with sigma = (0, 1)
    const Vec2 bad[] = {{0.0, 0.0}};
    CHECK_THROWS_AS(check_H3(m, bad, 1e-8), H3Violated);
    try {
        check_H3(m, bad, 1e-8);
    } catch (const H3Violated& e) {
        REQUIRE(e.points.size() == 1);
        CHECK(e.points[0].first == 0.0);
    }

    DiffusionModel z = m;
    z.sigma = VectorField2(Poly2::x1(), Poly2::zero());
    const Vec2 origin[] = {{0.0, 5.0}};
    CHECK_THROWS_AS(check_H3(z, origin, 1e-8), SingularSigma);
}

TEST_CASE("H3 closure on a 32x32 grid for the built-ins") {
    for (const std::string& name : builtin_model_names()) {
        const DiffusionModel m = make_model(name);
        if (!m.h3_compliant) continue;
        std::vector<Vec2> grid;
        for (int i = 0; i < 32; ++i)
            for (int j = 0; j < 32; ++j)
                grid.push_back({m.domain.lo.x1 + (m.domain.hi.x1 - m.domain.lo.x1) * i / 31.0,
                                m.domain.lo.x2 + (m.domain.hi.x2 - m.domain.lo.x2) * j / 31.0});
        CHECK_NOTHROW(check_H3(m, grid, 1e-8));
    }
}

static std::vector<Vec2> oracle_ball(const Vec2& c, int count) {
    // re-derivation of the documented Vogel spiral sampling rule
    std::vector<Vec2> pts{c};
    const double golden = 3.14159265358979323846 * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double r = 0.995 * std::sqrt((i + 0.5) / count);
        pts.push_back({c.x1 + r * std::cos(golden * i), c.x2 + r * std::sin(golden * i)});
    }
    return pts;
}

TEST_CASE("hypothesis profile over unit balls") {
    // asian dynamics with a constant derivative bound
    DiffusionModel m = make_asian();
    m.n_bound = [](const Vec2&) { return 3.0; };

    const Vec2 path[] = {{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}};
    const HypothesisProfile prof = hypothesis_profile(m, path);
    REQUIRE(prof.n_t.size() == 3);
    for (double n : prof.n_t) CHECK(n == doctest::Approx(3.0));
    for (double l : prof.lambda_t) {
        CHECK(l <= 1.0);
        CHECK(l > 0.0);
    }
    // oracle: independent grid search over the same sampling rule
    double lam = 1.0;
    for (const Vec2& s : oracle_ball({1.0, 1.0}, 128))
        lam = std::min(lam, m.lambda_bound(s));
    CHECK(prof.lambda_t[0] == doctest::Approx(lam));

    // constant-coefficient model: profile constant along any path
    DiffusionModel c;
    c.name = "const";
    c.domain = Box::all();
    c.sigma = VectorField2(Poly2::constant(1.0), Poly2::zero());
    c.drift = VectorField2(Poly2::zero(), Poly2{{{1.0, 1, 0}, {1.0, 0, 0}}});
    c.n_bound = detail::default_n_bound(c.sigma, c.drift);
    c.lambda_bound = [](const Vec2&) { return 0.5; };
    DiffusionModel shifted = c;
    shifted.n_bound = [](const Vec2&) { return 2.0; };
    const Vec2 path2[] = {{0.0, 0.0}, {5.0, -3.0}};
    const HypothesisProfile p2 = hypothesis_profile(shifted, path2);
    CHECK(p2.n_t[0] == doctest::Approx(p2.n_t[1]));
    CHECK(p2.lambda_t[0] == doctest::Approx(p2.lambda_t[1]));
}

TEST_CASE("hypothesis profile pointwise eigenvalue on the counterexample") {
    const DiffusionModel ce = make_counterexample();
    const Mat2 a = ce.matrix_A({1.0, 0.0});
    // A = ((1,0),(0,2)): smallest eigenvalue of A A^T is 1
    CHECK(eig_bounds(a).lambda_min == doctest::Approx(1.0));
    CHECK(eig_bounds(a).lambda_max == doctest::Approx(4.0));
}

TEST_CASE("hypothesis profile rejects neighbourhoods leaving the domain") {
    const DiffusionModel asian = make_asian();
    const Vec2 path[] = {{1.0, -49.5}};
    CHECK_THROWS_AS(hypothesis_profile(asian, path), DomainError);
}

TEST_CASE("kappa and its derivative stay under the derivative bound") {
    // asserted as a check on the built-ins, not enforced by construction
    for (const std::string& name : builtin_model_names()) {
        const DiffusionModel m = make_model(name);
        if (!m.kappa) continue;
        UniformStream u(53, 0);
        for (int trial = 0; trial < 200; ++trial) {
            const Vec2 x{u.range(m.sample_box.lo.x1, m.sample_box.hi.x1),
                         u.range(m.sample_box.lo.x2, m.sample_box.hi.x2)};
            CHECK(std::abs(m.kappa->value(x)) <= m.n_bound(x));
            CHECK(std::abs(m.kappa->sigma_derivative(x)) <= m.n_bound(x));
        }
    }
}
