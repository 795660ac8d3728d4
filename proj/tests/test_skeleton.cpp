#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hypotube/norms.hpp"
#include "hypotube/rng.hpp"
#include "hypotube/skeleton.hpp"

using namespace hypotube;

TEST_CASE("skeleton flows with closed forms") {
    const DiffusionModel asian = make_asian();

    // zero control: dx = (0, x1), so x_t = (1, t) from (1, 0)
    const SkeletonPath p0 = solve_skeleton(asian, {1.0, 0.0}, Control::zero(1.0));
    CHECK(p0.points.back().x1 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p0.points.back().x2 == doctest::Approx(1.0).epsilon(1e-9));

    // pure translation: sigma = (1,0), no drift, constant control c
    DiffusionModel tr;
    tr.name = "flat";
    tr.domain = Box::all();
    tr.sigma = VectorField2(Poly2::constant(1.0), Poly2::zero());
    tr.drift = VectorField2(Poly2::zero(), Poly2::zero());
    tr.n_bound = detail::default_n_bound(tr.sigma, tr.drift);
    tr.lambda_bound = [](const Vec2&) { return 1.0; };
    const SkeletonPath p1 = solve_skeleton(tr, {0.5, 2.0}, Control::constant(3.0, 0.7));
    CHECK(p1.points.back().x1 == doctest::Approx(0.5 + 3.0 * 0.7).epsilon(1e-12));
    CHECK(p1.points.back().x2 == doctest::Approx(2.0).epsilon(1e-12));

    // asian with unit control: x_t = (e^t, e^t - 1) from (1, 0)
    const SkeletonPath p2 = solve_skeleton(asian, {1.0, 0.0}, Control::constant(1.0, 1.0));
    CHECK(p2.points.back().x1 == doctest::Approx(std::exp(1.0)).epsilon(1e-6));
    CHECK(p2.points.back().x2 == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-6));
}

TEST_CASE("flow consistency under step refinement") {
    const DiffusionModel asian = make_asian();
    const Control phi = Control::sampled([](double t) { return std::sin(3.0 * t); }, 1.0, 16);
    const SkeletonPath a = solve_skeleton(asian, {1.0, 0.0}, phi, 8);
    const SkeletonPath b = solve_skeleton(asian, {1.0, 0.0}, phi, 16);
    CHECK(norm(a.points.back() - b.points.back()) <=
          1e-6 * (1.0 + norm(b.points.back())));
}

TEST_CASE("skeleton reports domain exit") {
    const DiffusionModel asian = make_asian();
    CHECK_THROWS_AS(solve_skeleton(asian, {45.0, 0.0}, Control::constant(1.0, 1.0)), DomainExit);
}

TEST_CASE("control energy") {
    CHECK(energy(Control::constant(2.0, 0.25), 0.0, 0.25) == doctest::Approx(1.0));
    CHECK(energy(Control::zero(1.0), 0.2, 0.5) == 0.0);
    const Control pw({0.0, 0.5, 1.0}, {1.0, 3.0});
    CHECK(energy(pw, 0.0, 1.0) == doctest::Approx(std::sqrt(5.0)));
    CHECK_THROWS_AS(energy(pw, 0.8, 0.4), RangeError);
}

TEST_CASE("growth class membership") {
    std::vector<double> flat(101, 2.5);
    CHECK(growth_class_check(flat, 1.0, 1.0, 0.1).pass);

    std::vector<double> expo(101);
    for (int i = 0; i <= 100; ++i) expo[static_cast<std::size_t>(i)] = std::exp(i / 100.0);
    // boundary case: the sup ratio over |t-s| <= h is exactly e^h
    CHECK(growth_class_check(expo, 1.0, std::exp(0.1), 0.1).pass);

    const GrowthCheckResult fail = growth_class_check(expo, 1.0, 1.05, 0.1);
    CHECK_FALSE(fail.pass);
    CHECK(fail.witness_s == doctest::Approx(0.0).epsilon(0.02));
    CHECK(fail.witness_t == doctest::Approx(0.1).epsilon(0.02));

    std::vector<double> coarse(11, 1.0);
    CHECK_THROWS_AS(growth_class_check(coarse, 1.0, 1.0, 0.1), GridTooCoarse);
}

TEST_CASE("largest admissible scale") {
    const auto const_n = [](double) { return 1.0; };
    const auto const_l = [](double) { return 1.0; };

    // zero control: energy never reaches one, so the window term is h
    CHECK(r_star(Control::zero(1.0), const_n, const_l, 1.0, 0.3, 1.0, 1.0) ==
          doctest::Approx(0.3));

    // |phi|^2 = 4: the unit-energy window is 1/4
    CHECK(r_star(Control::constant(2.0, 1.5), const_n, const_l, 1.0, 10.0, 1.0, 1.0) ==
          doctest::Approx(0.25));

    // factor (lambda / (K mu n))^q
    const auto n3 = [](double) { return 3.0; };
    CHECK(r_star(Control::zero(1.0), n3, const_l, 2.0, 0.5, 2.0, 2.0) ==
          doctest::Approx(std::pow(1.0 / 12.0, 2.0) * 0.5));
}

TEST_CASE("admissible scale is monotone") {
    UniformStream u(31, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> knots{0.0, 0.3, 0.7, 1.0};
        std::vector<double> vals{u.range(-3.0, 3.0), u.range(-3.0, 3.0), u.range(-3.0, 3.0)};
        const Control phi(knots, vals);
        std::vector<double> scaled = vals;
        for (double& v : scaled) v *= 1.7;
        const Control phi_big(knots, scaled);
        const auto n1 = [](double) { return 1.5; };
        const auto n2 = [](double) { return 3.0; };
        const auto l = [](double) { return 0.8; };
        const double base = r_star(phi, n1, l, 1.0, 0.4, 1.0, 1.0);
        CHECK(r_star(phi_big, n1, l, 1.0, 0.4, 1.0, 1.0) <= base + 1e-12);
        CHECK(r_star(phi, n2, l, 1.0, 0.4, 1.0, 1.0) <= base + 1e-12);
    }
}

TEST_CASE("short moves along a control stay close in the perturbed frame") {
    // |x_delta(phi) - (x0 + b(x0) delta)| in the frame at x0 is at most
    // C (energy or sqrt(delta)); the empirical constant is recorded
    double c_emp = 0.0;
    for (const std::string& name : builtin_model_names()) {
        const DiffusionModel m = make_model(name);
        UniformStream u(101, 0);
        for (int trial = 0; trial < 1000; ++trial) {
            const Vec2 x0{u.range(m.sample_box.lo.x1, m.sample_box.hi.x1),
                          u.range(m.sample_box.lo.x2, m.sample_box.hi.x2)};
            const double delta = std::pow(10.0, u.range(-3.0, std::log10(0.05)));
            std::vector<double> knots{0.0, delta / 3.0, 2.0 * delta / 3.0, delta};
            std::vector<double> vals(3);
            for (double& v : vals) v = u.range(-1.0, 1.0);
            Control phi(knots, vals);
            double eps = energy(phi, 0.0, delta);
            if (eps > 0.2) {
                for (double& v : vals) v *= 0.19 / eps;
                phi = Control(knots, vals);
                eps = energy(phi, 0.0, delta);
            }
            const SkeletonPath path = solve_skeleton(m, x0, phi);
            const Vec2 x_hat = x0 + delta * m.drift.value(x0);
            const double move = frame_bar(m, x0, delta).norm(path.points.back() - x_hat);
            c_emp = std::max(c_emp, move / std::max(eps, std::sqrt(delta)));
        }
    }
    INFO("empirical short-move constant " << c_emp);
    CHECK(c_emp <= 10.0);
}
