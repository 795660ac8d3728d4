#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>

#include "hypotube/mc.hpp"
#include "hypotube/rng.hpp"

using namespace hypotube;

namespace {

DiffusionModel make_noiseless_model() {
    DiffusionModel m;
    m.name = "noiseless";
    m.domain = Box::all();
    m.sigma = VectorField2(Poly2::zero(), Poly2::zero());
    m.drift = VectorField2(Poly2::x2().scaled(0.2), Poly2::x1());
    m.n_bound = detail::default_n_bound(m.sigma, m.drift);
    m.lambda_bound = [](const Vec2&) { return 1.0; };
    return m;
}

}  // namespace

TEST_CASE("noise-free simulation follows the drift flow at first order") {
    const DiffusionModel m = make_noiseless_model();
    const SkeletonPath ref = solve_skeleton(m, {1.0, 0.0}, Control::zero(0.5));

    SimConfig coarse{1e-3, 1, 5, 0.5};
    SimConfig fine{5e-4, 1, 5, 0.5};
    const double e_coarse = norm(simulate_path(m, {1.0, 0.0}, coarse).points.back() -
                                 ref.points.back());
    const double e_fine = norm(simulate_path(m, {1.0, 0.0}, fine).points.back() -
                               ref.points.back());
    CHECK(e_coarse < 5e-3);
    CHECK(e_fine / e_coarse > 0.3);
    CHECK(e_fine / e_coarse < 0.7);  // first-order decay of the Euler error
}

TEST_CASE("paths are reproducible from (seed, index) alone") {
    const DiffusionModel asian = make_asian();
    SimConfig cfg{1e-3, 1, 2718, 0.2};
    const PathSample a = simulate_path(asian, {1.0, 1.0}, cfg, 17);
    const PathSample b = simulate_path(asian, {1.0, 1.0}, cfg, 17);
    REQUIRE(a.points.size() == b.points.size());
    CHECK(std::memcmp(a.points.data(), b.points.data(), a.points.size() * sizeof(Vec2)) == 0);
    const PathSample c = simulate_path(asian, {1.0, 1.0}, cfg, 18);
    CHECK(std::memcmp(a.points.data(), c.points.data(), a.points.size() * sizeof(Vec2)) != 0);
}

TEST_CASE("integrated component stays positive") {
    const DiffusionModel asian = make_asian();
    const double delta = 0.01;
    SimConfig cfg{delta / 50.0, 10000, 31, delta};
    const RescaledSamples s = rescaled_samples(asian, {1.0, 0.0}, delta, cfg);
    // second component of X_delta is x2 + delta + delta^{3/2} F_2 > 0
    double min_x2 = 1e300;
    for (const Vec2& f : s.f)
        min_x2 = std::min(min_x2, delta + std::pow(delta, 1.5) * f.x2);
    CHECK(min_x2 > 0.0);
}

TEST_CASE("tube estimator configuration checks") {
    const DiffusionModel asian = make_asian();
    SimConfig cfg{1e-3, 0, 1, 1.0};
    CHECK_THROWS_AS(tube_probability(asian, {1.0, 1.0}, Control::zero(1.0), 0.3, cfg),
                    ConfigError);
}

TEST_CASE("tube probability is monotone in the scale under shared seeds") {
    const DiffusionModel asian = make_asian();
    SimConfig cfg{2e-3, 2000, 77, 0.3};
    const Control phi = Control::zero(0.3);
    double prev = -1.0;
    for (const double R : {0.05, 0.1, 0.2, 0.4}) {
        const TubeResult res = tube_probability(asian, {1.0, 1.0}, phi, R, cfg);
        CHECK(res.p_hat >= prev);
        CHECK(res.ci_low <= res.p_hat);
        CHECK(res.p_hat <= res.ci_high);
        prev = res.p_hat;
    }
    CHECK(prev > 0.1);  // the widest tube keeps a solid fraction of paths
}

TEST_CASE("tube estimate agrees with a finer-step oracle within the intervals") {
    const DiffusionModel asian = make_asian();
    const Control phi = Control::zero(0.5);
    SimConfig coarse{5e-3, 3000, 2025, 0.5};
    SimConfig fine{5e-4, 3000, 919, 0.5};
    const TubeResult a = tube_probability(asian, {1.0, 1.0}, phi, 0.4, coarse);
    const TubeResult b = tube_probability(asian, {1.0, 1.0}, phi, 0.4, fine);
    CHECK(a.ci_low <= b.ci_high);
    CHECK(b.ci_low <= a.ci_high);
}

TEST_CASE("wilson interval coverage on a synthetic coin") {
    const std::size_t reps = 1000, n = 400;
    std::size_t covered = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        UniformStream u(1234, r);
        std::size_t heads = 0;
        for (std::size_t i = 0; i < n; ++i) heads += u.next() < 0.5 ? 1 : 0;
        const WilsonInterval ci = wilson95(heads, n);
        if (ci.low <= 0.5 && 0.5 <= ci.high) ++covered;
    }
    CHECK(covered >= 930);
}

TEST_CASE("rescaled sample mean matches the analytic short-time moments") {
    // E F1 = (e^{delta/2} - 1) / sqrt(delta), E F2 = (2(e^{delta/2}-1) - delta)
    // / delta^{3/2} for the unit-volatility integrated dynamics
    const DiffusionModel asian = make_asian();
    const double delta = 0.01;
    SimConfig cfg{delta / 200.0, 100000, 4242, delta};
    const RescaledSamples s = rescaled_samples(asian, {1.0, 1.0}, delta, cfg);
    double m1 = 0.0, m2 = 0.0;
    for (const Vec2& f : s.f) {
        m1 += f.x1;
        m2 += f.x2;
    }
    m1 /= static_cast<double>(s.f.size());
    m2 /= static_cast<double>(s.f.size());
    const double g = std::exp(delta / 2.0) - 1.0;
    const double mean1 = g / std::sqrt(delta);
    const double mean2 = (2.0 * g - delta) / std::pow(delta, 1.5);
    const double se1 = 1.0 / std::sqrt(static_cast<double>(s.f.size()));
    const double se2 = se1 / std::sqrt(3.0);
    CHECK(std::abs(m1 - mean1) < 4.0 * se1);
    CHECK(std::abs(m2 - mean2) < 4.0 * se2);
    CHECK(s.n_exited == 0);

    // principal-part samples from the same increments remove most variance
    double resid = 0.0;
    for (std::size_t p = 0; p < s.f.size(); ++p) resid += norm_sq(s.f[p] - s.g[p]);
    resid = std::sqrt(resid / static_cast<double>(s.f.size()));
    CHECK(resid < 0.2);  // order sqrt(delta), far below the unit spread of F
}

TEST_CASE("density fit recovers a synthetic gaussian") {
    std::vector<Vec2> samples(50000);
    NormalStream g(5150, 0);
    for (Vec2& s : samples) s = {g.next(), g.next()};
    const DensityFit fit = density_fit(samples, 2.0, 41);
    CHECK(fit.p_at_origin == doctest::Approx(1.0 / (2.0 * 3.141592653589793)).epsilon(0.10));
    CHECK(fit.L1 == doctest::Approx(0.5).epsilon(0.15));
    CHECK(fit.L1 == fit.L2);
    CHECK(fit.K1 > 0.0);
    CHECK(fit.K1 <= fit.K2);
    CHECK(fit.envelope_holds());
    CHECK_FALSE(fit.tail_warning);
}

TEST_CASE("density fit flags non-gaussian tails") {
    // uniform on a disk of radius 3: -log p is flat where resolved
    std::vector<Vec2> samples(20000);
    UniformStream u(31415, 0);
    for (Vec2& s : samples) {
        const double r = 3.0 * std::sqrt(u.next());
        const double a = u.range(0.0, 6.283185307179586);
        s = {r * std::cos(a), r * std::sin(a)};
    }
    const DensityFit fit = density_fit(samples, 2.0, 41);
    CHECK(fit.tail_warning);
    CHECK(fit.L2 <= 0.01);
    CHECK(fit.envelope_holds());
}

TEST_CASE("density fit input validation") {
    std::vector<Vec2> tiny(100, Vec2{0.0, 0.0});
    CHECK_THROWS_AS(density_fit(tiny, 2.0, 21), InsufficientSamples);
    std::vector<Vec2> enough(20000, Vec2{0.0, 0.0});
    NormalStream g(1, 0);
    for (Vec2& s : enough) s = {g.next(), g.next()};
    CHECK_THROWS_AS(density_fit(enough, 0.4, 21), ConfigError);
}

TEST_CASE("short time escape probability") {
    const DiffusionModel asian = make_asian();
    const double delta = 0.01;
    SimConfig cfg{delta / 50.0, 3000, 11, delta};

    const double inf = std::numeric_limits<double>::infinity();
    CHECK(short_time_escape(asian, {1.0, 1.0}, delta, 0.1, inf, cfg).p_hat == 0.0);

    const TubeResult narrow = short_time_escape(asian, {1.0, 1.0}, delta, 0.1, 0.5, cfg);
    const TubeResult wide = short_time_escape(asian, {1.0, 1.0}, delta, 0.2, 0.5, cfg);
    CHECK(wide.p_hat <= narrow.p_hat);  // same seeds, nested events
    CHECK(narrow.p_hat > 0.0);

    SimConfig bad = cfg;
    CHECK_THROWS_AS(short_time_escape(asian, {1.0, 1.0}, delta, 0.005, 0.5, bad), ConfigError);
}

TEST_CASE("ensembles are bitwise identical across worker counts") {
    const DiffusionModel asian = make_asian();
    const double delta = 0.01;
    SimConfig cfg{delta / 50.0, 2000, 888, delta};

    setenv("HYPOTUBE_THREADS", "1", 1);
    const RescaledSamples one = rescaled_samples(asian, {1.0, 1.0}, delta, cfg);
    setenv("HYPOTUBE_THREADS", "4", 1);
    const RescaledSamples four = rescaled_samples(asian, {1.0, 1.0}, delta, cfg);
    setenv("HYPOTUBE_THREADS", "8", 1);
    const RescaledSamples eight = rescaled_samples(asian, {1.0, 1.0}, delta, cfg);
    unsetenv("HYPOTUBE_THREADS");

    REQUIRE(one.f.size() == four.f.size());
    CHECK(std::memcmp(one.f.data(), four.f.data(), one.f.size() * sizeof(Vec2)) == 0);
    CHECK(std::memcmp(one.f.data(), eight.f.data(), one.f.size() * sizeof(Vec2)) == 0);
}
