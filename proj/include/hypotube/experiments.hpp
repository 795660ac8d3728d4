#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hypotube/bounds.hpp"
#include "hypotube/config.hpp"
#include "hypotube/control_metric.hpp"
#include "hypotube/csv.hpp"
#include "hypotube/mc.hpp"
#include "hypotube/norm_checks.hpp"

namespace hypotube {

inline constexpr const char* kVersion = "0.3.0";

// ---------------------------------------------------------------------------
// Config -> domain objects
// ---------------------------------------------------------------------------

inline DiffusionModel model_from_config(const ExperimentConfig& cfg) {
    const std::string name = cfg.get_string("model.name", "asian");
    if (name != "custom") return make_model(name, cfg.get_double("model.mu0", 1.0));

    DiffusionModel m;
    m.name = "custom";
    const std::vector<double> box = cfg.get_list("model.domain", {-10.0, -10.0, 10.0, 10.0});
    if (box.size() != 4) throw ConfigError("model.domain needs 4 numbers: x1lo x2lo x1hi x2hi");
    m.domain = Box{{box[0], box[1]}, {box[2], box[3]}};
    m.sigma = VectorField2(parse_poly(cfg.get_string("model.sigma1")),
                           parse_poly(cfg.get_string("model.sigma2", "0 0 0")), m.domain);
    m.drift = VectorField2(parse_poly(cfg.get_string("model.b1", "0 0 0")),
                           parse_poly(cfg.get_string("model.b2")), m.domain);
    if (cfg.has("model.kappa")) {
        const double k = cfg.get_double("model.kappa");
        const double dk = cfg.get_double("model.kappa_sigma_deriv", 0.0);
        m.kappa = KappaField{[k](const Vec2&) { return k; }, [dk](const Vec2&) { return dk; }};
    } else {
        m.h3_compliant = false;
    }
    if (cfg.has("model.n_const")) {
        const double n = cfg.get_double("model.n_const");
        if (n < 1.0) throw ConfigError("model.n_const must be >= 1");
        m.n_bound = [n](const Vec2&) { return n; };
    } else {
        m.n_bound = detail::default_n_bound(m.sigma, m.drift);
    }
    if (cfg.has("model.lambda_const")) {
        const double l = cfg.get_double("model.lambda_const");
        if (!(l > 0.0) || l > 1.0) throw ConfigError("model.lambda_const must be in (0, 1]");
        m.lambda_bound = [l](const Vec2&) { return l; };
    } else {
        m.lambda_bound = detail::default_lambda_bound(m.sigma, m.drift);
    }
    const std::vector<double> sb = cfg.get_list("model.sample_box", box);
    if (sb.size() != 4) throw ConfigError("model.sample_box needs 4 numbers");
    m.sample_box = Box{{sb[0], sb[1]}, {sb[2], sb[3]}};
    m.note = "user model";
    return m;
}

/// Control presets: "zero", "constant:c", "sine:a,w" (piecewise-constant
/// midpoint sampling), or explicit knot/value lists.
inline Control control_from_config(const ExperimentConfig& cfg, double T) {
    if (cfg.has("control.knots")) {
        return Control(cfg.get_list("control.knots"), cfg.get_list("control.values"));
    }
    std::string preset = cfg.get_string("control.preset", "zero");
    const int intervals = static_cast<int>(cfg.get_int("control.intervals", 64));
    if (preset == "zero") return Control::zero(T);
    if (preset.rfind("constant:", 0) == 0) {
        const double c = std::stod(preset.substr(9));
        return Control::constant(c, T);
    }
    if (preset.rfind("sine:", 0) == 0) {
        std::string args = preset.substr(5);
        for (char& ch : args)
            if (ch == ',') ch = ' ';
        std::istringstream in(args);
        double a = 0.0, w = 0.0;
        if (!(in >> a >> w)) throw ConfigError("control preset 'sine:a,w' needs two numbers");
        return Control::sampled([a, w](double t) { return a * std::sin(w * t); }, T, intervals);
    }
    throw ConfigError("unknown control preset '" + preset + "'");
}

inline Vec2 point_from_config(const ExperimentConfig& cfg, const std::string& key,
                              Vec2 fallback) {
    if (!cfg.has(key)) return fallback;
    const std::vector<double> v = cfg.get_list(key);
    if (v.size() != 2) throw ConfigError("config key '" + key + "' needs two coordinates");
    return {v[0], v[1]};
}

// ---------------------------------------------------------------------------
// Hypothesis profiles along a skeleton
// ---------------------------------------------------------------------------

/// Piecewise-linear table of the hypothesis bounds along the skeleton.
/// "pointwise" evaluates the bound functions at the skeleton points;
/// "ball" takes the extremes over unit balls around them (the literal
/// locally-uniform hypotheses, much more conservative).
struct ProfileTable {
    std::vector<double> t;
    std::vector<double> n;
    std::vector<double> lambda;

    double interp(const std::vector<double>& y, double tt) const {
        if (tt <= t.front()) return y.front();
        if (tt >= t.back()) return y.back();
        const auto it = std::upper_bound(t.begin(), t.end(), tt);
        const std::size_t i = static_cast<std::size_t>(it - t.begin());
        const double w = (tt - t[i - 1]) / (t[i] - t[i - 1]);
        return y[i - 1] + w * (y[i] - y[i - 1]);
    }
    double n_at(double tt) const { return interp(n, tt); }
    double lambda_at(double tt) const { return interp(lambda, tt); }
};

inline ProfileTable profile_along_skeleton(const DiffusionModel& model, const Vec2& x0,
                                           const Control& phi, const std::string& mode,
                                           int samples = 65) {
    std::vector<double> times(samples);
    for (int i = 0; i < samples; ++i)
        times[i] = phi.T() * static_cast<double>(i) / static_cast<double>(samples - 1);
    const SkeletonPath path = solve_skeleton_on(model, x0, phi, times);

    ProfileTable table;
    table.t = times;
    if (mode == "ball") {
        std::vector<Vec2> pts(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) pts[i] = path.at_time(times[i]);
        const HypothesisProfile hp = hypothesis_profile(model, pts);
        table.n = hp.n_t;
        table.lambda = hp.lambda_t;
    } else if (mode == "pointwise") {
        for (const double tt : times) {
            const Vec2 p = path.at_time(tt);
            table.n.push_back(model.n_bound(p));
            table.lambda.push_back(model.lambda_bound(p));
        }
    } else {
        throw ConfigError("profiles.mode must be 'pointwise' or 'ball'");
    }
    return table;
}

inline TubeProfiles to_tube_profiles(const ProfileTable& table, const Control& phi) {
    return {[table](double t) { return table.n_at(t); },
            [table](double t) { return table.lambda_at(t); }, phi};
}

// ---------------------------------------------------------------------------
// Experiment runners
// ---------------------------------------------------------------------------

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

inline void write_exit_histogram(const std::string& path, const TubeResult& res) {
    CsvWriter csv(path, {"t_lo", "t_hi", "count"});
    const std::size_t bins = res.exit_time_histogram.size();
    for (std::size_t b = 0; b < bins; ++b) {
        csv.row()
            .col(res.horizon * static_cast<double>(b) / static_cast<double>(bins))
            .col(res.horizon * static_cast<double>(b + 1) / static_cast<double>(bins))
            .col(res.exit_time_histogram[b]);
    }
}

inline std::string r_tag(double R) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", R);
    std::string s = buf;
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

}  // namespace detail

inline void run_tube_experiment(const ExperimentConfig& cfg, const std::string& dir) {
    const DiffusionModel model = model_from_config(cfg);
    const Vec2 x0 = point_from_config(cfg, "tube.x0", {1.0, 1.0});
    const double T = cfg.get_double("tube.T", 1.0);
    const Control phi = control_from_config(cfg, T);
    const std::vector<double> rs = cfg.get_list("tube.R", {0.4, 0.2, 0.1});
    SimConfig sim;
    sim.horizon = T;
    sim.dt = cfg.get_double("tube.dt", T / 500.0);
    sim.n_paths = static_cast<std::size_t>(cfg.get_int("tube.paths", 10000));
    sim.master_seed = cfg.get_seed("seed", 1);

    BoundConstants bc{cfg.get_double("bounds.K", 1.0), cfg.get_double("bounds.q", 1.0),
                      cfg.get_double("bounds.mu", 1.0), cfg.get_double("bounds.h", 1.0)};
    const ProfileTable table = profile_along_skeleton(
        model, x0, phi, cfg.get_string("profiles.mode", "pointwise"));
    const TubeProfiles profiles = to_tube_profiles(table, phi);
    const double rstar = r_star(phi, profiles.n_t, profiles.lambda_t, bc.mu, bc.h, bc.K, bc.q);

    CsvWriter tube_csv(detail::join_path(dir, "tube.csv"),
                       {"R", "p_hat", "ci_low", "ci_high", "n_paths", "seed"});
    CsvWriter bounds_csv(detail::join_path(dir, "bounds.csv"),
                         {"R", "lower", "upper", "mc_p_hat", "ci_low", "ci_high"});
    for (const double R : rs) {
        const TubeResult res = tube_probability(model, x0, phi, R, sim);
        tube_csv.row()
            .col(R)
            .col(res.p_hat)
            .col(res.ci_low)
            .col(res.ci_high)
            .col(res.n_paths)
            .col(res.seed);
        detail::write_exit_histogram(
            detail::join_path(dir, "exit_hist_R" + detail::r_tag(R) + ".csv"), res);
        const double lower = tube_lower_bound(bc, R, profiles, T);
        double upper = std::numeric_limits<double>::quiet_NaN();
        if (R <= rstar) upper = tube_upper_bound(bc, R, profiles, T, rstar);
        bounds_csv.row()
            .col(R)
            .col(lower)
            .col(upper)
            .col(res.p_hat)
            .col(res.ci_low)
            .col(res.ci_high);
    }
}

inline void run_density_experiment(const ExperimentConfig& cfg, const std::string& dir) {
    const DiffusionModel model = model_from_config(cfg);
    const Vec2 x0 = point_from_config(cfg, "density.x0", {1.0, 1.0});
    const double delta = cfg.get_double("density.delta", 0.01);
    SimConfig sim;
    sim.horizon = delta;
    sim.dt = cfg.get_double("density.dt", delta / 100.0);
    sim.n_paths = static_cast<std::size_t>(cfg.get_int("density.paths", 100000));
    sim.master_seed = cfg.get_seed("seed", 1);
    const double grid_radius = cfg.get_double("density.grid_radius", 2.0);
    const int grid_n = static_cast<int>(cfg.get_int("density.grid_n", 41));

    const RescaledSamples samples = rescaled_samples(model, x0, delta, sim);
    const DensityFit fit = density_fit(samples.f, grid_radius, grid_n);

    {
        CsvWriter grid_csv(detail::join_path(dir, "density_grid.csv"),
                           {"z1", "z2", "p_hat", "lower_env", "upper_env"});
        for (std::size_t j = 0; j < fit.grid.size(); ++j) {
            const double q = norm_sq(fit.grid[j]);
            grid_csv.row()
                .col(fit.grid[j].x1)
                .col(fit.grid[j].x2)
                .col(fit.p_hat[j])
                .col(fit.K1 * std::exp(-fit.L1 * q))
                .col(fit.K2 * std::exp(-fit.L2 * q));
        }
    }
    {
        CsvWriter sum_csv(detail::join_path(dir, "density_summary.csv"),
                          {"bandwidth_scale", "bandwidth", "K1", "L1", "K2", "L2", "p_at_origin",
                           "noise_floor", "tail_warning", "n_exited"});
        for (const double scale : {1.0, 0.5, 2.0}) {
            const DensityFit f = scale == 1.0 ? fit
                                              : density_fit(samples.f, grid_radius, grid_n,
                                                            scale * fit.bandwidth);
            sum_csv.row()
                .col(scale)
                .col(f.bandwidth)
                .col(f.K1)
                .col(f.L1)
                .col(f.K2)
                .col(f.L2)
                .col(f.p_at_origin)
                .col(f.noise_floor)
                .col(f.tail_warning)
                .col(samples.n_exited);
        }
    }
}

inline void run_escape_experiment(const ExperimentConfig& cfg, const std::string& dir) {
    const DiffusionModel model = model_from_config(cfg);
    const Vec2 x0 = point_from_config(cfg, "escape.x0", {1.0, 1.0});
    const double delta = cfg.get_double("escape.delta", 0.01);
    const double threshold = cfg.get_double("escape.threshold", 0.5);
    const std::vector<double> rs = cfg.get_list("escape.R", {0.1, 0.2});
    SimConfig sim;
    sim.horizon = delta;
    sim.dt = cfg.get_double("escape.dt", delta / 100.0);
    sim.n_paths = static_cast<std::size_t>(cfg.get_int("escape.paths", 10000));
    sim.master_seed = cfg.get_seed("seed", 1);

    CsvWriter csv(detail::join_path(dir, "escape.csv"),
                  {"R", "delta", "threshold", "p_hat", "ci_low", "ci_high", "n_paths", "seed"});
    for (const double R : rs) {
        const TubeResult res = short_time_escape(model, x0, delta, R, threshold, sim);
        csv.row()
            .col(R)
            .col(delta)
            .col(threshold)
            .col(res.p_hat)
            .col(res.ci_low)
            .col(res.ci_high)
            .col(res.n_paths)
            .col(res.seed);
    }
}

inline void run_norms_check_experiment(const ExperimentConfig& cfg, const std::string& dir) {
    const DiffusionModel model = model_from_config(cfg);
    const std::size_t cases = static_cast<std::size_t>(cfg.get_int("norms.cases", 10000));
    const std::uint64_t seed = cfg.get_seed("seed", 1);
    const std::vector<LemmaCheck> checks = norms_check_report(model, seed, cases);
    CsvWriter csv(detail::join_path(dir, "norms_check.csv"),
                  {"lemma", "cases", "violations", "empirical_constant", "pass"});
    for (const LemmaCheck& c : checks)
        csv.row().col(c.lemma).col(c.cases).col(c.violations).col(c.empirical_constant).col(
            c.pass);
    for (const LemmaCheck& c : checks)
        if (!c.pass) throw Error("norms check failed: " + c.lemma);
}

inline void run_control_metric_experiment(const ExperimentConfig& cfg, const std::string& dir) {
    const DiffusionModel model = model_from_config(cfg);
    const Vec2 x0 = point_from_config(cfg, "control_metric.x", {1.0, 1.0});
    const int n_dirs = static_cast<int>(cfg.get_int("control_metric.directions", 8));
    std::vector<double> angles(static_cast<std::size_t>(n_dirs));
    for (int k = 0; k < n_dirs; ++k) angles[k] = 6.283185307179586 * k / n_dirs;
    std::vector<double> radii = cfg.get_list("control_metric.radii",
                                             {1e-3, 3.162e-3, 1e-2, 3.162e-2, 1e-1});
    const int intervals = static_cast<int>(cfg.get_int("control_metric.intervals", 8));
    const int restarts = static_cast<int>(cfg.get_int("control_metric.restarts", 6));
    const std::uint64_t seed = cfg.get_seed("seed", 1);

    const std::vector<EquivalenceRow> rows =
        equivalence_report(model, x0, angles, radii, intervals, restarts, seed);
    CsvWriter csv(detail::join_path(dir, "equivalence.csv"),
                  {"direction_angle", "radius", "d", "d_saturated", "dc_upper", "dc_gap", "rho2",
                   "ratio_d_dc", "ratio_rho2_d"});
    for (const EquivalenceRow& r : rows)
        csv.row()
            .col(r.angle)
            .col(r.radius)
            .col(r.d)
            .col(r.d_saturated)
            .col(r.dc_upper)
            .col(r.dc_gap)
            .col(r.rho2)
            .col(r.ratio_d_dc)
            .col(r.ratio_rho2_d);
}

inline void run_taylor_scaling_experiment(const ExperimentConfig& cfg, const std::string& dir) {
    const DiffusionModel model = model_from_config(cfg);
    const Vec2 x0 = point_from_config(cfg, "taylor.x0", {1.0, 1.0});
    const std::vector<double> deltas = cfg.get_list("taylor.deltas", {0.02, 0.04, 0.08, 0.16});
    const std::size_t paths = static_cast<std::size_t>(cfg.get_int("taylor.paths", 10000));
    const double steps = cfg.get_double("taylor.steps_per_delta", 200.0);
    const std::uint64_t seed = cfg.get_seed("seed", 1);

    CsvWriter csv(detail::join_path(dir, "remainder_scaling.csv"),
                  {"delta", "n_paths", "l2_remainder"});
    std::vector<double> logs_delta, logs_r;
    for (const double delta : deltas) {
        SimConfig sim{delta / steps, paths, seed, delta};
        const RescaledSamples s = rescaled_samples(model, x0, delta, sim);
        double acc = 0.0;
        for (std::size_t p = 0; p < paths; ++p) acc += norm_sq(s.f[p] - s.g[p]);
        const double l2 = std::sqrt(acc / static_cast<double>(paths));
        csv.row().col(delta).col(paths).col(l2);
        logs_delta.push_back(std::log(delta));
        logs_r.push_back(std::log(l2));
    }
    // least-squares slope of log remainder against log delta
    const double n = static_cast<double>(deltas.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < logs_delta.size(); ++i) {
        sx += logs_delta[i];
        sy += logs_r[i];
        sxx += logs_delta[i] * logs_delta[i];
        sxy += logs_delta[i] * logs_r[i];
    }
    const double slope = (sxy - sx * sy / n) / (sxx - sx * sx / n);
    const double intercept = (sy - slope * sx) / n;
    CsvWriter slope_csv(detail::join_path(dir, "remainder_slope.csv"), {"slope", "intercept"});
    slope_csv.row().col(slope).col(intercept);
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

inline std::string list_models_text() {
    std::ostringstream out;
    out << "name            H3 status      domain                        note\n";
    for (const std::string& name : builtin_model_names()) {
        const DiffusionModel m = make_model(name);
        std::ostringstream dom;
        dom << "[" << m.domain.lo.x1 << ", " << m.domain.hi.x1 << "] x [" << m.domain.lo.x2
            << ", " << m.domain.hi.x2 << "]";
        out << name << std::string(name.size() < 16 ? 16 - name.size() : 1, ' ')
            << (m.kappa ? "holds         " : "not declared  ") << dom.str()
            << std::string(dom.str().size() < 30 ? 30 - dom.str().size() : 1, ' ') << m.note
            << "\n";
    }
    return out.str();
}

/// Runs the experiment described by an already-parsed config. Throws; the
/// file-level wrapper maps exceptions to exit codes.
inline void run_experiment(const ExperimentConfig& cfg, const std::string& config_origin) {
    const std::string kind = cfg.get_string("experiment.kind");
    const std::string dir = cfg.get_string("output.dir", "out");
    std::filesystem::create_directories(dir);

    const auto t0 = std::chrono::steady_clock::now();
    std::string status = "ok";
    std::string error_text;
    bool config_fault = false;
    try {
        if (kind == "tube")
            run_tube_experiment(cfg, dir);
        else if (kind == "density")
            run_density_experiment(cfg, dir);
        else if (kind == "shorttime-escape")
            run_escape_experiment(cfg, dir);
        else if (kind == "norms-check")
            run_norms_check_experiment(cfg, dir);
        else if (kind == "control-metric")
            run_control_metric_experiment(cfg, dir);
        else if (kind == "taylor-scaling")
            run_taylor_scaling_experiment(cfg, dir);
        else
            throw ConfigError("unknown experiment.kind '" + kind + "'");
    } catch (const ConfigError& e) {
        status = "error";
        config_fault = true;
        error_text = e.what();
    } catch (const std::exception& e) {
        status = "error";
        error_text = e.what();
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    {
        std::ofstream manifest(detail::join_path(dir, "manifest.txt"), std::ios::binary);
        manifest << "hypotube-version = " << kVersion << "\n";
        manifest << "config-origin = " << config_origin << "\n";
        for (const auto& [k, v] : cfg.entries()) manifest << k << " = " << v << "\n";
        manifest << "seed = " << cfg.get_seed("seed", 1) << "\n";
        manifest << "wall-time-seconds = " << wall << "\n";
        manifest << "status = " << status << "\n";
    }
    if (status != "ok") {
        std::ofstream log(detail::join_path(dir, "errors.log"), std::ios::binary);
        log << "error\t" << kind << "\t" << error_text << "\n";
        if (config_fault) throw ConfigError(error_text);
        throw Error(error_text);
    }
}

/// File-level entry point with the documented exit codes:
/// 0 success, 2 config error, 3 numeric failure.
inline int run_experiment_file(const std::string& path) {
    ExperimentConfig cfg;
    try {
        cfg = ExperimentConfig::parse_file(path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    try {
        run_experiment(cfg, path);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    }
    return 0;
}

}  // namespace hypotube
