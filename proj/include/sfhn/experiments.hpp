#pragma once

// Experiment orchestration.  execute() is pure: it returns the artifacts
// (name, bytes) of a run.  run() validates, executes, writes the artifacts
// and a manifest.json holding the resolved config plus SHA-256 hashes, so
// `--config manifest.json` replays the run byte for byte.

#include <sfhn/attractor_lab.hpp>
#include <sfhn/config.hpp>
#include <sfhn/errors.hpp>
#include <sfhn/io.hpp>
#include <sfhn/model.hpp>
#include <sfhn/noise.hpp>
#include <sfhn/parallel.hpp>
#include <sfhn/solver.hpp>
#include <sfhn/spatial.hpp>

#include <cmath>
#include <filesystem>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace sfhn {

inline constexpr int kExitPass = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitDivergence = 2;
inline constexpr int kExitAcceptance = 3;

struct Artifact {
    std::string name;  // relative to the output directory
    std::string bytes;
};

struct RunOutcome {
    int exit_code = kExitPass;
    io::json report;
    std::vector<Artifact> artifacts;
};

namespace detail {

inline io::json finite_or_null(double x) { return std::isfinite(x) ? io::json(x) : io::json(nullptr); }

inline io::json vec_json(const std::vector<double>& v) {
    io::json a = io::json::array();
    for (double x : v) a.push_back(finite_or_null(x));
    return a;
}

struct Context {
    ExperimentConfig cfg;
    Grid grid;
    ModelSpec spec;
    Nonlinearity nl;
    SolveConfig solve;
    int workers;

    explicit Context(const ExperimentConfig& c, int w)
        : cfg(c), grid(c.grid()), spec(c.spec()), nl(c.nonlinearity()), solve(c.solve()), workers(w) {}

    WienerPath path(std::uint64_t seed) const {
        return generate_path(seed, cfg.number("noise.dt_path"), cfg.t_minus(), cfg.t_plus());
    }

    std::vector<WienerPath> ensemble() const {
        const auto seeds = cfg.seeds();
        return parallel_map(seeds.size(), workers, [&](std::size_t i) { return path(seeds[i]); });
    }

    PhasePoint initial(double radius, std::uint64_t offset = 0) const {
        return ball_point(zero_point(grid), radius, cfg.seed("init.direction_seed") + offset);
    }

    /// r_hat over [-t_back, 0] sampled every ~0.05 time units.
    double r_hat(const WienerPath& p, double t_back) const {
        const double dtp = p.dt_path();
        const double step = dtp * std::max(1.0, std::round(0.05 / dtp));
        std::vector<double> grid_t;
        const auto n = static_cast<std::int64_t>(std::floor(t_back / step + 1e-9));
        for (std::int64_t i = -n; i <= 0; ++i) grid_t.push_back(static_cast<double>(i) * step);
        return make_ou_trace(p, spec.lambda(), spec.delta(), std::move(grid_t), spec.p(), spec.eta()).r_hat;
    }

    io::json meta(const std::string& experiment) const {
        io::json m;
        m["experiment"] = experiment;
        m["grid"] = {{"dim", grid.dim()},
                     {"L", grid.half_length()},
                     {"n", grid.points_per_axis()},
                     {"boundary", std::string(to_string(grid.boundary()))}};
        m["nonlinearity"] = std::string(kind_name(nl));
        m["eta"] = spec.eta();
        m["dt"] = solve.dt;
        m["scheme"] = std::string(to_string(solve.scheme));
        m["dt_path"] = cfg.number("noise.dt_path");
        m["window"] = {cfg.t_minus(), cfg.t_plus()};
        return m;
    }
};

inline std::string dump(const io::json& j) { return j.dump(2) + "\n"; }

inline RunOutcome run_simulate(const Context& c) {
    RunOutcome out;
    const auto seed = c.cfg.seed("noise.seed");
    const WienerPath path = c.path(seed);
    const double t_end = c.cfg.number("solve.t_end");
    const PhasePoint x0 = c.initial(c.cfg.number("init.radius"));
    const auto radii = c.cfg.list("diagnostics.tail_radii");
    const auto n_steps = step_count(t_end, c.solve.dt);
    DiagnosticsRecorder rec(c.spec, c.solve.record_every, n_steps, radii);
    const PhasePoint fin = phi_observed(t_end, path, x0, c.spec, c.nl, c.solve, rec);
    const auto& rows = rec.rows();
    const double trunc = ou_truncation_horizon(std::min(c.spec.lambda(), c.spec.delta()), path.dt_path());

    io::json rep;
    rep["run"] = c.meta("simulate");
    rep["run"]["seed"] = seed;
    rep["run"]["initial_radius"] = c.cfg.number("init.radius");
    rep["t_end"] = t_end;
    rep["initial_energy"] = weighted_energy(c.spec, x0);
    rep["final_energy"] = weighted_energy(c.spec, fin);
    rep["final_norm_grad_u"] = std::sqrt(gradient_energy(fin.u));
    rep["r_hat"] = c.r_hat(path, std::max(0.0, c.cfg.t_minus() - trunc));
    const double entry = c.cfg.number("diagnostics.entry_time");
    if (rows.size() >= 2 && rows.back().t - rows.front().t >= 1.0) {
        const auto avg = averaged_integral_probe(rows, c.spec, entry);
        io::json a;
        a["entry_time"] = entry;
        a["discounted_lp_u"] = avg.discounted_lp_u;
        a["discounted_grad_u_tilde_sq"] = avg.discounted_grad_u_tilde;
        for (const auto& w : avg.windows)
            a["unit_windows"][w.quantity] = {{"start", vec_json(w.window_start)},
                                             {"integral", vec_json(w.integral)},
                                             {"max_after_entry", w.max_after_entry},
                                             {"max_relative_change_after_entry", w.max_relative_change_after_entry}};
        a["bounded_after_entry"] = avg.bounded_after_entry;
        rep["averaged_integrals"] = a;
    }
    out.artifacts.push_back({"trajectory.csv", io::trajectory_to_csv(rows, radii)});
    out.artifacts.push_back({"u_final.csv", io::field_to_csv(fin.u)});
    out.artifacts.push_back({"v_final.csv", io::field_to_csv(fin.v)});
    out.artifacts.push_back({"path.csv", io::path_to_csv(path, c.spec.lambda(), c.spec.delta(), 0.0, t_end)});
    out.artifacts.push_back({"path.json", dump(io::path_sidecar(path))});
    out.report = rep;
    return out;
}

inline RunOutcome run_pullback(const Context& c) {
    RunOutcome out;
    const auto horizons = c.cfg.list("solve.horizons");
    const auto paths = c.ensemble();
    const PhasePoint x0 = c.initial(c.cfg.number("init.radius"));
    const std::size_t H = horizons.size();
    const auto snaps = parallel_map(paths.size() * H, c.workers, [&](std::size_t i) {
        return pullback_snapshot(horizons[i % H], paths[i / H], x0, c.spec, c.nl, c.solve);
    });
    const auto rhat = parallel_map(paths.size(), c.workers,
                                   [&](std::size_t w) { return c.r_hat(paths[w], horizons.back()); });
    std::vector<H1Sample> samples;
    io::json per = io::json::array();
    for (std::size_t w = 0; w < paths.size(); ++w) {
        io::json om;
        om["seed"] = paths[w].seed();
        om["r_hat"] = rhat[w];
        io::json recs = io::json::array();
        for (std::size_t j = 0; j < H; ++j) {
            const auto& s = snaps[w * H + j];
            samples.push_back(h1_sample(s, w, rhat[w]));
            recs.push_back({{"horizon", s.horizon},
                            {"energy", weighted_energy(c.spec, s.physical())},
                            {"grad_u_sq", samples.back().grad_u_sq},
                            {"grad_v2_sq", samples.back().grad_v2_sq}});
        }
        om["records"] = recs;
        per.push_back(om);
    }
    const H1Report h1 = h1_probe(samples);
    io::json rep;
    rep["run"] = c.meta("pullback");
    rep["run"]["initial_radius"] = c.cfg.number("init.radius");
    rep["run"]["horizons"] = horizons;
    rep["per_omega"] = per;
    io::json hj;
    hj["c_hat_u"] = h1.c_hat_u;
    hj["c_hat_v2"] = h1.c_hat_v2;
    hj["c_hat_u_half_horizons"] = h1.c_hat_u_half;
    hj["c_hat_v2_half_horizons"] = h1.c_hat_v2_half;
    hj["bound_holds"] = h1.bound_holds;
    hj["stable_under_doubling"] = h1.stable_under_doubling;
    hj["stability_tolerance"] = h1.stability_tolerance;
    io::json var = io::json::array();
    for (const auto& om : h1.omegas) var.push_back({{"seed", om.seed}, {"variation_grad_u_sq", om.variation_u}, {"variation_grad_v2_sq", om.variation_v2}});
    hj["variation"] = var;
    rep["h1"] = hj;
    if (!h1.bound_holds) out.exit_code = kExitAcceptance;
    const auto& last = snaps[H - 1];
    const PhasePoint x = last.physical();
    out.artifacts.push_back({"u_pullback.csv", io::field_to_csv(x.u)});
    out.artifacts.push_back({"v_pullback.csv", io::field_to_csv(x.v)});
    out.report = rep;
    return out;
}

inline RunOutcome run_absorbing(const Context& c) {
    RunOutcome out;
    const auto paths = c.ensemble();
    AbsorbingOptions opt;
    opt.horizons = c.cfg.list("solve.horizons");
    opt.entry_factor = c.cfg.number("absorbing.entry_factor");
    opt.direction_seed = c.cfg.seed("init.direction_seed");
    opt.workers = c.workers;
    const auto radii = c.cfg.list("init.radii");
    const AbsorbingReport r = absorbing_probe(c.spec, c.nl, paths, radii, c.solve, opt);
    io::json rep;
    rep["run"] = c.meta("absorbing");
    rep["run"]["seeds"] = r.seeds;
    rep["run"]["initial_radii"] = r.initial_radii;
    rep["run"]["horizons"] = r.horizons;
    rep["eta_used"] = r.eta_used;
    rep["entry_factor"] = r.entry_factor;
    rep["rho_k"] = r.rho_k;
    rep["excluded_runs"] = r.excluded;
    io::json runs = io::json::array();
    for (const auto& run : r.runs)
        runs.push_back({{"seed", run.seed},
                        {"initial_radius", run.initial_radius},
                        {"initial_energy", run.initial_energy},
                        {"energies", vec_json(run.energies)},
                        {"entry_time", finite_or_null(run.entry_time)},
                        {"converged", run.converged},
                        {"failure", run.failure}});
    rep["runs"] = runs;
    bool ok = true;
    io::json om = io::json::array();
    for (std::size_t w = 0; w < r.omegas.size(); ++w) {
        const auto& o = r.omegas[w];
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& run : r.runs)
            if (run.omega_index == w && run.converged) {
                lo = std::min(lo, run.energies.back());
                hi = std::max(hi, run.energies.back());
            }
        om.push_back({{"seed", o.seed},
                      {"rho_k", o.rho_k},
                      {"c_hat", o.c_hat},
                      {"entry_time", finite_or_null(o.entry_time)},
                      {"bound_holds", o.bound_holds},
                      {"final_energy_ratio", lo > 0.0 ? finite_or_null(hi / lo) : io::json(nullptr)}});
        ok = ok && o.bound_holds;
    }
    rep["per_omega"] = om;
    if (!ok) out.exit_code = kExitAcceptance;
    out.report = rep;
    return out;
}

inline RunOutcome run_tails(const Context& c) {
    RunOutcome out;
    const auto horizons = c.cfg.list("solve.horizons");
    const auto radii = c.cfg.list("diagnostics.tail_radii");
    const double eps = c.cfg.number("tails.epsilon");
    const auto paths = c.ensemble();
    const PhasePoint x0 = c.initial(c.cfg.number("init.radius"));
    const std::size_t H = horizons.size();
    const auto snaps = parallel_map(paths.size() * H, c.workers, [&](std::size_t i) {
        return pullback_snapshot(horizons[i % H], paths[i / H], x0, c.spec, c.nl, c.solve);
    });
    io::json rep;
    rep["run"] = c.meta("tails");
    rep["run"]["horizons"] = horizons;
    rep["radii"] = radii;
    rep["epsilon"] = eps;
    io::json per = io::json::array();
    bool monotone = true;
    for (std::size_t w = 0; w < paths.size(); ++w) {
        std::vector<PullbackSnapshot> mine(snaps.begin() + static_cast<std::ptrdiff_t>(w * H),
                                           snaps.begin() + static_cast<std::ptrdiff_t>((w + 1) * H));
        const TailReport t = tail_probe(mine, radii, eps);
        io::json o;
        o["seed"] = paths[w].seed();
        o["r_hat_eps"] = finite_or_null(t.r_hat_eps);
        o["monotone_in_k"] = t.monotone_in_k;
        io::json recs = io::json::array();
        for (std::size_t j = 0; j < t.times.size(); ++j)
            recs.push_back({{"horizon", t.times[j]},
                            {"total_mass", t.total_mass[j]},
                            {"tail_u_tilde", vec_json(t.tail_u_tilde[j])},
                            {"tail_v_tilde", vec_json(t.tail_v_tilde[j])},
                            {"tail_u", vec_json(t.tail_u[j])},
                            {"tail_v", vec_json(t.tail_v[j])}});
        o["records"] = recs;
        per.push_back(o);
        monotone = monotone && t.monotone_in_k;
    }
    rep["per_omega"] = per;
    if (!monotone) out.exit_code = kExitAcceptance;
    out.report = rep;
    return out;
}

inline RunOutcome run_attractor(const Context& c) {
    RunOutcome out;
    const auto seed = c.cfg.seed("noise.seed");
    const WienerPath path = c.path(seed);
    const double radius = c.cfg.number("init.radius");
    const auto n_ens = static_cast<std::size_t>(c.cfg.integer("init.ensemble"));
    const auto n_test = static_cast<std::size_t>(c.cfg.integer("attractor.test_ball"));
    std::vector<PhasePoint> ensemble, test;
    for (std::size_t i = 0; i < n_ens; ++i) ensemble.push_back(c.initial(radius, i));
    for (std::size_t i = 0; i < n_test; ++i) test.push_back(c.initial(radius, 1'000'000 + i));
    AttractorOptions opt;
    opt.cluster_tol = c.cfg.number("attractor.cluster_tol");
    opt.invariance_shift = c.cfg.number("attractor.invariance_shift");
    opt.test_ball = test;
    opt.workers = c.workers;
    const auto horizons = c.cfg.list("solve.horizons");
    const AttractorApprox a = attractor_approximate(c.spec, c.nl, path, ensemble, horizons, c.solve, opt);
    io::json rep;
    rep["run"] = c.meta("attractor");
    rep["run"]["seed"] = seed;
    rep["run"]["initial_radius"] = radius;
    rep["run"]["ensemble"] = n_ens;
    rep["run"]["test_ball"] = n_test;
    rep["run"]["thresholds_are_artifact_choices"] = true;
    rep["horizons"] = horizons;
    rep["cluster_tol"] = opt.cluster_tol;
    rep["cluster_counts"] = a.cluster_counts;
    rep["successive_distances"] = vec_json(a.successive_distances);
    rep["compactness_residual"] = a.compactness_residual;
    rep["invariance_shift"] = a.invariance_shift;
    rep["invariance_residual"] = a.invariance_residual;
    rep["attraction_residual"] = a.attraction_residual;
    rep["diameter"] = a.diameter;
    rep["member_indices"] = a.member_indices;
    for (std::size_t i = 0; i < a.members.size(); ++i) {
        out.artifacts.push_back({"member_" + std::to_string(i) + "_u.csv", io::field_to_csv(a.members[i].u)});
        out.artifacts.push_back({"member_" + std::to_string(i) + "_v.csv", io::field_to_csv(a.members[i].v)});
    }
    out.report = rep;
    return out;
}

inline io::json certificate_json(const CertificateReport& r) {
    io::json j;
    j["pass"] = r.pass;
    j["points_checked"] = r.points_checked;
    j["tolerance"] = kCertificateTolerance;
    io::json conds = io::json::array();
    for (const auto& m : r.conditions)
        conds.push_back({{"condition", m.name},
                         {"worst_margin", m.worst_margin},
                         {"worst_x", m.worst_x},
                         {"worst_s", m.worst_s}});
    j["conditions"] = conds;
    return j;
}

inline RunOutcome run_certify(const Context& c) {
    RunOutcome out;
    const CertificateReport r = certify_f(c.nl, c.spec, c.cfg.sample_box());
    io::json rep;
    rep["run"] = c.meta("certify-f");
    rep["certificate"] = certificate_json(r);
    out.exit_code = r.pass ? kExitPass : kExitAcceptance;
    out.report = rep;
    return out;
}

/// Fast invariant checks on a small grid.
inline RunOutcome run_selftest(const Context& c) {
    RunOutcome out;
    io::json checks = io::json::array();
    bool all = true;
    auto record = [&](const std::string& name, bool pass, double value) {
        checks.push_back({{"check", name}, {"pass", pass}, {"value", finite_or_null(value)}});
        all = all && pass;
    };
    const Grid g(1, 8.0, 64);
    const ModelParams prm = c.spec.params();
    const ModelSpec spec(prm, ModelSpec::Fields{Shape::gaussian(1.0, 1.0).on(g), Shape::gaussian(0.5, 1.0).on(g),
                                                Shape::gaussian(0.5, 1.0).on(g), Shape::gaussian(0.5, 1.0).on(g),
                                                Field(g), Field(g), Field(g)});
    const Nonlinearity nl = Cubic{};
    SolveConfig sc;
    sc.dt = 1.0 / 256.0;
    const WienerPath path = generate_path(c.cfg.seed("noise.seed"), sc.dt, 40.0, 4.0);

    {
        const auto v = path_value(path, 0.0);
        record("path_origin_zero", v[0] == 0.0 && v[1] == 0.0, std::abs(v[0]) + std::abs(v[1]));
        const WienerPath a = theta_shift(theta_shift(path, 0.5), 1.25), b = theta_shift(path, 1.75);
        const double t = -3.0;
        const auto va = path_value(a, t), vb = path_value(b, t);
        const double e = std::abs(va[0] - vb[0]) + std::abs(va[1] - vb[1]);
        record("shift_group", e <= 1e-12, e);
    }
    {
        const std::int64_t m = path.origin() - 512;
        OuCursor cur(path, spec.lambda(), 0, m - 64);
        for (int i = 0; i < 64; ++i) cur.advance();
        const double e = std::abs(cur.value() - ou_direct_at_node(path, spec.lambda(), 0, m));
        record("ou_recursion_matches_quadrature", e <= 1e-10, e);
    }
    {
        const Field f = Field::from_function(g, [](double x, double) { return std::exp(-x * x) * std::cos(x); });
        const double lhs = -inner_product(laplacian(f), f), rhs = gradient_energy(f);
        record("summation_by_parts", std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, rhs), std::abs(lhs - rhs));
    }
    {
        const PhasePoint x = ball_point(zero_point(g), 3.0, 5);
        const double s = 0.5, t = 0.75;
        const PhasePoint lhs = phi(s + t, path, x, spec, nl, sc);
        const PhasePoint rhs = phi(t, theta_shift(path, s), phi(s, path, x, spec, nl, sc), spec, nl, sc);
        const double e = phase_distance(lhs, rhs);
        record("cocycle", e <= 1e-10 * (1.0 + phase_norm(x)), e);
        const PhasePoint again = phi(s + t, path, x, spec, nl, sc);
        bool same = true;
        for (std::size_t i = 0; i < g.size(); ++i)
            same = same && lhs.u[i] == again.u[i] && lhs.v[i] == again.v[i];
        record("determinism", same, same ? 0.0 : 1.0);
    }
    {
        const auto r = certify_f(nl, spec, SampleBox{});
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& m : r.conditions) worst = std::min(worst, m.worst_margin);
        record("certify_default_cubic", r.pass, worst);
    }
    {
        const Field f = Shape::gaussian(1.0, 1.5).on(g);
        double prev = std::numeric_limits<double>::infinity();
        bool mono = true;
        for (double k = 0.5; k < 8.0; k += 0.5) {
            const double m = tail_mass(f, k);
            mono = mono && m <= prev;
            prev = m;
        }
        record("tail_monotone_in_k", mono, prev);
    }
    {
        const std::vector<PhasePoint> A{ball_point(zero_point(g), 1.0, 1), ball_point(zero_point(g), 2.0, 2)};
        const std::vector<PhasePoint> B{zero_point(g)};
        const double d = hausdorff_semidist(A, A);
        const double tri = hausdorff_semidist(A, B) - (hausdorff_semidist(A, A) + hausdorff_semidist(A, B));
        record("hausdorff_self_zero", d == 0.0, d);
        record("hausdorff_triangle", tri <= 1e-15, tri);
    }
    io::json rep;
    rep["run"] = c.meta("selftest");
    rep["checks"] = checks;
    rep["pass"] = all;
    out.exit_code = all ? kExitPass : kExitAcceptance;
    out.report = rep;
    return out;
}

}  // namespace detail

/// Runs the configured experiment without touching the filesystem (except
/// for reading field or table files named in the config).
inline RunOutcome execute(const ExperimentConfig& cfg, int workers = 1) {
    const detail::Context c(cfg, workers);
    const std::string& e = cfg.get("experiment");
    RunOutcome out;
    if (e == "simulate") out = detail::run_simulate(c);
    else if (e == "pullback") out = detail::run_pullback(c);
    else if (e == "absorbing") out = detail::run_absorbing(c);
    else if (e == "tails") out = detail::run_tails(c);
    else if (e == "attractor") out = detail::run_attractor(c);
    else if (e == "certify-f") out = detail::run_certify(c);
    else if (e == "selftest") out = detail::run_selftest(c);
    else throw InvalidArgument("unknown experiment '" + e + "'");
    out.report["exit_code"] = out.exit_code;
    out.artifacts.push_back({"report.json", detail::dump(out.report)});
    return out;
}

/// Config as recorded in a manifest: every key, file references made
/// absolute, and the output location and worker count dropped (neither
/// affects the artifacts).
inline io::json resolved_config(const ExperimentConfig& cfg) {
    io::json j = io::json::object();
    for (const auto& [k, v] : cfg.values()) {
        if (k == "output.dir" || k == "run.workers") continue;
        const bool is_file = k.size() > 5 && k.compare(k.size() - 5, 5, ".file") == 0;
        j[k] = is_file && !v.empty() ? std::filesystem::absolute(cfg.resolve(v)).lexically_normal().string() : v;
    }
    return j;
}

inline io::json diagnostics_json(const std::vector<Diagnostic>& d) {
    io::json a = io::json::array();
    for (const auto& x : d) a.push_back({{"path", x.path}, {"message", x.message}});
    return a;
}

/// Validates, executes and writes artifacts plus manifest.json into out_dir.
/// Errors are reported as one JSON object on `err`.
inline int run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, int workers, std::ostream& err) {
    const auto diags = cfg.validate();
    auto fail = [&](int code, io::json body) {
        body["exit_code"] = code;
        err << body.dump() << "\n";
        return code;
    };
    if (!diags.empty()) return fail(kExitValidation, {{"error", "validation"}, {"diagnostics", diagnostics_json(diags)}});
    RunOutcome out;
    try {
        out = execute(cfg, workers);
    } catch (const DivergenceError& e) {
        return fail(kExitDivergence, {{"error", "divergence"}, {"time", e.time()}, {"message", e.what()}});
    } catch (const std::exception& e) {
        return fail(kExitValidation, {{"error", "runtime"}, {"message", e.what()}});
    }
    io::json manifest;
    manifest["format"] = "sfhn-lab-manifest/1";
    manifest["experiment"] = cfg.get("experiment");
    manifest["config"] = resolved_config(cfg);
    manifest["exit_code"] = out.exit_code;
    io::json hashes = io::json::object();
    for (const auto& a : out.artifacts) {
        const std::filesystem::path rel(a.name);
        if (rel.is_absolute() || rel.lexically_normal().string().starts_with(".."))
            throw io::IoError("artifact escapes the output directory: " + a.name);
        io::write_text(out_dir / rel, a.bytes);
        hashes[a.name] = io::sha256_hex(a.bytes);
    }
    manifest["artifacts"] = hashes;
    io::write_text(out_dir / "manifest.json", detail::dump(manifest));
    return out.exit_code;
}

}  // namespace sfhn
