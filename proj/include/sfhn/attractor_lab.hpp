#pragma once

// Numerical diagnostics for the random dynamical system: absorbing-set
// probes, time-averaged integrals, H1 bounds, tail masses, Hausdorff
// semi-distances and a clustered approximation of the pullback attractor.
//
// Empirical constants are always reported together with the data they were
// fitted on; pass flags are stability checks, never hard-coded constants.

#include <sfhn/errors.hpp>
#include <sfhn/model.hpp>
#include <sfhn/noise.hpp>
#include <sfhn/parallel.hpp>
#include <sfhn/solver.hpp>
#include <sfhn/spatial.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace sfhn {

// ---------------------------------------------------------------------------
// Initial data

/// Deterministic smooth unit-norm direction in L2 x L2: a few Gaussian bumps
/// with random signs, centres in [-L/2, L/2] and widths in [L/8, L/4].
inline PhasePoint unit_direction(const Grid& grid, std::uint64_t seed) {
    std::seed_seq seq{seed, std::uint64_t(0x5eed)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double L = grid.half_length();
    auto smooth = [&] {
        struct Bump {
            double a, w, cx, cy;
        };
        std::vector<Bump> bumps;
        for (int b = 0; b < 3; ++b) {
            const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
            const double w = L / 8.0 + unit(rng) * L / 8.0;
            const double cx = (unit(rng) - 0.5) * L;
            const double cy = (unit(rng) - 0.5) * L;
            bumps.push_back({sign * (0.5 + unit(rng)), w, cx, cy});
        }
        return Field::from_function(grid, [&](double x, double y) {
            double s = 0.0;
            for (const auto& b : bumps) {
                const double dx = x - b.cx, dy = grid.dim() == 2 ? y - b.cy : 0.0;
                s += b.a * std::exp(-(dx * dx + dy * dy) / (2.0 * b.w * b.w));
            }
            return s;
        });
    };
    Field u = smooth();
    Field v = smooth();
    const double n = std::sqrt(norm_l2_sq(u) + norm_l2_sq(v));
    return PhasePoint{(1.0 / n) * u, (1.0 / n) * v};
}

/// center + radius * unit_direction(seed).
inline PhasePoint ball_point(const PhasePoint& center, double radius, std::uint64_t seed) {
    const PhasePoint d = unit_direction(center.u.grid(), seed);
    return PhasePoint{center.u + radius * d.u, center.v + radius * d.v};
}

inline PhasePoint zero_point(const Grid& g) { return PhasePoint{Field(g), Field(g)}; }

/// Physical weighted energy beta ||u||^2 + alpha ||v||^2.
inline double weighted_energy(const ModelSpec& spec, const PhasePoint& x) {
    return weighted_energy(spec, x.u.values(), x.v.values());
}

/// sqrt(||u_a - u_b||^2 + ||v_a - v_b||^2).
inline double phase_distance(const PhasePoint& a, const PhasePoint& b) {
    a.u.check_same(b.u);
    const double w = a.u.grid().cell_volume();
    double s = 0.0;
    for (std::size_t i = 0; i < a.u.size(); ++i) {
        const double du = a.u[i] - b.u[i], dv = a.v[i] - b.v[i];
        s += du * du + dv * dv;
    }
    return std::sqrt(w * s);
}

inline double phase_norm(const PhasePoint& a) {
    return std::sqrt(norm_l2_sq(a.u) + norm_l2_sq(a.v));
}

// ---------------------------------------------------------------------------
// Absorbing set

struct AbsorbingRun {
    std::uint64_t seed = 0;
    std::size_t omega_index = 0;
    double initial_radius = 0.0;
    double initial_energy = 0.0;
    std::vector<double> horizons;
    std::vector<double> energies;  // present-time energy per pullback horizon
    double entry_time = std::numeric_limits<double>::infinity();
    bool converged = true;
    std::string failure;
};

struct AbsorbingOmega {
    std::uint64_t seed = 0;
    double rho_k = 0.0;      // sup over initial radii of the final-horizon energy
    double c_hat = 0.0;      // smallest C with E(t) <= e^{-eta t} E(0) + C on all records
    double entry_time = 0.0; // max entry time over converged runs
    bool bound_holds = true;
};

struct AbsorbingReport {
    std::vector<std::uint64_t> seeds;
    std::vector<double> initial_radii;
    std::vector<double> horizons;
    double eta_used = 0.0;
    double entry_factor = 2.0;
    std::vector<AbsorbingRun> runs;
    std::vector<AbsorbingOmega> omegas;
    double rho_k = 0.0;  // sup over the ensemble
    std::size_t excluded = 0;
};

struct AbsorbingOptions {
    std::vector<double> horizons;     // increasing pullback horizons
    double entry_factor = 2.0;        // absorbing threshold = factor * rho_k(omega)
    std::uint64_t direction_seed = 1;
    int workers = 1;
};

/// Pullback-evolves center + r * direction for every path and radius to
/// each horizon and records present-time energies.
inline AbsorbingReport absorbing_probe(const ModelSpec& spec, const Nonlinearity& nl,
                                       const std::vector<WienerPath>& paths, const std::vector<double>& radii,
                                       const SolveConfig& cfg, const AbsorbingOptions& opt) {
    if (opt.horizons.empty()) throw InvalidArgument("absorbing probe needs at least one horizon");
    if (!std::is_sorted(opt.horizons.begin(), opt.horizons.end()))
        throw InvalidArgument("absorbing probe horizons must increase");
    AbsorbingReport rep;
    rep.initial_radii = radii;
    rep.horizons = opt.horizons;
    rep.eta_used = spec.eta();
    rep.entry_factor = opt.entry_factor;
    for (const auto& p : paths) rep.seeds.push_back(p.seed());
    const PhasePoint dir = unit_direction(spec.grid(), opt.direction_seed);
    const PhasePoint origin = zero_point(spec.grid());

    const std::size_t n_runs = paths.size() * radii.size();
    rep.runs = parallel_map(n_runs, opt.workers, [&](std::size_t idx) {
        const std::size_t w = idx / radii.size();
        const double r = radii[idx % radii.size()];
        AbsorbingRun run;
        run.seed = paths[w].seed();
        run.omega_index = w;
        run.initial_radius = r;
        const PhasePoint x0{origin.u + r * dir.u, origin.v + r * dir.v};
        run.initial_energy = weighted_energy(spec, x0);
        run.horizons = opt.horizons;
        try {
            for (double t : opt.horizons)
                run.energies.push_back(weighted_energy(spec, phi_pullback(t, paths[w], x0, spec, nl, cfg)));
        } catch (const DivergenceError& e) {
            run.converged = false;
            run.failure = e.what();
        }
        return run;
    });

    const double eta = spec.eta();
    for (std::size_t w = 0; w < paths.size(); ++w) {
        AbsorbingOmega om;
        om.seed = paths[w].seed();
        for (const auto& run : rep.runs)
            if (run.omega_index == w && run.converged) om.rho_k = std::max(om.rho_k, run.energies.back());
        const double threshold = opt.entry_factor * om.rho_k;
        for (auto& run : rep.runs) {
            if (run.omega_index != w || !run.converged) continue;
            std::size_t j = run.energies.size();
            while (j > 0 && run.energies[j - 1] <= threshold) --j;
            run.entry_time = j < run.energies.size() ? run.horizons[j] : std::numeric_limits<double>::infinity();
            om.entry_time = std::max(om.entry_time, run.entry_time);
            for (std::size_t k = 0; k < run.energies.size(); ++k)
                om.c_hat = std::max(om.c_hat, run.energies[k] - std::exp(-eta * run.horizons[k]) * run.initial_energy);
        }
        for (const auto& run : rep.runs) {
            if (run.omega_index != w || !run.converged) continue;
            for (std::size_t k = 0; k < run.energies.size(); ++k)
                if (run.energies[k] > std::exp(-eta * run.horizons[k]) * run.initial_energy + om.c_hat)
                    om.bound_holds = false;
        }
        rep.rho_k = std::max(rep.rho_k, om.rho_k);
        rep.omegas.push_back(om);
    }
    for (const auto& run : rep.runs)
        if (!run.converged) ++rep.excluded;
    return rep;
}

// ---------------------------------------------------------------------------
// Trajectory diagnostics and time-averaged integrals

struct DiagnosticRow {
    double t = 0.0;
    double energy = 0.0;        // beta ||u~||^2 + alpha ||v~||^2
    double norm_u_tilde = 0.0;
    double norm_v_tilde = 0.0;
    double grad_u_tilde = 0.0;  // ||grad u~||_2
    double lp_u = 0.0;          // ||u||_p^p
    double grad_u = 0.0;        // ||grad u||_2
    std::vector<double> tails;  // tail mass of u~^2 + v~^2 per configured radius
};

inline DiagnosticRow diagnostics_at(const ModelSpec& spec, double t, std::span<const double> u_tilde,
                                    std::span<const double> v_tilde, double y1, double y2,
                                    const std::vector<double>& tail_radii) {
    (void)y2;
    const Grid& g = spec.grid();
    const double w = g.cell_volume();
    DiagnosticRow r;
    r.t = t;
    r.energy = weighted_energy(spec, u_tilde, v_tilde);
    r.norm_u_tilde = std::sqrt(norm_l2_sq(u_tilde, w));
    r.norm_v_tilde = std::sqrt(norm_l2_sq(v_tilde, w));
    r.grad_u_tilde = std::sqrt(gradient_energy(g, u_tilde));
    std::vector<double> u(u_tilde.begin(), u_tilde.end());
    const auto phi1 = spec.phi1().values();
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += y1 * phi1[i];
    r.lp_u = lp_power(u, spec.p(), w);
    r.grad_u = std::sqrt(gradient_energy(g, u));
    for (double k : tail_radii) r.tails.push_back(tail_mass(g, u_tilde, k) + tail_mass(g, v_tilde, k));
    return r;
}

/// Observer collecting DiagnosticRows every `every` levels and at the end.
class DiagnosticsRecorder {
  public:
    DiagnosticsRecorder(const ModelSpec& spec, std::int64_t every, std::int64_t last_level,
                        std::vector<double> tail_radii, double time_offset = 0.0)
        : spec_(spec), every_(every), last_(last_level), radii_(std::move(tail_radii)), offset_(time_offset) {}

    void operator()(const LevelView& lv) {
        if (lv.k % every_ != 0 && lv.k != last_) return;
        rows_.push_back(diagnostics_at(spec_, lv.t + offset_, lv.u_tilde, lv.v_tilde, lv.y1, lv.y2, radii_));
    }

    const std::vector<DiagnosticRow>& rows() const noexcept { return rows_; }
    std::vector<DiagnosticRow> take() { return std::move(rows_); }

  private:
    ModelSpec spec_;
    std::int64_t every_, last_;
    std::vector<double> radii_;
    double offset_;
    std::vector<DiagnosticRow> rows_;
};

struct WindowSeries {
    std::string quantity;
    std::vector<double> window_start;
    std::vector<double> integral;
    double max_after_entry = 0.0;
    double max_relative_change_after_entry = 0.0;
};

struct AveragedIntegralReport {
    double eta = 0.0;
    double final_time = 0.0;
    double discounted_lp_u = 0.0;        // int_0^t e^{eta(s-t)} ||u||_p^p ds
    double discounted_grad_u_tilde = 0.0;// int_0^t e^{eta(s-t)} ||grad u~||^2 ds
    double entry_time = 0.0;
    std::vector<WindowSeries> windows;   // lp_u, grad_u_tilde_sq, grad_u_sq
    bool bounded_after_entry = true;
};

namespace detail {

// Trapezoid of y over t on [a, b] with linear interpolation at the ends.
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y, double a, double b) {
    double s = 0.0;
    auto interp = [&](double x) {
        auto it = std::upper_bound(t.begin(), t.end(), x);
        std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - t.begin(), 1)) - 1;
        i = std::min(i, t.size() - 2);
        const double f = (x - t[i]) / (t[i + 1] - t[i]);
        return y[i] + f * (y[i + 1] - y[i]);
    };
    double prev_t = a, prev_y = interp(a);
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] <= a) continue;
        if (t[i] >= b) break;
        s += 0.5 * (t[i] - prev_t) * (y[i] + prev_y);
        prev_t = t[i];
        prev_y = y[i];
    }
    s += 0.5 * (b - prev_t) * (interp(b) + prev_y);
    return s;
}

}  // namespace detail

/// Discounted and unit-window integrals of ||u||_p^p, ||grad u~||^2 and
/// ||grad u||^2 over a recorded trajectory (trapezoidal rule).
inline AveragedIntegralReport averaged_integral_probe(const std::vector<DiagnosticRow>& rows, const ModelSpec& spec,
                                                      double entry_time, double window = 1.0) {
    if (rows.size() < 2) throw InvalidArgument("averaged integrals need at least two records");
    if (!(window > 0.0)) throw InvalidArgument("window length must be positive");
    const double t0 = rows.front().t, t1 = rows.back().t;
    if (t0 + window > t1 + 1e-12) throw InvalidArgument("integration window extends past the trajectory");
    std::vector<double> t, lp, gut, gu;
    for (const auto& r : rows) {
        t.push_back(r.t);
        lp.push_back(r.lp_u);
        gut.push_back(r.grad_u_tilde * r.grad_u_tilde);
        gu.push_back(r.grad_u * r.grad_u);
    }
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw InvalidArgument("record times must increase");

    AveragedIntegralReport rep;
    rep.eta = spec.eta();
    rep.final_time = t1;
    rep.entry_time = entry_time;
    const double eta = spec.eta();
    auto discounted = [&](const std::vector<double>& y) {
        std::vector<double> w(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) w[i] = std::exp(eta * (t[i] - t1)) * y[i];
        return detail::trapezoid(t, w, t0, t1);
    };
    rep.discounted_lp_u = discounted(lp);
    rep.discounted_grad_u_tilde = discounted(gut);

    const std::pair<const char*, const std::vector<double>*> series[] = {
        {"lp_u", &lp}, {"grad_u_tilde_sq", &gut}, {"grad_u_sq", &gu}};
    for (const auto& [name, y] : series) {
        WindowSeries ws;
        ws.quantity = name;
        for (int k = 0;; ++k) {
            const double a = t0 + k * window;
            if (a + window > t1 + 1e-9 * window) break;
            ws.window_start.push_back(a);
            ws.integral.push_back(detail::trapezoid(t, *y, a, std::min(a + window, t1)));
        }
        double prev = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t k = 0; k < ws.integral.size(); ++k) {
            if (ws.window_start[k] < entry_time) continue;
            const double v = ws.integral[k];
            if (!std::isfinite(v)) rep.bounded_after_entry = false;
            ws.max_after_entry = std::max(ws.max_after_entry, v);
            if (std::isfinite(prev)) {
                const double scale = std::max(std::abs(prev), std::abs(v));
                if (scale > 0.0)
                    ws.max_relative_change_after_entry =
                        std::max(ws.max_relative_change_after_entry, std::abs(v - prev) / scale);
            }
            prev = v;
        }
        rep.windows.push_back(std::move(ws));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Pullback snapshots, H1 bounds and tails

/// Present-time transformed state after a pullback solve, with the noise
/// fields needed to re-assemble (u, v) and the co-evolved v~2.
struct PullbackSnapshot {
    double horizon = 0.0;
    std::uint64_t seed = 0;
    Field u_tilde, v_tilde, z1, z2, v2;

    PhasePoint physical() const { return PhasePoint{u_tilde + z1, v_tilde + z2}; }
};

inline PullbackSnapshot pullback_snapshot(double t, const WienerPath& path, const PhasePoint& x0,
                                          const ModelSpec& spec, const Nonlinearity& nl, const SolveConfig& cfg) {
    PullbackSnapshot snap;
    snap.horizon = t;
    snap.seed = path.seed();
    const WienerPath shifted = t == 0.0 ? path : theta_shift(path, -t);
    SplitTracker split(spec, cfg.dt);
    const auto n_steps = step_count(t, cfg.dt);
    double y1 = 0.0, y2 = 0.0;
    std::vector<double> ut, vt;
    if (t == 0.0) {
        const auto [a, b] = ou_pair_at(path, spec, cfg.dt, 0.0);
        snap.z1 = a * spec.phi1();
        snap.z2 = b * spec.phi2();
        snap.u_tilde = x0.u - snap.z1;
        snap.v_tilde = x0.v - snap.z2;
        snap.v2 = Field(spec.grid());
        return snap;
    }
    phi_observed(t, shifted, x0, spec, nl, cfg, [&](const LevelView& lv) {
        split(lv);
        if (lv.k == n_steps) {
            y1 = lv.y1;
            y2 = lv.y2;
            ut.assign(lv.u_tilde.begin(), lv.u_tilde.end());
            vt.assign(lv.v_tilde.begin(), lv.v_tilde.end());
        }
    });
    snap.u_tilde = Field(spec.grid(), std::move(ut));
    snap.v_tilde = Field(spec.grid(), std::move(vt));
    snap.z1 = y1 * spec.phi1();
    snap.z2 = y2 * spec.phi2();
    snap.v2 = split.v2();
    return snap;
}

struct H1Sample {
    std::size_t omega_index = 0;
    std::uint64_t seed = 0;
    double horizon = 0.0;
    double grad_u_sq = 0.0;   // ||grad u||^2 at the present time
    double grad_v2_sq = 0.0;  // ||grad v~2||^2 at the present time
    double r_hat = 0.0;
};

struct H1Omega {
    std::uint64_t seed = 0;
    double r_hat = 0.0;
    std::vector<double> horizons, grad_u_sq, grad_v2_sq;
    double variation_u = 0.0;   // (max - min) / max over horizons
    double variation_v2 = 0.0;
};

struct H1Report {
    std::vector<H1Omega> omegas;
    double c_hat_u = 0.0, c_hat_v2 = 0.0;             // fitted on all horizons
    double c_hat_u_half = 0.0, c_hat_v2_half = 0.0;   // fitted on horizons <= max/2
    bool bound_holds = true;
    bool stable_under_doubling = true;
    double stability_tolerance = 0.2;
};

inline H1Sample h1_sample(const PullbackSnapshot& snap, std::size_t omega_index, double r_hat) {
    H1Sample s;
    s.omega_index = omega_index;
    s.seed = snap.seed;
    s.horizon = snap.horizon;
    s.grad_u_sq = gradient_energy(snap.physical().u);
    s.grad_v2_sq = gradient_energy(snap.v2);
    s.r_hat = r_hat;
    return s;
}

/// Aggregates H1 samples: per-omega variation over horizons, fitted
/// c_hat = max value / (1 + r_hat) and its stability under horizon doubling.
inline H1Report h1_probe(const std::vector<H1Sample>& samples, double stability_tolerance = 0.2) {
    H1Report rep;
    rep.stability_tolerance = stability_tolerance;
    if (samples.empty()) return rep;
    std::size_t n_omega = 0;
    double h_max = 0.0;
    for (const auto& s : samples) {
        n_omega = std::max(n_omega, s.omega_index + 1);
        h_max = std::max(h_max, s.horizon);
    }
    rep.omegas.resize(n_omega);
    for (const auto& s : samples) {
        auto& om = rep.omegas[s.omega_index];
        om.seed = s.seed;
        om.r_hat = s.r_hat;
        om.horizons.push_back(s.horizon);
        om.grad_u_sq.push_back(s.grad_u_sq);
        om.grad_v2_sq.push_back(s.grad_v2_sq);
        const double scale = 1.0 + s.r_hat;
        rep.c_hat_u = std::max(rep.c_hat_u, s.grad_u_sq / scale);
        rep.c_hat_v2 = std::max(rep.c_hat_v2, s.grad_v2_sq / scale);
        if (s.horizon <= 0.5 * h_max * (1.0 + 1e-12)) {
            rep.c_hat_u_half = std::max(rep.c_hat_u_half, s.grad_u_sq / scale);
            rep.c_hat_v2_half = std::max(rep.c_hat_v2_half, s.grad_v2_sq / scale);
        }
    }
    auto variation = [](const std::vector<double>& v) {
        if (v.empty()) return 0.0;
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;
    };
    for (auto& om : rep.omegas) {
        om.variation_u = variation(om.grad_u_sq);
        om.variation_v2 = variation(om.grad_v2_sq);
    }
    for (const auto& s : samples)
        if (s.grad_u_sq > rep.c_hat_u * (1.0 + s.r_hat) * (1.0 + 1e-12) ||
            s.grad_v2_sq > rep.c_hat_v2 * (1.0 + s.r_hat) * (1.0 + 1e-12))
            rep.bound_holds = false;
    auto stable = [&](double full, double half) {
        return full == 0.0 || std::abs(full - half) <= stability_tolerance * full;
    };
    rep.stable_under_doubling = stable(rep.c_hat_u, rep.c_hat_u_half) && stable(rep.c_hat_v2, rep.c_hat_v2_half);
    return rep;
}

struct TailReport {
    std::vector<double> radii;
    std::vector<double> times;  // pullback horizons of the snapshots
    // [snapshot][radius]
    std::vector<std::vector<double>> tail_u_tilde, tail_v_tilde, tail_u, tail_v;
    std::vector<double> total_mass;  // ||u~||^2 + ||v~||^2 per snapshot
    double epsilon = 0.0;
    double r_hat_eps = std::numeric_limits<double>::infinity();  // smallest radius with tail <= eps
    bool monotone_in_k = true;
};

/// Tail masses per (snapshot, radius).  R_hat(eps) uses the tail of
/// (u~, v~) at the last snapshot.
inline TailReport tail_probe(const std::vector<PullbackSnapshot>& snaps, const std::vector<double>& radii,
                             double epsilon) {
    if (snaps.empty()) throw InvalidArgument("tail probe needs at least one snapshot");
    if (radii.empty()) throw InvalidArgument("tail probe needs at least one radius");
    const double L = snaps.front().u_tilde.grid().half_length();
    for (double k : radii) {
        if (!(k > 0.0)) throw InvalidArgument("tail radii must be positive");
        if (k >= L) throw InvalidArgument("tail radius " + std::to_string(k) + " is not below L = " + std::to_string(L));
    }
    if (!std::is_sorted(radii.begin(), radii.end())) throw InvalidArgument("tail radii must increase");
    TailReport rep;
    rep.radii = radii;
    rep.epsilon = epsilon;
    for (const auto& s : snaps) {
        rep.times.push_back(s.horizon);
        const PhasePoint x = s.physical();
        std::vector<double> tu, tv, pu, pv;
        for (double k : radii) {
            tu.push_back(tail_mass(s.u_tilde, k));
            tv.push_back(tail_mass(s.v_tilde, k));
            pu.push_back(tail_mass(x.u, k));
            pv.push_back(tail_mass(x.v, k));
        }
        for (std::size_t j = 1; j < radii.size(); ++j)
            if (tu[j] + tv[j] > tu[j - 1] + tv[j - 1] || pu[j] + pv[j] > pu[j - 1] + pv[j - 1])
                rep.monotone_in_k = false;
        rep.tail_u_tilde.push_back(std::move(tu));
        rep.tail_v_tilde.push_back(std::move(tv));
        rep.tail_u.push_back(std::move(pu));
        rep.tail_v.push_back(std::move(pv));
        rep.total_mass.push_back(norm_l2_sq(s.u_tilde) + norm_l2_sq(s.v_tilde));
    }
    const auto& lu = rep.tail_u_tilde.back();
    const auto& lv = rep.tail_v_tilde.back();
    for (std::size_t j = 0; j < radii.size(); ++j) {
        if (lu[j] + lv[j] <= epsilon) {
            rep.r_hat_eps = radii[j];
            break;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Set distances and attractor approximation

/// sup_{a in A} inf_{b in B} ||a - b||.
inline double hausdorff_semidist(const std::vector<PhasePoint>& a, const std::vector<PhasePoint>& b) {
    if (a.empty() || b.empty()) throw InvalidArgument("Hausdorff semi-distance of an empty set");
    double sup = 0.0;
    for (const auto& x : a) {
        double inf = std::numeric_limits<double>::infinity();
        for (const auto& y : b) inf = std::min(inf, phase_distance(x, y));
        sup = std::max(sup, inf);
    }
    return sup;
}

inline double hausdorff_distance(const std::vector<PhasePoint>& a, const std::vector<PhasePoint>& b) {
    return std::max(hausdorff_semidist(a, b), hausdorff_semidist(b, a));
}

inline double set_diameter(const std::vector<PhasePoint>& a) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) d = std::max(d, phase_distance(a[i], a[j]));
    return d;
}

/// Greedy farthest-point selection: start from member 0, repeatedly add the
/// member farthest from the current representatives while that distance
/// exceeds tol.  Ties go to the lowest index.
inline std::vector<std::size_t> greedy_cluster(const std::vector<PhasePoint>& pts, double tol) {
    if (pts.empty()) throw InvalidArgument("cannot cluster an empty set");
    std::vector<std::size_t> reps{0};
    std::vector<double> dist(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) dist[i] = phase_distance(pts[i], pts[0]);
    for (;;) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (dist[i] > dist[far]) far = i;
        if (!(dist[far] > tol)) break;
        reps.push_back(far);
        for (std::size_t i = 0; i < pts.size(); ++i) dist[i] = std::min(dist[i], phase_distance(pts[i], pts[far]));
    }
    return reps;
}

struct AttractorApprox {
    double horizon = 0.0;                  // largest pullback horizon
    std::vector<double> horizons;
    std::vector<PhasePoint> members;       // cluster representatives at the largest horizon
    std::vector<std::size_t> member_indices;
    std::vector<std::size_t> cluster_counts;         // per horizon
    std::vector<double> successive_distances;        // Hausdorff distance between consecutive horizons
    double compactness_residual = 0.0;               // last successive distance
    double invariance_residual = 0.0;
    double attraction_residual = 0.0;
    double diameter = 0.0;
    double invariance_shift = 0.0;
};

struct AttractorOptions {
    double cluster_tol = 1e-3;
    double invariance_shift = 1.0;
    std::vector<PhasePoint> test_ball;  // fresh data for the attraction residual
    int workers = 1;
};

/// Clustered pullback images at increasing horizons; the representatives at
/// the largest horizon approximate A(omega).  Needs the path to cover
/// [-max horizon - OU window, invariance_shift].
inline AttractorApprox attractor_approximate(const ModelSpec& spec, const Nonlinearity& nl, const WienerPath& path,
                                             const std::vector<PhasePoint>& ensemble,
                                             const std::vector<double>& horizons, const SolveConfig& cfg,
                                             const AttractorOptions& opt) {
    if (ensemble.empty()) throw InvalidArgument("attractor ensemble is empty");
    if (horizons.empty() || !std::is_sorted(horizons.begin(), horizons.end()))
        throw InvalidArgument("attractor horizons must be nonempty and increasing");
    AttractorApprox out;
    out.horizons = horizons;
    out.horizon = horizons.back();
    out.invariance_shift = opt.invariance_shift;

    auto pull_all = [&](const WienerPath& w, double t, const std::vector<PhasePoint>& xs) {
        return parallel_map(xs.size(), opt.workers,
                            [&](std::size_t i) { return phi_pullback(t, w, xs[i], spec, nl, cfg); });
    };
    auto reps_of = [&](const std::vector<PhasePoint>& imgs, std::vector<std::size_t>* idx = nullptr) {
        const auto sel = greedy_cluster(imgs, opt.cluster_tol);
        if (idx) *idx = sel;
        std::vector<PhasePoint> r;
        for (auto i : sel) r.push_back(imgs[i]);
        return r;
    };

    std::vector<PhasePoint> prev;
    for (std::size_t j = 0; j < horizons.size(); ++j) {
        const auto imgs = pull_all(path, horizons[j], ensemble);
        std::vector<std::size_t> idx;
        auto reps = reps_of(imgs, &idx);
        out.cluster_counts.push_back(reps.size());
        if (!prev.empty()) out.successive_distances.push_back(hausdorff_distance(prev, reps));
        if (j + 1 == horizons.size()) {
            out.member_indices = idx;
            out.members = reps;
        }
        prev = std::move(reps);
    }
    out.compactness_residual = out.successive_distances.empty() ? 0.0 : out.successive_distances.back();
    out.diameter = set_diameter(out.members);

    if (opt.invariance_shift > 0.0) {
        std::vector<PhasePoint> forward = parallel_map(out.members.size(), opt.workers, [&](std::size_t i) {
            return phi(opt.invariance_shift, path, out.members[i], spec, nl, cfg);
        });
        const WienerPath shifted = theta_shift(path, opt.invariance_shift);
        const auto shifted_reps = reps_of(pull_all(shifted, out.horizon, ensemble));
        out.invariance_residual = hausdorff_semidist(forward, shifted_reps);
    }
    if (!opt.test_ball.empty())
        out.attraction_residual = hausdorff_semidist(pull_all(path, out.horizon, opt.test_ball), out.members);
    return out;
}

}  // namespace sfhn
