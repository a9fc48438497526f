#pragma once

// Pathwise time stepping of the transformed system
//
//   du~/dt + lambda u~ - Lap u~ + alpha v~ = f(x, u~ + z1) + g + Lap z1 - alpha z2
//   dv~/dt + delta v~ - beta u~            = h + beta z1
//
// with z_j(theta_t omega) = phi_j y_j(theta_t omega_j), re-assembly
// u = u~ + z1, v = v~ + z2, the cocycle Phi and the v~ = v~1 + v~2 split.

#include <sfhn/errors.hpp>
#include <sfhn/implicit.hpp>
#include <sfhn/model.hpp>
#include <sfhn/noise.hpp>
#include <sfhn/spatial.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sfhn {

enum class Scheme { imex_be, imex_cn };

inline std::string_view to_string(Scheme s) { return s == Scheme::imex_cn ? "imex-cn" : "imex-be"; }

inline Scheme parse_scheme(std::string_view s) {
    if (s == "imex-be") return Scheme::imex_be;
    if (s == "imex-cn") return Scheme::imex_cn;
    throw InvalidArgument("unknown scheme '" + std::string(s) + "'");
}

struct SolveConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::imex_be;
    int record_every = 1;
};

struct Provenance {
    std::uint64_t seed = 0;
    double origin_time = 0.0;  // path time at which the solve started
};

/// Transformed fields (u~, v~) at time t.
struct StatePair {
    Field u_tilde;
    Field v_tilde;
    double t = 0.0;
    Provenance provenance;
};

/// Physical fields (u, v).
struct PhasePoint {
    Field u;
    Field v;
};

struct SplitState {
    Field v1;
    Field v2;
    double t = 0.0;
};

/// Number of steps of size dt covering a duration; throws if misaligned.
inline std::int64_t step_count(double duration, double dt) {
    const auto n = detail::to_steps(duration, dt, "duration");
    if (n < 0) throw InvalidArgument("negative duration");
    return n;
}

/// dt and dt_path must be related by a power-of-two ratio.
inline void check_step_alignment(double dt, double dt_path) {
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    const double r = dt >= dt_path ? dt / dt_path : dt_path / dt;
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-9 * r) throw AlignmentError("dt and dt_path are not commensurate");
    const auto ki = static_cast<std::int64_t>(k);
    if ((ki & (ki - 1)) != 0) throw AlignmentError("dt / dt_path must be a power of two (or its inverse)");
}

/// y(theta_t omega) at the left end of each solver step t0 + k dt.  Values
/// between path nodes (dt < dt_path) are linear interpolants.
class OuClock {
  public:
    OuClock(const WienerPath& path, double rate, int component, double dt, double t0)
        : path_(path), rate_(rate), component_(component) {
        check_step_alignment(dt, path.dt_path());
        K_ = ou_window_steps(rate, path.dt_path());
        if (dt >= path.dt_path()) {
            coarse_path_ = false;
            ratio_ = static_cast<std::int64_t>(std::llround(dt / path.dt_path()));
            start_ = detail::to_steps(t0, path.dt_path(), "start time");
        } else {
            coarse_path_ = true;
            ratio_ = static_cast<std::int64_t>(std::llround(path.dt_path() / dt));
            start_ = detail::to_steps(t0, dt, "start time");
        }
    }

    double at_step(std::int64_t k) {
        if (!coarse_path_) return node_value(path_.origin() + start_ + k * ratio_);
        const std::int64_t tick = start_ + k;
        std::int64_t j = tick / ratio_;
        if (tick % ratio_ != 0 && tick < 0) --j;
        const std::int64_t rem = tick - j * ratio_;
        const double a = node_value(path_.origin() + j);
        if (rem == 0) return a;
        const double frac = static_cast<double>(rem) / static_cast<double>(ratio_);
        const double b = node_value(path_.origin() + j + 1);
        return (1.0 - frac) * a + frac * b;
    }

  private:
    double node_value(std::int64_t node) {
        if (have_[1] && node == cache_node_[1]) return cache_val_[1];
        if (have_[0] && node == cache_node_[0]) return cache_val_[0];
        if (!cursor_ || node < cursor_->node() || node - cursor_->node() >= K_) {
            cursor_ = std::make_unique<OuCursor>(path_, rate_, component_, node);
        } else {
            while (cursor_->node() < node) cursor_->advance();
        }
        cache_node_[0] = cache_node_[1];
        cache_val_[0] = cache_val_[1];
        have_[0] = have_[1];
        cache_node_[1] = node;
        cache_val_[1] = cursor_->value();
        have_[1] = true;
        return cache_val_[1];
    }

    WienerPath path_;
    double rate_;
    int component_;
    std::int64_t K_ = 0;
    bool coarse_path_ = false;
    std::int64_t ratio_ = 1;
    std::int64_t start_ = 0;
    std::unique_ptr<OuCursor> cursor_;
    std::int64_t cache_node_[2] = {0, 0};
    double cache_val_[2] = {0.0, 0.0};
    bool have_[2] = {false, false};
};

/// One-step IMEX integrator bound to a model and step size.  Owns its
/// factorization and scratch buffers; not shared between threads.
class Stepper {
  public:
    Stepper(const ModelSpec& spec, const Nonlinearity& nl, const SolveConfig& cfg)
        : spec_(spec), nl_(nl), cfg_(cfg), grid_(spec.grid()) {
        if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw InvalidArgument("dt must be positive");
        if (cfg.record_every < 1) throw InvalidArgument("record_every must be >= 1");
        const double dt = cfg.dt;
        const double lam = spec.lambda(), al = spec.alpha(), de = spec.delta(), be = spec.beta();
        if (cfg.scheme == Scheme::imex_be) {
            op_ = ImplicitOperator(grid_, 1.0 + dt * lam, dt);
            exp_delta_ = std::exp(-de * dt);
            phi_delta_ = -std::expm1(-de * dt) / de;
        } else {
            vden_ = 1.0 + 0.5 * dt * de;
            op_ = ImplicitOperator(grid_, 1.0 + 0.5 * dt * lam + 0.25 * dt * dt * al * be / vden_, 0.5 * dt);
        }
        lap_phi1_ = laplacian(spec.phi1());
        points_.resize(grid_.size());
        for (std::size_t i = 0; i < points_.size(); ++i) points_[i] = grid_.point(i);
        rhs_.resize(grid_.size());
        vnew_.resize(grid_.size());
        lap_.resize(grid_.size());
    }

    const SolveConfig& config() const noexcept { return cfg_; }
    const ModelSpec& spec() const noexcept { return spec_; }
    const Field& lap_phi1() const noexcept { return lap_phi1_; }

    /// Advances (u~, v~) from t to t + dt with noise z_j = y_j phi_j frozen
    /// at the left end point.
    void advance(std::span<double> u, std::span<double> v, double y1, double y2, double t) {
        const auto phi1 = spec_.phi1().values();
        const auto lphi1 = lap_phi1_.values();
        const auto phi2 = spec_.phi2().values();
        run(u, v, t, [&](std::size_t i) {
            return Noise{y1 * phi1[i], y1 * lphi1[i], y2 * phi2[i]};
        });
    }

    /// Same step with arbitrary noise fields.
    void advance_fields(std::span<double> u, std::span<double> v, std::span<const double> z1,
                        std::span<const double> lap_z1, std::span<const double> z2, double t) {
        run(u, v, t, [&](std::size_t i) { return Noise{z1[i], lap_z1[i], z2[i]}; });
    }

  private:
    struct Noise {
        double z1, lap_z1, z2;
    };

    template <class NoiseAt>
    void run(std::span<double> u, std::span<double> v, double t, NoiseAt&& noise) {
        std::visit([&](const auto& f) { run_with(f, u, v, t, noise); }, nl_);
    }

    template <class F, class NoiseAt>
    void run_with(const F& f, std::span<double> u, std::span<double> v, double t, NoiseAt& noise) {
        const double dt = cfg_.dt;
        const double al = spec_.alpha(), be = spec_.beta();
        const auto g = spec_.g().values();
        const auto h = spec_.h().values();
        const std::size_t n = u.size();
        double check = 0.0;
        if (cfg_.scheme == Scheme::imex_be) {
            for (std::size_t i = 0; i < n; ++i) {
                const Noise z = noise(i);
                const double forcing = f.eval(points_[i], u[i] + z.z1) + g[i] + z.lap_z1 - al * z.z2;
                rhs_[i] = u[i] + dt * (-al * v[i] + forcing);
                vnew_[i] = exp_delta_ * v[i] + phi_delta_ * (be * u[i] + h[i] + be * z.z1);
            }
            op_.solve(rhs_);
            for (std::size_t i = 0; i < n; ++i) {
                u[i] = rhs_[i];
                v[i] = vnew_[i];
                check += u[i] + v[i];
            }
        } else {
            const double lam = spec_.lambda(), de = spec_.delta();
            const double hdt = 0.5 * dt;
            laplacian_into(grid_, u, lap_);
            for (std::size_t i = 0; i < n; ++i) {
                const Noise z = noise(i);
                const double forcing = f.eval(points_[i], u[i] + z.z1) + g[i] + z.lap_z1 - al * z.z2;
                const double ru = u[i] + hdt * (lap_[i] - lam * u[i] - al * v[i]) + dt * forcing;
                const double rv = v[i] + hdt * (be * u[i] - de * v[i]) + dt * (h[i] + be * z.z1);
                rhs_[i] = ru - hdt * al * rv / vden_;
                vnew_[i] = rv;
            }
            op_.solve(rhs_);
            for (std::size_t i = 0; i < n; ++i) {
                u[i] = rhs_[i];
                v[i] = (vnew_[i] + hdt * be * u[i]) / vden_;
                check += u[i] + v[i];
            }
        }
        if (!std::isfinite(check))
            throw DivergenceError(t + dt, "non-finite state after step ending at t = " + std::to_string(t + dt) +
                                              " (dt = " + std::to_string(dt) + " may be too large)");
    }

    ModelSpec spec_;
    Nonlinearity nl_;
    SolveConfig cfg_;
    Grid grid_;
    ImplicitOperator op_;
    double exp_delta_ = 1.0, phi_delta_ = 0.0, vden_ = 1.0;
    Field lap_phi1_;
    std::vector<std::array<double, 2>> points_;
    std::vector<double> rhs_, vnew_, lap_;
};

/// One step with explicitly supplied noise fields z1, z2 at the step's left
/// end point.
inline StatePair step(const StatePair& state, const ModelSpec& spec, const Nonlinearity& nl, const Field& z1,
                      const Field& z2, const SolveConfig& cfg) {
    state.u_tilde.check_same(z1);
    state.u_tilde.check_same(z2);
    state.u_tilde.check_same(state.v_tilde);
    Stepper stepper(spec, nl, cfg);
    StatePair next = state;
    const Field lz1 = laplacian(z1);
    stepper.advance_fields(next.u_tilde.mutable_values(), next.v_tilde.mutable_values(), z1.values(),
                           lz1.values(), z2.values(), state.t);
    next.t = state.t + cfg.dt;
    return next;
}

/// Level view passed to observers: state and OU values at t = t_k.
struct LevelView {
    std::int64_t k;
    double t;
    std::span<const double> u_tilde;
    std::span<const double> v_tilde;
    double y1;
    double y2;
};

/// Integrates from initial.t to t_end along `path` (times relative to the
/// path's origin).  The observer sees every level k = 0..N, the last one
/// after the final step.
template <class Observer>
StatePair integrate(const StatePair& initial, const WienerPath& path, const ModelSpec& spec,
                    const Nonlinearity& nl, const SolveConfig& cfg, double t_end, Observer&& obs) {
    initial.u_tilde.check_same(initial.v_tilde);
    if (!(initial.u_tilde.grid() == spec.grid())) throw GridMismatch("state and model grids differ");
    check_step_alignment(cfg.dt, path.dt_path());
    const std::int64_t n_steps = step_count(t_end - initial.t, cfg.dt);
    Stepper stepper(spec, nl, cfg);
    OuClock c1(path, spec.lambda(), 0, cfg.dt, initial.t);
    OuClock c2(path, spec.delta(), 1, cfg.dt, initial.t);
    StatePair st = initial;
    auto u = st.u_tilde.mutable_values();
    auto v = st.v_tilde.mutable_values();
    for (std::int64_t k = 0; k <= n_steps; ++k) {
        const double t = initial.t + static_cast<double>(k) * cfg.dt;
        const double y1 = c1.at_step(k);
        const double y2 = c2.at_step(k);
        obs(LevelView{k, t, u, v, y1, y2});
        if (k == n_steps) break;
        stepper.advance(u, v, y1, y2, t);
    }
    st.t = initial.t + static_cast<double>(n_steps) * cfg.dt;
    return st;
}

template <class Observer>
StatePair integrate(const StatePair& initial, const WienerPath& path, const ModelSpec& spec,
                    const Nonlinearity& nl, const SolveConfig& cfg, double t_end, Observer& obs) {
    return integrate(initial, path, spec, nl, cfg, t_end, [&](const LevelView& lv) { obs(lv); });
}

struct Trajectory {
    std::vector<StatePair> states;
    std::vector<double> y1;  // OU values at the recorded times
    std::vector<double> y2;
};

inline Trajectory solve_forward(const StatePair& initial, const WienerPath& path, const ModelSpec& spec,
                                const Nonlinearity& nl, const SolveConfig& cfg, double t_end) {
    Trajectory tr;
    const std::int64_t n_steps = step_count(t_end - initial.t, cfg.dt);
    integrate(initial, path, spec, nl, cfg, t_end, [&](const LevelView& lv) {
        if (lv.k % cfg.record_every != 0 && lv.k != n_steps) return;
        StatePair s;
        s.u_tilde = Field(spec.grid(), std::vector<double>(lv.u_tilde.begin(), lv.u_tilde.end()));
        s.v_tilde = Field(spec.grid(), std::vector<double>(lv.v_tilde.begin(), lv.v_tilde.end()));
        s.t = lv.t;
        s.provenance = {path.seed(), path.shift_steps() * path.dt_path() + initial.t};
        tr.states.push_back(std::move(s));
        tr.y1.push_back(lv.y1);
        tr.y2.push_back(lv.y2);
    });
    return tr;
}

/// u = u~ + z1, v = v~ + z2.
inline PhasePoint assemble_uv(const StatePair& state, const Field& z1, const Field& z2) {
    return PhasePoint{state.u_tilde + z1, state.v_tilde + z2};
}

inline double weighted_energy(const ModelSpec& spec, std::span<const double> u, std::span<const double> v) {
    const double w = spec.grid().cell_volume();
    return spec.beta() * norm_l2_sq(u, w) + spec.alpha() * norm_l2_sq(v, w);
}

inline double weighted_energy(const ModelSpec& spec, const StatePair& s) {
    return weighted_energy(spec, s.u_tilde.values(), s.v_tilde.values());
}

/// OU values (y1, y2) of the path at time t (via the solver's clock).
inline std::pair<double, double> ou_pair_at(const WienerPath& path, const ModelSpec& spec, double dt, double t) {
    OuClock c1(path, spec.lambda(), 0, dt, t);
    OuClock c2(path, spec.delta(), 1, dt, t);
    return {c1.at_step(0), c2.at_step(0)};
}

namespace detail {
inline Field scaled(const Field& f, double a) { return a * f; }
}  // namespace detail

/// Phi(t, omega, (u0, v0)) with an optional observer of the transformed
/// levels.
template <class Observer>
PhasePoint phi_observed(double t, const WienerPath& path, const PhasePoint& x0, const ModelSpec& spec,
                        const Nonlinearity& nl, const SolveConfig& cfg, Observer&& obs) {
    x0.u.check_same(x0.v);
    if (t == 0.0) return x0;
    if (t < 0.0) throw InvalidArgument("phi needs t >= 0");
    double y1_end = 0.0, y2_end = 0.0;
    StatePair init;
    const auto n_steps = step_count(t, cfg.dt);
    {
        const auto [y1, y2] = ou_pair_at(path, spec, cfg.dt, 0.0);
        init.u_tilde = x0.u - detail::scaled(spec.phi1(), y1);
        init.v_tilde = x0.v - detail::scaled(spec.phi2(), y2);
    }
    init.t = 0.0;
    init.provenance = {path.seed(), path.shift_steps() * path.dt_path()};
    const StatePair fin = integrate(init, path, spec, nl, cfg, t, [&](const LevelView& lv) {
        if (lv.k == n_steps) {
            y1_end = lv.y1;
            y2_end = lv.y2;
        }
        obs(lv);
    });
    return assemble_uv(fin, detail::scaled(spec.phi1(), y1_end), detail::scaled(spec.phi2(), y2_end));
}

/// The cocycle Phi(t, omega, (u0, v0)).
inline PhasePoint phi(double t, const WienerPath& path, const PhasePoint& x0, const ModelSpec& spec,
                      const Nonlinearity& nl, const SolveConfig& cfg) {
    return phi_observed(t, path, x0, spec, nl, cfg, [](const LevelView&) {});
}

/// Phi(t, theta_{-t} omega, (u0, v0)): the present-time state of a solve
/// started t time units in the past.
inline PhasePoint phi_pullback(double t, const WienerPath& path, const PhasePoint& x0, const ModelSpec& spec,
                               const Nonlinearity& nl, const SolveConfig& cfg) {
    if (t == 0.0) return x0;
    return phi(t, theta_shift(path, -t), x0, spec, nl, cfg);
}

// ---------------------------------------------------------------------------
// v~ = v~1 + v~2 splitting
//
//   dv1/dt + delta v1 = 0,                       v1(0) = v~0
//   dv2/dt + delta v2 = beta u~ + h + beta z1,   v2(0) = 0

/// Co-evolves v~2 with a running solve.  Feed it every level in order;
/// after level k, v2() holds v~2(t_k).
class SplitTracker {
  public:
    SplitTracker(const ModelSpec& spec, double dt)
        : spec_(spec), v2_(spec.grid()), exp_delta_(std::exp(-spec.delta() * dt)),
          phi_delta_(-std::expm1(-spec.delta() * dt) / spec.delta()) {}

    void operator()(const LevelView& lv) {
        if (lv.k != next_k_) throw AlignmentError("split tracker missed a solver level");
        if (lv.k > 0) {
            const auto h = spec_.h().values();
            const auto phi1 = spec_.phi1().values();
            const double be = spec_.beta();
            auto v2 = v2_.mutable_values();
            for (std::size_t i = 0; i < v2.size(); ++i)
                v2[i] = exp_delta_ * v2[i] + phi_delta_ * (be * prev_u_[i] + h[i] + be * prev_y1_ * phi1[i]);
        }
        prev_u_.assign(lv.u_tilde.begin(), lv.u_tilde.end());
        prev_y1_ = lv.y1;
        last_t_ = lv.t;
        ++next_k_;
    }

    const Field& v2() const noexcept { return v2_; }
    double t() const noexcept { return last_t_; }

  private:
    ModelSpec spec_;
    Field v2_;
    double exp_delta_, phi_delta_;
    std::int64_t next_k_ = 0;
    double last_t_ = 0.0;
    std::vector<double> prev_u_;
    double prev_y1_ = 0.0;
};

/// Split solution along a recorded trajectory (record_every = 1).  v1 is
/// the closed form e^{-delta t} v~0; v2 uses the exponential integrator with
/// left-point sources.
inline std::vector<SplitState> solve_split(const Field& v_tilde_0, const Trajectory& u_trajectory,
                                           const ModelSpec& spec, const SolveConfig& cfg, double t_end) {
    const auto n_steps = step_count(t_end, cfg.dt);
    if (u_trajectory.states.size() < static_cast<std::size_t>(n_steps) + 1)
        throw AlignmentError("trajectory does not cover the split horizon at every step");
    for (std::int64_t k = 0; k <= n_steps; ++k) {
        const double expect = static_cast<double>(k) * cfg.dt;
        if (std::abs(u_trajectory.states[static_cast<std::size_t>(k)].t - expect) > 1e-9 * std::max(1.0, expect))
            throw AlignmentError("trajectory must be recorded at every step from t = 0");
    }
    std::vector<SplitState> out;
    out.reserve(static_cast<std::size_t>(n_steps) + 1);
    const double de = spec.delta(), be = spec.beta();
    const double e = std::exp(-de * cfg.dt);
    const double c = -std::expm1(-de * cfg.dt) / de;
    const auto h = spec.h().values();
    const auto phi1 = spec.phi1().values();
    Field v2(spec.grid());
    for (std::int64_t k = 0; k <= n_steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        out.push_back(SplitState{std::exp(-de * t) * v_tilde_0, v2, t});
        if (k == n_steps) break;
        const auto& s = u_trajectory.states[static_cast<std::size_t>(k)];
        const double y1 = u_trajectory.y1[static_cast<std::size_t>(k)];
        auto w = v2.mutable_values();
        const auto u = s.u_tilde.values();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = e * w[i] + c * (be * u[i] + h[i] + be * y1 * phi1[i]);
    }
    return out;
}

}  // namespace sfhn
