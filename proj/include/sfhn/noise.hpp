#pragma once

// Two-sided Brownian sample paths, the Wiener shift, stationary
// Ornstein-Uhlenbeck functionals of the path and a tempered-radius estimate.

#include <sfhn/errors.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sfhn {

namespace detail {

// Converts a time to an integer number of grid steps; throws if misaligned.
inline std::int64_t to_steps(double t, double dt, const char* what) {
    const double q = t / dt;
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(q)))
        throw AlignmentError(std::string(what) + " = " + std::to_string(t) +
                             " is not a multiple of " + std::to_string(dt));
    return static_cast<std::int64_t>(r);
}

}  // namespace detail

/// Pair of two-sided Brownian paths (w1, w2) on a uniform grid, piecewise
/// linear between grid times.  Storage is immutable and shared between
/// shifted views; a view only moves the time origin.
class WienerPath {
  public:
    struct Storage {
        std::uint64_t seed = 0;
        double dt = 1.0;
        std::int64_t left = 0;   // number of intervals left of the generation origin
        std::vector<double> inc[2];
        std::vector<double> prefix[2];  // node values, prefix[c][left] == 0
    };

    WienerPath() = default;

    /// Seeded Gaussian increments.  Intervals right and left of the origin
    /// come from separate streams that walk outward from t = 0, so widening
    /// the window never changes already generated increments.
    static WienerPath generate(std::uint64_t seed, double dt_path, double t_minus, double t_plus) {
        if (!(dt_path > 0.0) || !std::isfinite(dt_path)) throw InvalidArgument("dt_path must be positive");
        if (!(t_minus >= 0.0) || !(t_plus >= 0.0)) throw InvalidArgument("window bounds must be nonnegative");
        const auto left = static_cast<std::int64_t>(std::ceil(t_minus / dt_path - 1e-9));
        const auto right = static_cast<std::int64_t>(std::ceil(t_plus / dt_path - 1e-9));
        auto s = std::make_shared<Storage>();
        s->seed = seed;
        s->dt = dt_path;
        s->left = left;
        const double sd = std::sqrt(dt_path);
        for (int c = 0; c < 2; ++c) {
            auto& inc = s->inc[c];
            inc.assign(static_cast<std::size_t>(left + right), 0.0);
            std::seed_seq fwd_seq{seed, std::uint64_t(c), std::uint64_t(0)};
            std::seed_seq bwd_seq{seed, std::uint64_t(c), std::uint64_t(1)};
            std::mt19937_64 fwd(fwd_seq), bwd(bwd_seq);
            std::normal_distribution<double> normal(0.0, sd);
            for (std::int64_t i = 0; i < right; ++i) inc[static_cast<std::size_t>(left + i)] = normal(fwd);
            normal.reset();
            for (std::int64_t i = 0; i < left; ++i) inc[static_cast<std::size_t>(left - 1 - i)] = normal(bwd);
        }
        return WienerPath(finish(std::move(s)), left);
    }

    /// Path built from explicit increments; `left` of them lie left of t = 0.
    static WienerPath from_increments(double dt_path, std::int64_t left, std::vector<double> inc1,
                                      std::vector<double> inc2, std::uint64_t seed = 0) {
        if (!(dt_path > 0.0)) throw InvalidArgument("dt_path must be positive");
        if (inc1.size() != inc2.size()) throw InvalidArgument("increment arrays differ in length");
        if (left < 0 || left > static_cast<std::int64_t>(inc1.size()))
            throw InvalidArgument("origin outside increment range");
        auto s = std::make_shared<Storage>();
        s->seed = seed;
        s->dt = dt_path;
        s->left = left;
        s->inc[0] = std::move(inc1);
        s->inc[1] = std::move(inc2);
        return WienerPath(finish(std::move(s)), left);
    }

    static WienerPath zero(double dt_path, double t_minus, double t_plus) {
        const auto left = static_cast<std::int64_t>(std::ceil(t_minus / dt_path - 1e-9));
        const auto right = static_cast<std::int64_t>(std::ceil(t_plus / dt_path - 1e-9));
        std::vector<double> z(static_cast<std::size_t>(left + right), 0.0);
        return from_increments(dt_path, left, z, z);
    }

    std::uint64_t seed() const noexcept { return s_->seed; }
    double dt_path() const noexcept { return s_->dt; }
    double t_minus() const noexcept { return static_cast<double>(origin_) * s_->dt; }
    double t_plus() const noexcept { return static_cast<double>(intervals() - origin_) * s_->dt; }

    /// Shift of this view relative to the generation origin, in steps.
    std::int64_t shift_steps() const noexcept { return origin_ - s_->left; }

    std::span<const double> increments(int component) const { return s_->inc[check_component(component)]; }

    /// Node index (into storage) of the view's time zero.
    std::int64_t origin() const noexcept { return origin_; }
    std::int64_t intervals() const noexcept { return static_cast<std::int64_t>(s_->inc[0].size()); }

    /// Raw storage node value; path values are differences of these.
    double node(int component, std::int64_t storage_index) const {
        return s_->prefix[component][static_cast<std::size_t>(storage_index)];
    }

    /// omega(t) for both components.  Exact at grid times, linear between.
    std::array<double, 2> value(double t) const {
        const double eps = 1e-12 * std::max(1.0, std::abs(t));
        if (t < -t_minus() - eps || t > t_plus() + eps)
            throw OutOfWindow("t = " + std::to_string(t) + " outside stored window [" +
                              std::to_string(-t_minus()) + ", " + std::to_string(t_plus()) + "]");
        const double q = t / s_->dt;
        auto k = static_cast<std::int64_t>(std::floor(q));
        double frac = q - static_cast<double>(k);
        if (frac < 1e-12) frac = 0.0;
        if (frac > 1.0 - 1e-12) {
            frac = 0.0;
            ++k;
        }
        std::int64_t idx = origin_ + k;
        if (idx >= intervals()) {  // right end
            idx = intervals();
            frac = 0.0;
        }
        if (idx < 0) {
            idx = 0;
            frac = 0.0;
        }
        std::array<double, 2> out{};
        for (int c = 0; c < 2; ++c) {
            const double a = s_->prefix[c][static_cast<std::size_t>(idx)];
            const double v =
                frac == 0.0 ? a : (1.0 - frac) * a + frac * s_->prefix[c][static_cast<std::size_t>(idx + 1)];
            out[c] = v - s_->prefix[c][static_cast<std::size_t>(origin_)];
        }
        return out;
    }

    /// theta_s: (theta_s omega)(tau) = omega(tau + s) - omega(s).
    WienerPath shifted(double s) const {
        const auto k = detail::to_steps(s, s_->dt, "shift");
        const auto o = origin_ + k;
        if (o < 0 || o > intervals())
            throw OutOfWindow("shift " + std::to_string(s) + " leaves the stored window");
        return WienerPath(s_, o);
    }

    bool shares_storage_with(const WienerPath& o) const noexcept { return s_ == o.s_; }

    friend bool operator==(const WienerPath& a, const WienerPath& b) noexcept {
        return a.s_ == b.s_ && a.origin_ == b.origin_;
    }

  private:
    WienerPath(std::shared_ptr<const Storage> s, std::int64_t origin) : s_(std::move(s)), origin_(origin) {}

    static std::shared_ptr<const Storage> finish(std::shared_ptr<Storage> s) {
        const auto n = s->inc[0].size();
        const auto left = static_cast<std::size_t>(s->left);
        for (int c = 0; c < 2; ++c) {
            auto& p = s->prefix[c];
            p.assign(n + 1, 0.0);
            for (std::size_t i = left; i < n; ++i) p[i + 1] = p[i] + s->inc[c][i];
            for (std::size_t i = left; i > 0; --i) p[i - 1] = p[i] - s->inc[c][i - 1];
        }
        return s;
    }

    static int check_component(int c) {
        if (c != 0 && c != 1) throw InvalidArgument("path component must be 0 or 1");
        return c;
    }

    std::shared_ptr<const Storage> s_ = std::make_shared<Storage>();
    std::int64_t origin_ = 0;
};

inline WienerPath generate_path(std::uint64_t seed, double dt_path, double t_minus, double t_plus) {
    return WienerPath::generate(seed, dt_path, t_minus, t_plus);
}

inline std::array<double, 2> path_value(const WienerPath& path, double t) { return path.value(t); }

inline WienerPath theta_shift(const WienerPath& path, double s) { return path.shifted(s); }

// ---------------------------------------------------------------------------
// Stationary Ornstein-Uhlenbeck values
//
//   y(theta_t omega) = -rate * int_{-T}^{0} e^{rate tau} (omega(t+tau) - omega(t)) dtau
//
// with the trapezoidal rule on the path grid and T = K * dt_path chosen so
// that e^{-rate T} <= 1e-8.

inline constexpr double kOuTruncationTolerance = 1e-8;

/// Number of path steps in the quadrature window.
inline std::int64_t ou_window_steps(double rate, double dt_path) {
    if (!(rate > 0.0)) throw InvalidArgument("OU rate must be positive");
    return static_cast<std::int64_t>(std::ceil(-std::log(kOuTruncationTolerance) / (rate * dt_path)));
}

inline double ou_truncation_horizon(double rate, double dt_path) {
    return static_cast<double>(ou_window_steps(rate, dt_path)) * dt_path;
}

/// Direct trapezoidal quadrature at storage node m; the reference form.
inline double ou_direct_at_node(const WienerPath& path, double rate, int component, std::int64_t m) {
    const double dt = path.dt_path();
    const auto K = ou_window_steps(rate, dt);
    if (m - K < 0 || m > path.intervals())
        throw OutOfWindow("OU quadrature window exceeds the stored path");
    const double pm = path.node(component, m);
    double s = 0.0;
    for (std::int64_t k = 1; k <= K; ++k) {
        const double w = (k == K) ? 0.5 : 1.0;
        s += w * std::exp(-rate * dt * static_cast<double>(k)) * (path.node(component, m - k) - pm);
    }
    return -rate * dt * s;
}

/// Walks the OU value along consecutive path-grid nodes with an exact
/// sliding-window recursion of the trapezoidal sum.  Starts from a direct
/// quadrature.
class OuCursor {
  public:
    OuCursor(const WienerPath& path, double rate, int component, std::int64_t start_node)
        : path_(path), rate_(rate), component_(component), node_(start_node) {
        const double dt = path.dt_path();
        K_ = ou_window_steps(rate, dt);
        q_ = std::exp(-rate * dt);
        qK_ = std::exp(-rate * dt * static_cast<double>(K_));
        qK1_ = std::exp(-rate * dt * static_cast<double>(K_ + 1));
        // sum_{k=0}^{K} q^k
        sum_q_ = -std::expm1(-rate * dt * static_cast<double>(K_ + 1)) / -std::expm1(-rate * dt);
        if (node_ - K_ < 0 || node_ > path.intervals())
            throw OutOfWindow("OU quadrature window exceeds the stored path");
        // G_m = sum_{k=1}^{K} q^k (P_{m-k} - P_m)
        const double pm = path.node(component, node_);
        double g = 0.0;
        for (std::int64_t k = 1; k <= K_; ++k)
            g += std::exp(-rate * dt * static_cast<double>(k)) * (path.node(component, node_ - k) - pm);
        g_ = g;
    }

    std::int64_t node() const noexcept { return node_; }

    double value() const {
        const double pm = path_.node(component_, node_);
        return -rate_ * path_.dt_path() * (g_ - 0.5 * qK_ * (path_.node(component_, node_ - K_) - pm));
    }

    void advance() {
        if (node_ + 1 > path_.intervals()) throw OutOfWindow("OU cursor ran past the stored path");
        const double pm = path_.node(component_, node_);
        const double pm1 = path_.node(component_, node_ + 1);
        const double back = path_.node(component_, node_ - K_);
        g_ = q_ * g_ - q_ * sum_q_ * (pm1 - pm) - qK1_ * (back - pm1);
        ++node_;
    }

  private:
    WienerPath path_;
    double rate_;
    int component_;
    std::int64_t node_;
    std::int64_t K_ = 0;
    double q_ = 0.0, qK_ = 0.0, qK1_ = 0.0, sum_q_ = 0.0;
    double g_ = 0.0;
};

struct OuEvaluation {
    std::vector<double> values;
    double trunc_horizon = 0.0;
    /// e^{-rate T} * (max - min of the path over the quadrature windows).
    double trunc_error_bound = 0.0;
};

/// y_c(theta_t omega) for each t in t_grid (times relative to the view's
/// origin, aligned to dt_path).  Consecutive grid nodes use the recursion.
inline OuEvaluation ou_evaluate(const WienerPath& path, double rate, int component,
                                std::span<const double> t_grid) {
    if (component != 0 && component != 1) throw InvalidArgument("OU component must be 0 or 1");
    const double dt = path.dt_path();
    const auto K = ou_window_steps(rate, dt);
    OuEvaluation out;
    out.trunc_horizon = static_cast<double>(K) * dt;
    out.values.reserve(t_grid.size());
    if (t_grid.empty()) return out;

    std::vector<std::int64_t> nodes;
    nodes.reserve(t_grid.size());
    std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = std::numeric_limits<std::int64_t>::min();
    for (double t : t_grid) {
        const auto m = path.origin() + detail::to_steps(t, dt, "OU time");
        if (m - K < 0 || m > path.intervals())
            throw OutOfWindow("OU quadrature at t = " + std::to_string(t) + " needs path data outside the window");
        nodes.push_back(m);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
    }

    std::unique_ptr<OuCursor> cursor;
    for (auto m : nodes) {
        if (cursor && m >= cursor->node() && m - cursor->node() < K) {
            while (cursor->node() < m) cursor->advance();
        } else {
            cursor = std::make_unique<OuCursor>(path, rate, component, m);
        }
        out.values.push_back(cursor->value());
    }

    double pmin = path.node(component, lo - K), pmax = pmin;
    for (auto i = lo - K; i <= hi; ++i) {
        pmin = std::min(pmin, path.node(component, i));
        pmax = std::max(pmax, path.node(component, i));
    }
    out.trunc_error_bound = std::exp(-rate * out.trunc_horizon) * (pmax - pmin);
    return out;
}

/// OU values of both components on a common grid, plus the tempered-radius
/// estimate for the recorded exponent p.
struct OuTrace {
    double lambda_rate = 1.0;
    double delta_rate = 1.0;
    std::vector<double> t_grid;
    std::vector<double> y1, y2;
    double p = 2.0;
    double r_hat = 0.0;
    double trunc_horizon = 0.0;
};

/// r_hat = max_t e^{-(eta/2)|t|} sum_j (|y_j|^2 + |y_j|^p).
inline double tempered_radius(const OuTrace& trace, double p, double eta) {
    if (trace.t_grid.empty()) throw InvalidArgument("tempered radius of an empty trace");
    if (trace.y1.size() != trace.t_grid.size() || trace.y2.size() != trace.t_grid.size())
        throw InvalidArgument("trace arrays differ in length");
    if (!(p >= 2.0)) throw InvalidArgument("tempered radius needs p >= 2");
    if (!(eta > 0.0)) throw InvalidArgument("tempered radius needs eta > 0");
    double r = 0.0;
    for (std::size_t i = 0; i < trace.t_grid.size(); ++i) {
        double s = 0.0;
        for (double y : {trace.y1[i], trace.y2[i]}) {
            const double a = std::abs(y);
            s += a * a + std::pow(a, p);
        }
        r = std::max(r, std::exp(-0.5 * eta * std::abs(trace.t_grid[i])) * s);
    }
    return r;
}

/// Builds the trace over t_grid with rates (lambda, delta) for (w1, w2).
inline OuTrace make_ou_trace(const WienerPath& path, double lambda, double delta,
                             std::vector<double> t_grid, double p, double eta) {
    OuTrace tr;
    tr.lambda_rate = lambda;
    tr.delta_rate = delta;
    auto e1 = ou_evaluate(path, lambda, 0, t_grid);
    auto e2 = ou_evaluate(path, delta, 1, t_grid);
    tr.y1 = std::move(e1.values);
    tr.y2 = std::move(e2.values);
    tr.t_grid = std::move(t_grid);
    tr.trunc_horizon = std::max(e1.trunc_horizon, e2.trunc_horizon);
    tr.p = p;
    if (!tr.t_grid.empty()) tr.r_hat = tempered_radius(tr, p, eta);
    return tr;
}

/// Uniform symmetric grid {-t_half, ..., t_half} with spacing step.
inline std::vector<double> symmetric_time_grid(double t_half, double step) {
    const auto k = detail::to_steps(t_half, step, "half window");
    std::vector<double> g;
    g.reserve(static_cast<std::size_t>(2 * k + 1));
    for (std::int64_t i = -k; i <= k; ++i) g.push_back(static_cast<double>(i) * step);
    return g;
}

}  // namespace sfhn
