#pragma once

// Truncated spatial domain [-L, L]^dim, grid functions, finite-difference
// operators, quadrature norms and the smooth cut-off used for tail masses.

#include <sfhn/errors.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sfhn {

enum class Boundary { dirichlet_zero, periodic };

inline std::string_view to_string(Boundary b) {
    return b == Boundary::periodic ? "periodic" : "dirichlet-zero";
}

inline Boundary parse_boundary(std::string_view s) {
    if (s == "dirichlet-zero" || s == "dirichlet") return Boundary::dirichlet_zero;
    if (s == "periodic") return Boundary::periodic;
    throw InvalidArgument("unknown boundary '" + std::string(s) + "'");
}

/// Uniform grid on [-L, L]^dim with n nodes per axis at x_i = -L + i*h,
/// h = 2L/n.  Under dirichlet-zero the nodes with any index 0 sit on the
/// boundary x = -L and are pinned to zero; the ghost node at x = +L is zero.
/// Under periodic boundaries node n wraps to node 0.
class Grid {
  public:
    Grid() = default;

    Grid(int dim, double half_length, int n, Boundary boundary = Boundary::dirichlet_zero)
        : dim_(dim), half_length_(half_length), n_(n), boundary_(boundary) {
        if (dim != 1 && dim != 2) throw InvalidArgument("grid dim must be 1 or 2");
        if (!(half_length > 0) || !std::isfinite(half_length))
            throw InvalidArgument("grid half length must be positive");
        if (n < 3) throw InvalidArgument("grid needs at least 3 points per axis");
    }

    int dim() const noexcept { return dim_; }
    double half_length() const noexcept { return half_length_; }
    int points_per_axis() const noexcept { return n_; }
    Boundary boundary() const noexcept { return boundary_; }
    double spacing() const noexcept { return 2.0 * half_length_ / n_; }

    /// Quadrature weight h^dim.
    double cell_volume() const noexcept {
        const double h = spacing();
        return dim_ == 1 ? h : h * h;
    }

    std::size_t size() const noexcept {
        const auto n = static_cast<std::size_t>(n_);
        return dim_ == 1 ? n : n * n;
    }

    double axis_coord(int i) const noexcept { return -half_length_ + i * spacing(); }

    /// Row-major: flat = i0 * n + i1 in 2D.
    std::array<double, 2> point(std::size_t flat) const noexcept {
        if (dim_ == 1) return {axis_coord(static_cast<int>(flat)), 0.0};
        const auto n = static_cast<std::size_t>(n_);
        return {axis_coord(static_cast<int>(flat / n)), axis_coord(static_cast<int>(flat % n))};
    }

    double radius_sq(std::size_t flat) const noexcept {
        const auto p = point(flat);
        return p[0] * p[0] + p[1] * p[1];
    }

    bool is_pinned(std::size_t flat) const noexcept {
        if (boundary_ != Boundary::dirichlet_zero) return false;
        if (dim_ == 1) return flat == 0;
        const auto n = static_cast<std::size_t>(n_);
        return flat / n == 0 || flat % n == 0;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

  private:
    int dim_ = 1;
    double half_length_ = 1.0;
    int n_ = 3;
    Boundary boundary_ = Boundary::dirichlet_zero;
};

/// A grid function.  Values are always finite.
class Field {
  public:
    Field() = default;

    explicit Field(const Grid& grid) : grid_(grid), values_(grid.size(), 0.0) {}

    Field(const Grid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw InvalidArgument("field length " + std::to_string(values_.size()) +
                                  " does not match grid size " + std::to_string(grid_.size()));
        require_finite();
    }

    /// Samples fn at the nodes; Dirichlet-pinned nodes are set to zero.
    static Field from_function(const Grid& grid,
                               const std::function<double(double, double)>& fn) {
        std::vector<double> v(grid.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto p = grid.point(i);
            v[i] = grid.is_pinned(i) ? 0.0 : fn(p[0], p[1]);
        }
        return Field(grid, std::move(v));
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> mutable_values() noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    void require_finite() const {
        for (double x : values_)
            if (!std::isfinite(x)) throw InvalidArgument("field contains non-finite values");
    }

    Field& operator+=(const Field& o) {
        check_same(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_same(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    Field& operator*=(double a) {
        for (double& x : values_) x *= a;
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double a, Field f) { return f *= a; }

    void check_same(const Field& o) const {
        if (!(grid_ == o.grid_)) throw GridMismatch("fields live on different grids");
    }

  private:
    Grid grid_;
    std::vector<double> values_;
};

namespace detail {

// Value seen by difference stencils: pinned nodes and the dirichlet ghost
// node read as zero.
inline double stencil_value(const Grid& g, std::span<const double> f, int i0, int i1) {
    const int n = g.points_per_axis();
    if (g.boundary() == Boundary::periodic) {
        i0 = (i0 % n + n) % n;
        i1 = (i1 % n + n) % n;
    } else if (i0 <= 0 || i0 >= n || (g.dim() == 2 && (i1 <= 0 || i1 >= n))) {
        return 0.0;
    }
    return g.dim() == 1 ? f[static_cast<std::size_t>(i0)]
                        : f[static_cast<std::size_t>(i0) * n + static_cast<std::size_t>(i1)];
}

}  // namespace detail

/// Second-order central Laplacian (3-point in 1D, 5-point in 2D).  Output
/// at dirichlet-pinned nodes is zero.
inline void laplacian_into(const Grid& g, std::span<const double> f, std::span<double> out) {
    const int n = g.points_per_axis();
    const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
    if (g.dim() == 1) {
        for (int i = 0; i < n; ++i) {
            if (g.is_pinned(static_cast<std::size_t>(i))) {
                out[i] = 0.0;
                continue;
            }
            const double l = detail::stencil_value(g, f, i - 1, 0);
            const double r = detail::stencil_value(g, f, i + 1, 0);
            out[i] = (l - 2.0 * f[i] + r) * inv_h2;
        }
        return;
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * n + j;
            if (g.is_pinned(k)) {
                out[k] = 0.0;
                continue;
            }
            const double s = detail::stencil_value(g, f, i - 1, j) +
                             detail::stencil_value(g, f, i + 1, j) +
                             detail::stencil_value(g, f, i, j - 1) +
                             detail::stencil_value(g, f, i, j + 1);
            out[k] = (s - 4.0 * f[k]) * inv_h2;
        }
    }
}

inline Field laplacian(const Field& f) {
    Field out(f.grid());
    laplacian_into(f.grid(), f.values(), out.mutable_values());
    return out;
}

inline double inner_product(const Field& a, const Field& b) {
    a.check_same(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return a.grid().cell_volume() * s;
}

inline double norm_l2_sq(std::span<const double> f, double cell_volume) {
    double s = 0.0;
    for (double x : f) s += x * x;
    return cell_volume * s;
}

inline double norm_l2_sq(const Field& f) { return norm_l2_sq(f.values(), f.grid().cell_volume()); }
inline double norm_l2(const Field& f) { return std::sqrt(norm_l2_sq(f)); }

namespace detail {
// Small integer powers multiply left to right so that, e.g., |s|^4 rounds
// exactly like (-s*s*s)*s.
inline double abs_pow(double x, double p) {
    const double a = std::abs(x);
    if (p >= 1.0 && p <= 8.0 && p == std::floor(p)) {
        double r = a;
        for (int k = 1; k < static_cast<int>(p); ++k) r *= a;
        return r;
    }
    return std::pow(a, p);
}
}  // namespace detail

/// h^dim * sum |f_i|^p, i.e. ||f||_p^p.
inline double lp_power(std::span<const double> f, double p, double cell_volume) {
    if (!(p >= 1.0)) throw InvalidArgument("Lp exponent must be >= 1");
    double s = 0.0;
    for (double x : f) s += detail::abs_pow(x, p);
    return cell_volume * s;
}

inline double lp_power(const Field& f, double p) {
    return lp_power(f.values(), p, f.grid().cell_volume());
}

inline double norm_lp(const Field& f, double p) { return std::pow(lp_power(f, p), 1.0 / p); }

/// ||grad f||_2^2 with forward differences over every face, ghost and pinned
/// values read as zero.  Matches (-laplacian f, f) exactly up to round-off.
inline double gradient_energy(const Grid& g, std::span<const double> f) {
    const int n = g.points_per_axis();
    const double h = g.spacing();
    // periodic: faces (i, i+1 mod n); dirichlet: faces (i, i+1) for i = 0..n-1
    double s = 0.0;
    if (g.dim() == 1) {
        for (int i = 0; i < n; ++i) {
            const double d = detail::stencil_value(g, f, i + 1, 0) - detail::stencil_value(g, f, i, 0);
            s += d * d;
        }
        return s / h;  // h * sum (d/h)^2
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double c = detail::stencil_value(g, f, i, j);
            const double dx = detail::stencil_value(g, f, i + 1, j) - c;
            const double dy = detail::stencil_value(g, f, i, j + 1) - c;
            s += dx * dx + dy * dy;
        }
    }
    return s;  // h^2 * sum (d/h)^2
}

inline double gradient_energy(const Field& f) { return gradient_energy(f.grid(), f.values()); }

inline double norm_h1(const Field& f) { return std::sqrt(norm_l2_sq(f) + gradient_energy(f)); }

/// Cut-off: 0 on [0, 1], 1 on [2, inf), quintic smoothstep in between.
/// C^2 with |rho'| <= 15/8.
inline double cutoff_rho(double s) {
    if (!(s >= 0.0)) throw InvalidArgument("cutoff argument must be nonnegative");
    if (s <= 1.0) return 0.0;
    if (s >= 2.0) return 1.0;
    const double t = s - 1.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

inline double cutoff_rho_derivative(double s) {
    if (!(s >= 0.0)) throw InvalidArgument("cutoff argument must be nonnegative");
    if (s <= 1.0 || s >= 2.0) return 0.0;
    const double t = s - 1.0;
    return 30.0 * t * t * (1.0 - t) * (1.0 - t);
}

/// h^dim * sum rho(|x_i|^2 / k^2) f_i^2.
inline double tail_mass(const Grid& g, std::span<const double> f, double k) {
    if (!(k > 0.0)) throw InvalidArgument("tail radius must be positive");
    const double inv_k2 = 1.0 / (k * k);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double w = cutoff_rho(g.radius_sq(i) * inv_k2);
        if (w != 0.0) s += w * f[i] * f[i];
    }
    return g.cell_volume() * s;
}

inline double tail_mass(const Field& f, double k) { return tail_mass(f.grid(), f.values(), k); }

}  // namespace sfhn
