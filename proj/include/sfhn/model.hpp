#pragma once

// Model parameters, forcing/noise-shape fields and the reaction term f(x, s)
// with sampling-based certificates for the dissipativity conditions.

#include <sfhn/errors.hpp>
#include <sfhn/spatial.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace sfhn {

// ---------------------------------------------------------------------------
// Analytic field shapes

struct Shape {
    enum class Kind { zero, constant, gaussian, sine };
    Kind kind = Kind::zero;
    double amplitude = 0.0;
    double width = 1.0;
    std::array<double, 2> center{0.0, 0.0};

    static Shape zero() { return {}; }
    static Shape constant(double a) { return {Kind::constant, a, 1.0, {0.0, 0.0}}; }
    static Shape gaussian(double a, double width, std::array<double, 2> c = {0.0, 0.0}) {
        return {Kind::gaussian, a, width, c};
    }
    /// a * sin(pi x / L) (1D) or a * sin(pi x / L) sin(pi y / L) (2D).
    static Shape sine(double a) { return {Kind::sine, a, 1.0, {0.0, 0.0}}; }

    Field on(const Grid& g) const {
        const double L = g.half_length();
        const int dim = g.dim();
        return Field::from_function(g, [&](double x, double y) {
            switch (kind) {
                case Kind::zero: return 0.0;
                case Kind::constant: return amplitude;
                case Kind::gaussian: {
                    const double dx = x - center[0];
                    const double dy = dim == 2 ? y - center[1] : 0.0;
                    return amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
                }
                case Kind::sine: {
                    const double sx = std::sin(M_PI * x / L);
                    return amplitude * (dim == 2 ? sx * std::sin(M_PI * y / L) : sx);
                }
            }
            return 0.0;
        });
    }
};

inline std::string_view to_string(Shape::Kind k) {
    switch (k) {
        case Shape::Kind::zero: return "zero";
        case Shape::Kind::constant: return "constant";
        case Shape::Kind::gaussian: return "gaussian";
        case Shape::Kind::sine: return "sine";
    }
    return "zero";
}

inline Shape::Kind parse_shape_kind(std::string_view s) {
    if (s == "zero") return Shape::Kind::zero;
    if (s == "constant") return Shape::Kind::constant;
    if (s == "gaussian") return Shape::Kind::gaussian;
    if (s == "sine") return Shape::Kind::sine;
    throw InvalidArgument("unknown field shape '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Reaction term

/// f(x, s) = -s^3.
struct Cubic {
    double eval(const std::array<double, 2>&, double s) const { return -s * s * s; }
    double ds(const std::array<double, 2>&, double s) const { return -3.0 * s * s; }
    std::array<double, 2> dx(const std::array<double, 2>&, double) const { return {0.0, 0.0}; }
};

/// f(x, s) = -s^3 + kappa b(x) s, b(x) = exp(-|x - c|^2 / (2 w^2)).
struct CubicWithBump {
    double kappa = 1.0;
    double width = 1.0;
    std::array<double, 2> center{0.0, 0.0};
    int dim = 1;

    double bump(const std::array<double, 2>& x) const {
        const double dx = x[0] - center[0];
        const double dy = dim == 2 ? x[1] - center[1] : 0.0;
        return std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
    }
    double eval(const std::array<double, 2>& x, double s) const { return -s * s * s + kappa * bump(x) * s; }
    double ds(const std::array<double, 2>& x, double s) const { return -3.0 * s * s + kappa * bump(x); }
    std::array<double, 2> dx(const std::array<double, 2>& x, double s) const {
        const double b = bump(x);
        const double w2 = width * width;
        return {-kappa * s * b * (x[0] - center[0]) / w2,
                dim == 2 ? -kappa * s * b * (x[1] - center[1]) / w2 : 0.0};
    }
};

/// x-independent f given by a table (s_i, f_i), linear between nodes and
/// linearly extrapolated beyond the ends.
struct UserTable {
    std::vector<double> s;
    std::vector<double> f;

    UserTable() = default;
    UserTable(std::vector<double> s_nodes, std::vector<double> f_nodes)
        : s(std::move(s_nodes)), f(std::move(f_nodes)) {
        if (s.size() < 2 || s.size() != f.size()) throw InvalidArgument("user table needs >= 2 matching nodes");
        for (std::size_t i = 1; i < s.size(); ++i)
            if (!(s[i] > s[i - 1])) throw InvalidArgument("user table s nodes must increase");
        for (double v : f)
            if (!std::isfinite(v)) throw InvalidArgument("user table values must be finite");
    }

    std::size_t segment(double v) const {
        const auto it = std::upper_bound(s.begin(), s.end(), v);
        auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - s.begin(), 1));
        return std::min(i, s.size() - 1) - 1;
    }
    double eval(const std::array<double, 2>&, double v) const {
        const auto i = segment(v);
        const double t = (v - s[i]) / (s[i + 1] - s[i]);
        return f[i] + t * (f[i + 1] - f[i]);
    }
    double ds(const std::array<double, 2>&, double v) const {
        const auto i = segment(v);
        return (f[i + 1] - f[i]) / (s[i + 1] - s[i]);
    }
    std::array<double, 2> dx(const std::array<double, 2>&, double) const { return {0.0, 0.0}; }
};

using Nonlinearity = std::variant<Cubic, CubicWithBump, UserTable>;

inline std::string_view kind_name(const Nonlinearity& nl) {
    switch (nl.index()) {
        case 0: return "cubic";
        case 1: return "cubic-with-bump";
        default: return "user-table";
    }
}

inline double f_eval(const Nonlinearity& nl, const std::array<double, 2>& x, double s) {
    return std::visit([&](const auto& f) { return f.eval(x, s); }, nl);
}
inline double f_ds(const Nonlinearity& nl, const std::array<double, 2>& x, double s) {
    return std::visit([&](const auto& f) { return f.ds(x, s); }, nl);
}
inline std::array<double, 2> f_dx(const Nonlinearity& nl, const std::array<double, 2>& x, double s) {
    return std::visit([&](const auto& f) { return f.dx(x, s); }, nl);
}

// ---------------------------------------------------------------------------
// Model parameters

struct ModelParams {
    double lambda = 1.0;
    double alpha = 1.0;
    double delta = 1.0;
    double beta = 1.0;
    double p = 4.0;
    double alpha1 = 1.0;
    double alpha2 = 1.0;
};

/// Coefficients of the coupled system, forcing g, h, noise shapes phi1,
/// phi2 and certificate envelopes psi1..psi3.  Immutable once built.
class ModelSpec {
  public:
    struct Fields {
        Field g, h, phi1, phi2, psi1, psi2, psi3;
    };

    ModelSpec(const ModelParams& prm, Fields fields) : prm_(prm), f_(std::move(fields)) {
        for (auto [name, v] : {std::pair{"lambda", prm.lambda}, {"alpha", prm.alpha}, {"delta", prm.delta},
                               {"beta", prm.beta}, {"alpha1", prm.alpha1}, {"alpha2", prm.alpha2}})
            if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be positive");
        if (!(prm.p >= 2.0) || !std::isfinite(prm.p)) throw InvalidArgument("p must be >= 2");
        const Grid& g = f_.g.grid();
        for (const Field* fld : {&f_.h, &f_.phi1, &f_.phi2, &f_.psi1, &f_.psi2, &f_.psi3})
            if (!(fld->grid() == g)) throw GridMismatch("model fields must share one grid");
    }

    /// Every field zero on `grid`.
    static ModelSpec unforced(const ModelParams& prm, const Grid& grid) {
        const Field z(grid);
        return ModelSpec(prm, Fields{z, z, z, z, z, z, z});
    }

    const ModelParams& params() const noexcept { return prm_; }
    double lambda() const noexcept { return prm_.lambda; }
    double alpha() const noexcept { return prm_.alpha; }
    double delta() const noexcept { return prm_.delta; }
    double beta() const noexcept { return prm_.beta; }
    double p() const noexcept { return prm_.p; }
    double q() const noexcept { return prm_.p / (prm_.p - 1.0); }
    double alpha1() const noexcept { return prm_.alpha1; }
    double alpha2() const noexcept { return prm_.alpha2; }
    double eta() const noexcept { return std::min(prm_.lambda, prm_.delta); }

    const Grid& grid() const noexcept { return f_.g.grid(); }
    const Field& g() const noexcept { return f_.g; }
    const Field& h() const noexcept { return f_.h; }
    const Field& phi1() const noexcept { return f_.phi1; }
    const Field& phi2() const noexcept { return f_.phi2; }
    const Field& psi1() const noexcept { return f_.psi1; }
    const Field& psi2() const noexcept { return f_.psi2; }
    const Field& psi3() const noexcept { return f_.psi3; }
    const Fields& fields() const noexcept { return f_; }

    ModelSpec with_fields(Fields fields) const { return ModelSpec(prm_, std::move(fields)); }

  private:
    ModelParams prm_;
    Fields f_;
};

// ---------------------------------------------------------------------------
// Certificates

struct SampleBox {
    double x_min = -std::numeric_limits<double>::infinity();
    double x_max = std::numeric_limits<double>::infinity();
    double s_min = -10.0;
    double s_max = 10.0;
    int n_samples = 2001;
};

struct ConditionMargin {
    std::string name;
    double worst_margin = std::numeric_limits<double>::infinity();
    std::array<double, 2> worst_x{0.0, 0.0};
    double worst_s = 0.0;
    bool pass = true;
};

struct CertificateReport {
    std::array<ConditionMargin, 4> conditions;
    std::size_t points_checked = 0;
    bool pass = true;
};

inline constexpr double kCertificateTolerance = 1e-10;

/// Checks on a deterministic grid of (x, s) samples, x over grid nodes in
/// the box and s uniform over [s_min, s_max]:
///   f1: f(x,s) s <= -alpha1 |s|^p + psi1(x)
///   f2: |f(x,s)| <= alpha2 |s|^{p-1} + psi2(x)
///   f3: df/ds(x,s) <= beta
///   f4: |df/dx(x,s)| <= psi3(x)
/// Margins are (rhs - lhs) / (1 + |lhs| + |rhs|).
inline CertificateReport certify_f(const Nonlinearity& nl, const ModelSpec& spec, const SampleBox& box) {
    if (!(box.s_max >= box.s_min) || box.n_samples < 1 || !(box.x_max >= box.x_min))
        throw InvalidArgument("empty certificate sample box");
    CertificateReport rep;
    rep.conditions[0].name = "f1";
    rep.conditions[1].name = "f2";
    rep.conditions[2].name = "f3";
    rep.conditions[3].name = "f4";
    const Grid& g = spec.grid();
    const double p = spec.p();
    auto record = [](ConditionMargin& c, double lhs, double rhs, const std::array<double, 2>& x, double s) {
        const double m = (rhs - lhs) / (1.0 + std::abs(lhs) + std::abs(rhs));
        if (m < c.worst_margin) {
            c.worst_margin = m;
            c.worst_x = x;
            c.worst_s = s;
        }
    };
    std::size_t count = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto x = g.point(i);
        bool inside = x[0] >= box.x_min && x[0] <= box.x_max;
        if (g.dim() == 2) inside = inside && x[1] >= box.x_min && x[1] <= box.x_max;
        if (!inside) continue;
        for (int k = 0; k < box.n_samples; ++k) {
            const double s = box.n_samples == 1
                                 ? box.s_min
                                 : box.s_min + (box.s_max - box.s_min) * k / (box.n_samples - 1);
            const double fv = f_eval(nl, x, s);
            const double as = std::abs(s);
            record(rep.conditions[0], fv * s, -spec.alpha1() * detail::abs_pow(as, p) + spec.psi1()[i], x, s);
            record(rep.conditions[1], std::abs(fv), spec.alpha2() * detail::abs_pow(as, p - 1.0) + spec.psi2()[i], x, s);
            record(rep.conditions[2], f_ds(nl, x, s), spec.beta(), x, s);
            const auto d = f_dx(nl, x, s);
            record(rep.conditions[3], std::hypot(d[0], d[1]), spec.psi3()[i], x, s);
            ++count;
        }
    }
    if (count == 0) throw InvalidArgument("certificate sample box contains no grid nodes");
    rep.points_checked = count;
    for (auto& c : rep.conditions) {
        c.pass = c.worst_margin >= -kCertificateTolerance;
        rep.pass = rep.pass && c.pass;
    }
    return rep;
}

}  // namespace sfhn
