#include <sfhn/spatial.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace sfhn;

namespace {

Field random_field(const Grid& g, unsigned seed, bool respect_pins = true) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (respect_pins && g.is_pinned(i)) ? 0.0 : n01(rng);
    return Field(g, std::move(v));
}

}  // namespace

TEST(Grid, SpacingAndCoordinates) {
    const Grid g(1, 20.0, 512);
    EXPECT_DOUBLE_EQ(g.spacing(), 40.0 / 512);
    EXPECT_EQ(g.size(), 512u);
    for (int i : {0, 1, 255, 511}) EXPECT_EQ(g.point(static_cast<std::size_t>(i))[0], -20.0 + i * (40.0 / 512));
    const Grid g2(2, 3.0, 6);
    EXPECT_EQ(g2.size(), 36u);
    const auto p = g2.point(2 * 6 + 5);
    EXPECT_EQ(p[0], -3.0 + 2 * 1.0);
    EXPECT_EQ(p[1], -3.0 + 5 * 1.0);
}

TEST(Grid, RejectsBadArguments) {
    EXPECT_THROW(Grid(3, 1.0, 8), InvalidArgument);
    EXPECT_THROW(Grid(1, 0.0, 8), InvalidArgument);
    EXPECT_THROW(Grid(1, 1.0, 2), InvalidArgument);
}

TEST(Field, RejectsNonFiniteAndWrongLength) {
    const Grid g(1, 1.0, 8);
    EXPECT_THROW(Field(g, std::vector<double>(7, 0.0)), InvalidArgument);
    std::vector<double> v(8, 0.0);
    v[3] = std::nan("");
    EXPECT_THROW(Field(g, v), InvalidArgument);
    v[3] = INFINITY;
    EXPECT_THROW(Field(g, v), InvalidArgument);
}

TEST(Laplacian, ConstantPeriodicIsZero) {
    for (int dim : {1, 2}) {
        const Grid g(dim, 2.0, 16, Boundary::periodic);
        const Field f(g, std::vector<double>(g.size(), 3.25));
        const Field lap = laplacian(f);
        for (double x : lap.values()) EXPECT_EQ(x, 0.0);
    }
}

TEST(Laplacian, UnitSpikeGivesStencilRow) {
    const Grid g(1, 1.0, 16);
    std::vector<double> v(16, 0.0);
    v[7] = 1.0;
    const Field d = laplacian(Field(g, v));
    const double h2 = g.spacing() * g.spacing();
    for (int i = 0; i < 16; ++i) {
        const double expect = i == 7 ? -2.0 / h2 : (i == 6 || i == 8) ? 1.0 / h2 : 0.0;
        EXPECT_DOUBLE_EQ(d[static_cast<std::size_t>(i)], expect) << i;
    }
}

TEST(Laplacian, SineEigenfunctionConvergesAtSecondOrder) {
    const double L = 5.0;
    double prev = 0.0;
    for (int n : {32, 64, 128, 256}) {
        const Grid g(1, L, n);
        const Field f = Field::from_function(g, [&](double x, double) { return std::sin(M_PI * x / L); });
        const Field d = laplacian(f);
        const double k2 = (M_PI / L) * (M_PI / L);
        double err = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            err = std::max(err, std::abs(d[i] + k2 * f[i]));
            ref = std::max(ref, std::abs(k2 * f[i]));
        }
        const double rel = err / ref;
        if (prev > 0.0) {
            EXPECT_NEAR(prev / rel, 4.0, 0.1) << n;
        }
        prev = rel;
    }
}

TEST(Laplacian, SineEigenfunction2D) {
    const double L = 2.0;
    const Grid g(2, L, 64);
    const Field f = Field::from_function(g, [&](double x, double y) {
        return std::sin(M_PI * x / L) * std::sin(M_PI * y / L);
    });
    const Field d = laplacian(f);
    // Discrete eigenvalue of the 5-point stencil.
    const double h = g.spacing();
    const double lam = 2.0 * (2.0 - 2.0 * std::cos(M_PI * h / L)) / (h * h);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(d[i], -lam * f[i], 1e-10);
}

TEST(Norms, ZeroAndConstant) {
    const Grid g(1, 1.0, 100);
    const Field z(g);
    EXPECT_EQ(norm_l2(z), 0.0);
    EXPECT_EQ(norm_lp(z, 4.0), 0.0);
    EXPECT_EQ(norm_h1(z), 0.0);
    const Field one(g, std::vector<double>(100, 1.0));
    EXPECT_NEAR(norm_l2_sq(one), 2.0, 1e-14);
}

TEST(Norms, MatchBruteForce) {
    for (int dim : {1, 2}) {
        const Grid g(dim, 3.0, 24);
        const Field f = random_field(g, 11, false);
        const double w = std::pow(g.spacing(), dim);
        long double s2 = 0, s3 = 0, s4 = 0;
        for (double x : f.values()) {
            s2 += (long double)x * x;
            s3 += std::pow(std::abs((long double)x), 3.0L);
            s4 += (long double)x * x * x * x;
        }
        EXPECT_NEAR(norm_l2_sq(f), double(w * s2), 1e-12 * double(w * s2));
        EXPECT_NEAR(lp_power(f, 3.0), double(w * s3), 1e-12 * double(w * s3));
        EXPECT_NEAR(lp_power(f, 4.0), double(w * s4), 1e-12 * double(w * s4));
        EXPECT_NEAR(norm_lp(f, 4.0), std::pow(double(w * s4), 0.25), 1e-12);
    }
}

TEST(InnerProduct, SymmetryAndSelf) {
    const Grid g(2, 1.0, 20);
    const Field a = random_field(g, 1, false), b = random_field(g, 2, false);
    EXPECT_NEAR(inner_product(a, b), inner_product(b, a), 1e-12 * std::abs(inner_product(a, b)));
    EXPECT_DOUBLE_EQ(inner_product(a, a), norm_l2_sq(a));
    EXPECT_EQ(inner_product(a, Field(g)), 0.0);
    EXPECT_THROW(inner_product(a, Field(Grid(2, 1.0, 21))), GridMismatch);
}

TEST(SummationByParts, ExactOnRandomFields) {
    for (auto b : {Boundary::dirichlet_zero, Boundary::periodic}) {
        for (int dim : {1, 2}) {
            const Grid g(dim, 4.0, 32, b);
            for (unsigned seed = 1; seed <= 5; ++seed) {
                const Field f = random_field(g, seed);
                const double lhs = -inner_product(laplacian(f), f);
                // Oracle: forward differences over all faces, boundary ghosts 0 (dirichlet) or wrapped.
                const int n = g.points_per_axis();
                auto at = [&](int i, int j) -> double {
                    if (b == Boundary::periodic) {
                        i = (i % n + n) % n;
                        j = (j % n + n) % n;
                    } else if (i <= 0 || i >= n || (dim == 2 && (j <= 0 || j >= n))) {
                        return 0.0;
                    }
                    return f[dim == 1 ? std::size_t(i) : std::size_t(i * n + j)];
                };
                double s = 0.0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < (dim == 2 ? n : 1); ++j) {
                        const double d0 = at(i + 1, j) - at(i, j);
                        s += d0 * d0;
                        if (dim == 2) {
                            const double d1 = at(i, j + 1) - at(i, j);
                            s += d1 * d1;
                        }
                    }
                const double grad = dim == 1 ? s / g.spacing() : s;
                EXPECT_GE(lhs, 0.0);
                EXPECT_NEAR(lhs, gradient_energy(f), 1e-10 * lhs);
                EXPECT_NEAR(grad, gradient_energy(f), 1e-10 * grad);
            }
        }
    }
}

TEST(Cutoff, PlateausAndMidpoint) {
    EXPECT_EQ(cutoff_rho(0.5), 0.0);
    EXPECT_EQ(cutoff_rho(1.0), 0.0);
    EXPECT_EQ(cutoff_rho(3.0), 1.0);
    EXPECT_EQ(cutoff_rho(2.0), 1.0);
    EXPECT_DOUBLE_EQ(cutoff_rho(1.5), 0.5);
    EXPECT_THROW(cutoff_rho(-0.1), InvalidArgument);
}

TEST(Cutoff, MonotoneBoundedDerivative) {
    double prev = 0.0, max_d = 0.0;
    for (int i = 0; i <= 30000; ++i) {
        const double s = 3.0 * i / 30000.0;
        const double r = cutoff_rho(s);
        EXPECT_GE(r, prev);
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, 1.0);
        prev = r;
        max_d = std::max(max_d, std::abs(cutoff_rho_derivative(s)));
        if (i > 0 && i < 30000) {
            const double e = 1e-6;
            const double fd = (cutoff_rho(s + e) - cutoff_rho(std::max(0.0, s - e))) / (s + e - std::max(0.0, s - e));
            EXPECT_NEAR(fd, cutoff_rho_derivative(s), 1e-5);
        }
    }
    EXPECT_LE(max_d, 15.0 / 8.0 + 1e-12);
    EXPECT_NEAR(max_d, 15.0 / 8.0, 1e-6);
}

TEST(TailMass, CompactSupportAndMonotone) {
    const Grid g(1, 10.0, 200);
    const Field f = Field::from_function(g, [](double x, double) { return std::abs(x) <= 2.0 ? 1.0 - x * x / 4 : 0.0; });
    EXPECT_EQ(tail_mass(f, 2.0), 0.0);
    EXPECT_EQ(tail_mass(f, 5.0), 0.0);
    const Field r = random_field(g, 3);
    double prev = INFINITY;
    for (double k = 0.1; k < 10.0; k += 0.1) {
        const double m = tail_mass(r, k);
        EXPECT_LE(m, prev);
        prev = m;
    }
    EXPECT_THROW(tail_mass(r, 0.0), InvalidArgument);
    EXPECT_THROW(tail_mass(r, -1.0), InvalidArgument);
}

TEST(TailMass, MatchesDirectSum) {
    const Grid g(2, 4.0, 40);
    const Field f = random_field(g, 9);
    const double k = 1.7;
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto x = g.point(i);
        const double q = (x[0] * x[0] + x[1] * x[1]) / (k * k);
        double rho = 0.0;
        if (q >= 2.0) rho = 1.0;
        else if (q > 1.0) {
            const double t = q - 1.0;
            rho = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        }
        s += rho * f[i] * f[i];
    }
    EXPECT_NEAR(tail_mass(f, k), s * g.spacing() * g.spacing(), 1e-12 * s);
}
