#include <sfhn/attractor_lab.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace sfhn;

namespace {

ModelSpec make_spec(const Grid& g, double g_amp, double h_amp, double phi_amp) {
    const Field z(g);
    return ModelSpec(ModelParams{}, ModelSpec::Fields{Shape::gaussian(g_amp, 1.0).on(g), Shape::gaussian(h_amp, 1.0).on(g),
                                                      Shape::gaussian(phi_amp, 1.0).on(g),
                                                      Shape::gaussian(phi_amp, 1.0).on(g), z, z, z});
}

DiagnosticRow row(double t, double lp, double grad_ut, double grad_u) {
    DiagnosticRow r;
    r.t = t;
    r.lp_u = lp;
    r.grad_u_tilde = std::sqrt(grad_ut);
    r.grad_u = std::sqrt(grad_u);
    return r;
}

}  // namespace

TEST(UnitDirection, NormalizedAndDeterministic) {
    const Grid g(1, 20.0, 256);
    const PhasePoint a = unit_direction(g, 3), b = unit_direction(g, 3), c = unit_direction(g, 4);
    EXPECT_NEAR(phase_norm(a), 1.0, 1e-14);
    EXPECT_EQ(phase_distance(a, b), 0.0);
    EXPECT_GT(phase_distance(a, c), 0.0);
    const PhasePoint r = ball_point(zero_point(g), 7.5, 3);
    EXPECT_NEAR(phase_norm(r), 7.5, 1e-12);
}

TEST(Hausdorff, BasicIdentities) {
    const Grid g(1, 4.0, 32);
    const PhasePoint x = ball_point(zero_point(g), 1.0, 1), y = ball_point(zero_point(g), 2.0, 2);
    const std::vector<PhasePoint> A{x, y};
    EXPECT_EQ(hausdorff_semidist(A, A), 0.0);
    EXPECT_DOUBLE_EQ(hausdorff_semidist({x}, {y}), phase_distance(x, y));
    EXPECT_THROW(hausdorff_semidist({}, A), InvalidArgument);
    EXPECT_THROW(hausdorff_semidist(A, {}), InvalidArgument);
}

TEST(Hausdorff, AsymmetryMatchesBruteForce) {
    const Grid g(1, 4.0, 32);
    std::vector<PhasePoint> big, small;
    for (std::uint64_t s = 1; s <= 6; ++s) {
        big.push_back(ball_point(zero_point(g), double(s), s));
        if (s <= 2) small.push_back(big.back());
    }
    auto brute = [](const std::vector<PhasePoint>& A, const std::vector<PhasePoint>& B) {
        double sup = 0.0;
        for (const auto& a : A) {
            double inf = INFINITY;
            for (const auto& b : B) {
                double s = 0.0;
                for (std::size_t i = 0; i < a.u.size(); ++i)
                    s += (a.u[i] - b.u[i]) * (a.u[i] - b.u[i]) + (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
                inf = std::min(inf, std::sqrt(s * a.u.grid().cell_volume()));
            }
            sup = std::max(sup, inf);
        }
        return sup;
    };
    EXPECT_EQ(hausdorff_semidist(small, big), 0.0);
    EXPECT_GT(hausdorff_semidist(big, small), 0.0);
    EXPECT_NEAR(hausdorff_semidist(big, small), brute(big, small), 1e-12);
    EXPECT_NEAR(hausdorff_distance(big, small), brute(big, small), 1e-12);
}

TEST(Hausdorff, TriangleInequalityOnTriples) {
    const Grid g(1, 4.0, 32);
    std::vector<std::vector<PhasePoint>> sets(4);
    for (std::size_t k = 0; k < sets.size(); ++k)
        for (std::uint64_t s = 0; s < 3 + k; ++s) sets[k].push_back(ball_point(zero_point(g), 1.0 + double(s), 10 * k + s));
    for (const auto& A : sets)
        for (const auto& B : sets)
            for (const auto& C : sets)
                EXPECT_LE(hausdorff_semidist(A, C), hausdorff_semidist(A, B) + hausdorff_semidist(B, C) + 1e-12);
}

TEST(Cluster, GreedyFarthestPoint) {
    const Grid g(1, 4.0, 32);
    const PhasePoint o = zero_point(g);
    const PhasePoint d = unit_direction(g, 1);
    auto at = [&](double r) { return PhasePoint{o.u + r * d.u, o.v + r * d.v}; };
    const std::vector<PhasePoint> pts{at(0.0), at(0.01), at(5.0), at(5.02), at(2.0)};
    const auto reps = greedy_cluster(pts, 0.1);
    EXPECT_EQ(reps, (std::vector<std::size_t>{0, 3, 4}));
    const auto all = greedy_cluster(pts, 10.0);
    EXPECT_EQ(all, std::vector<std::size_t>{0});
    // Every member lies within tol of a representative.
    std::vector<PhasePoint> R;
    for (auto i : reps) R.push_back(pts[i]);
    EXPECT_LE(hausdorff_semidist(pts, R), 0.1);
}

TEST(AveragedIntegrals, ZeroTrajectory) {
    std::vector<DiagnosticRow> rows;
    for (int k = 0; k <= 300; ++k) rows.push_back(row(0.01 * k, 0.0, 0.0, 0.0));
    const ModelSpec spec = ModelSpec::unforced(ModelParams{}, Grid(1, 1.0, 8));
    const auto r = averaged_integral_probe(rows, spec, 0.0);
    EXPECT_EQ(r.discounted_lp_u, 0.0);
    EXPECT_EQ(r.discounted_grad_u_tilde, 0.0);
    for (const auto& w : r.windows) {
        EXPECT_EQ(w.integral.size(), 3u);
        for (double x : w.integral) EXPECT_EQ(x, 0.0);
    }
}

TEST(AveragedIntegrals, DiscountedConstantMatchesClosedForm) {
    ModelParams p;
    p.lambda = 0.6;
    const ModelSpec spec = ModelSpec::unforced(p, Grid(1, 1.0, 8));
    const double eta = spec.eta(), T = 4.0, dt = 1e-3;
    std::vector<DiagnosticRow> rows;
    for (int k = 0; k <= 4000; ++k) rows.push_back(row(k * dt, 1.0, 1.0, 1.0));
    const auto r = averaged_integral_probe(rows, spec, 0.0);
    const double exact = (1.0 - std::exp(-eta * T)) / eta;
    // Trapezoid error bound: T dt^2 max|f''| / 12 with f = e^{eta (s - T)}.
    const double tol = T * dt * dt * eta * eta / 12.0 + 1e-14;
    EXPECT_NEAR(r.discounted_lp_u, exact, tol);
    EXPECT_NEAR(r.discounted_grad_u_tilde, exact, tol);
    for (const auto& w : r.windows)
        for (double x : w.integral) EXPECT_NEAR(x, 1.0, 1e-12);
}

TEST(AveragedIntegrals, UnitWindowsOfLinearRamp) {
    const ModelSpec spec = ModelSpec::unforced(ModelParams{}, Grid(1, 1.0, 8));
    std::vector<DiagnosticRow> rows;
    for (int k = 0; k <= 40; ++k) rows.push_back(row(0.1 * k, 0.1 * k, 2.0, 3.0));
    const auto r = averaged_integral_probe(rows, spec, 1.0);
    ASSERT_EQ(r.windows[0].integral.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(r.windows[0].integral[k], double(k) + 0.5, 1e-12);
    EXPECT_NEAR(r.windows[0].max_after_entry, 3.5, 1e-12);
    EXPECT_NEAR(r.windows[0].max_relative_change_after_entry, 1.0 / 2.5, 1e-12);
    EXPECT_NEAR(r.windows[1].integral[2], 2.0, 1e-12);
    EXPECT_NEAR(r.windows[2].integral[2], 3.0, 1e-12);
}

TEST(AveragedIntegrals, WindowPastTrajectoryIsError) {
    const ModelSpec spec = ModelSpec::unforced(ModelParams{}, Grid(1, 1.0, 8));
    std::vector<DiagnosticRow> rows{row(0.0, 1, 1, 1), row(0.5, 1, 1, 1)};
    EXPECT_THROW(averaged_integral_probe(rows, spec, 0.0), InvalidArgument);
}

TEST(Absorbing, UnforcedCubicDecaysToZero) {
    const Grid g(1, 10.0, 128);
    const ModelSpec spec = make_spec(g, 0.0, 0.0, 0.0);
    const std::vector<WienerPath> paths{WienerPath::zero(1e-3, 40.0, 0.0)};
    AbsorbingOptions opt;
    opt.horizons = {5.0, 10.0, 20.0};
    const auto r = absorbing_probe(spec, Cubic{}, paths, {1.0, 10.0}, SolveConfig{}, opt);
    EXPECT_NEAR(r.rho_k, 0.0, 1e-6);
    EXPECT_GE(r.rho_k, 0.0);
    EXPECT_EQ(r.excluded, 0u);
    for (const auto& run : r.runs) EXPECT_TRUE(std::isfinite(run.entry_time));
    EXPECT_TRUE(r.omegas[0].bound_holds);
}

TEST(Absorbing, FittedBoundDominatesAndIsStable) {
    const Grid g(1, 10.0, 128);
    const ModelSpec spec = make_spec(g, 1.0, 0.5, 0.5);
    std::vector<WienerPath> paths;
    for (std::uint64_t s = 1; s <= 2; ++s) paths.push_back(generate_path(s, 1e-3, 60.0, 0.0));
    SolveConfig cfg;
    cfg.dt = 1e-3;
    AbsorbingOptions a, b;
    a.horizons = {2.5, 5.0, 10.0, 20.0};
    b.horizons = {5.0, 10.0, 20.0, 40.0};
    const auto ra = absorbing_probe(spec, Cubic{}, paths, {1.0, 10.0}, cfg, a);
    const auto rb = absorbing_probe(spec, Cubic{}, paths, {1.0, 10.0}, cfg, b);
    for (std::size_t w = 0; w < 2; ++w) {
        EXPECT_TRUE(ra.omegas[w].bound_holds);
        EXPECT_TRUE(std::isfinite(ra.omegas[w].c_hat));
        EXPECT_NEAR(rb.omegas[w].c_hat, ra.omegas[w].c_hat, 0.2 * ra.omegas[w].c_hat);
        for (const auto& run : ra.runs) {
            if (run.omega_index != w) continue;
            for (std::size_t k = 0; k < run.energies.size(); ++k)
                EXPECT_LE(run.energies[k], std::exp(-spec.eta() * run.horizons[k]) * run.initial_energy + ra.omegas[w].c_hat);
        }
    }
}

TEST(Absorbing, DivergentRunsAreExcluded) {
    const Grid g(1, 10.0, 64);
    const ModelSpec spec = make_spec(g, 0.0, 0.0, 0.0);
    const std::vector<WienerPath> paths{WienerPath::zero(0.25, 25.0, 0.0)};
    SolveConfig cfg;
    cfg.dt = 0.25;
    AbsorbingOptions opt;
    opt.horizons = {5.0};
    const auto r = absorbing_probe(spec, Cubic{}, paths, {0.01, 1000.0}, cfg, opt);
    EXPECT_EQ(r.excluded, 1u);
    EXPECT_FALSE(r.runs[1].converged);
    EXPECT_FALSE(r.runs[1].failure.empty());
    EXPECT_TRUE(r.runs[0].converged);
}

TEST(Tails, CompactSupportAndRadiusChecks) {
    const Grid g(1, 10.0, 200);
    PullbackSnapshot s;
    s.horizon = 1.0;
    s.u_tilde = Field::from_function(g, [](double x, double) { return std::abs(x) < 1.0 ? 1.0 : 0.0; });
    s.v_tilde = Field(g);
    s.z1 = Field(g);
    s.z2 = Field(g);
    s.v2 = Field(g);
    const auto r = tail_probe({s}, {1.0, 2.0, 5.0}, 1e-4);
    EXPECT_EQ(r.tail_u_tilde[0][0], 0.0);
    EXPECT_EQ(r.r_hat_eps, 1.0);
    EXPECT_TRUE(r.monotone_in_k);
    EXPECT_THROW(tail_probe({s}, {1.0, 10.0}, 1e-4), InvalidArgument);
    EXPECT_THROW(tail_probe({s}, {12.0}, 1e-4), InvalidArgument);
}

TEST(Tails, TriangleBoundForPhysicalField) {
    const Grid g(1, 20.0, 256);
    const ModelSpec spec = make_spec(g, 1.0, 0.5, 0.5);
    const WienerPath w = generate_path(5, 1e-3, 40.0, 0.0);
    const PullbackSnapshot s = pullback_snapshot(5.0, w, ball_point(zero_point(g), 5.0, 2), spec, Cubic{}, SolveConfig{});
    const auto r = tail_probe({s}, {2.0, 4.0, 8.0, 12.0}, 1e-4);
    for (std::size_t j = 0; j < r.radii.size(); ++j) {
        const double tz1 = tail_mass(s.z1, r.radii[j]);
        EXPECT_LE(r.tail_u[0][j], 2.0 * r.tail_u_tilde[0][j] + 2.0 * tz1 + 1e-15);
    }
    EXPECT_TRUE(r.monotone_in_k);
}

TEST(Tails, RadiusNondecreasingAsEpsilonShrinks) {
    const Grid g(1, 20.0, 256);
    PullbackSnapshot s;
    s.u_tilde = Shape::gaussian(1.0, 2.0).on(g);
    s.v_tilde = Shape::gaussian(0.5, 3.0).on(g);
    s.z1 = s.z2 = s.v2 = Field(g);
    std::vector<double> radii;
    for (int k = 1; k < 40; ++k) radii.push_back(0.5 * k);
    double prev = 0.0;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
        const double r = tail_probe({s}, radii, eps).r_hat_eps;
        EXPECT_GE(r, prev);
        prev = r;
    }
}

TEST(H1, ZeroNoiseZeroForcingGradientsVanish) {
    const Grid g(1, 10.0, 128);
    const ModelSpec spec = make_spec(g, 0.0, 0.0, 0.0);
    const WienerPath zero = WienerPath::zero(1e-3, 40.0, 0.0);
    std::vector<H1Sample> samples;
    for (double t : {10.0, 20.0})
        samples.push_back(h1_sample(pullback_snapshot(t, zero, ball_point(zero_point(g), 3.0, 1), spec, Cubic{}, SolveConfig{}), 0, 0.0));
    const auto r = h1_probe(samples);
    for (const auto& s : samples) {
        EXPECT_LT(s.grad_u_sq, 1e-6);
        EXPECT_LT(s.grad_v2_sq, 1e-6);
    }
    EXPECT_TRUE(r.bound_holds);
}

TEST(H1, RoughInitialVStillGivesFiniteV2Gradient) {
    const Grid g(1, 10.0, 256);
    const ModelSpec spec = make_spec(g, 1.0, 0.5, 0.5);
    const WienerPath w = generate_path(8, 1e-3, 40.0, 0.0);
    // Alternating-sign v0: grid-scale oscillation.
    const Field v0 = Field::from_function(g, [&](double x, double) {
        const int i = int(std::lround((x + 10.0) / g.spacing()));
        return (i % 2 ? 1.0 : -1.0) * std::exp(-x * x / 8.0);
    });
    const PhasePoint x0{Field(g), v0};
    const auto snap = pullback_snapshot(5.0, w, x0, spec, Cubic{}, SolveConfig{});
    const double gv2 = gradient_energy(snap.v2), gv0 = gradient_energy(v0);
    EXPECT_TRUE(std::isfinite(gv2));
    EXPECT_LT(gv2, 1e-2 * gv0);
}

TEST(H1, ProbeAggregatesAndFlagsStability) {
    std::vector<H1Sample> s{{0, 1, 10.0, 2.0, 1.0, 1.0}, {0, 1, 20.0, 2.2, 1.1, 1.0}, {0, 1, 40.0, 2.1, 1.05, 1.0}};
    const auto r = h1_probe(s);
    EXPECT_DOUBLE_EQ(r.c_hat_u, 1.1);
    EXPECT_DOUBLE_EQ(r.c_hat_u_half, 1.1);
    EXPECT_TRUE(r.stable_under_doubling);
    EXPECT_TRUE(r.bound_holds);
    EXPECT_NEAR(r.omegas[0].variation_u, 0.2 / 2.2, 1e-12);
}

TEST(Attractor, TrivialAttractorOfUnforcedSystem) {
    const Grid g(1, 10.0, 128);
    const ModelSpec spec = make_spec(g, 0.0, 0.0, 0.0);
    const WienerPath zero = WienerPath::zero(1e-3, 60.0, 1.0);
    std::vector<PhasePoint> ens;
    for (std::uint64_t s = 1; s <= 4; ++s) ens.push_back(ball_point(zero_point(g), 2.0, s));
    AttractorOptions opt;
    opt.test_ball = {ball_point(zero_point(g), 2.0, 99)};
    const auto a = attractor_approximate(spec, Cubic{}, zero, ens, {10.0, 20.0, 40.0}, SolveConfig{}, opt);
    ASSERT_EQ(a.members.size(), 1u);
    EXPECT_LT(phase_norm(a.members[0]), 1e-6);
    EXPECT_LE(a.compactness_residual, 1e-6);
    EXPECT_LE(a.invariance_residual, 1e-6);
    EXPECT_LE(a.attraction_residual, 1e-6);
    EXPECT_GE(a.diameter, 0.0);
}

TEST(Attractor, SteadyForcingMatchesLongForwardRun) {
    const Grid g(1, 10.0, 128);
    const ModelSpec spec = make_spec(g, 1.0, 0.0, 0.0);
    const WienerPath zero = WienerPath::zero(1e-3, 50.0, 1.0);
    std::vector<PhasePoint> ens{ball_point(zero_point(g), 1.0, 1), ball_point(zero_point(g), 1.0, 2)};
    AttractorOptions opt;
    const auto a = attractor_approximate(spec, Cubic{}, zero, ens, {15.0, 30.0}, SolveConfig{}, opt);
    ASSERT_EQ(a.members.size(), 1u);
    const WienerPath fwd = WienerPath::zero(1e-3, 20.0, 40.0);
    const PhasePoint steady = phi(40.0, fwd, zero_point(g), spec, Cubic{}, SolveConfig{});
    EXPECT_LE(phase_distance(a.members[0], steady), 1e-6);
    EXPECT_LE(a.invariance_residual, 1e-6);
    EXPECT_GT(phase_norm(steady), 0.1);
}

TEST(Attractor, EmptyEnsembleIsError) {
    const Grid g(1, 10.0, 32);
    const ModelSpec spec = make_spec(g, 0.0, 0.0, 0.0);
    EXPECT_THROW(attractor_approximate(spec, Cubic{}, WienerPath::zero(1e-3, 50.0, 1.0), {}, {1.0}, SolveConfig{}, {}),
                 InvalidArgument);
}

TEST(Parallel, OrderAndExceptions) {
    const auto v = parallel_map(100, 4, [](std::size_t i) { return int(i * i); });
    for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(v[i], int(i * i));
    EXPECT_THROW(parallel_map(10, 3, [](std::size_t i) -> int {
                     if (i == 7) throw InvalidArgument("seven");
                     return 0;
                 }),
                 InvalidArgument);
}

TEST(Parallel, EnsembleIndependentOfWorkerCount) {
    const Grid g(1, 8.0, 64);
    const ModelSpec spec = make_spec(g, 1.0, 0.5, 0.5);
    std::vector<WienerPath> paths;
    for (std::uint64_t s = 1; s <= 3; ++s) paths.push_back(generate_path(s, 1e-3, 30.0, 0.0));
    AbsorbingOptions one, four;
    one.horizons = four.horizons = {1.0, 2.0};
    four.workers = 4;
    const auto a = absorbing_probe(spec, Cubic{}, paths, {1.0, 5.0}, SolveConfig{}, one);
    const auto b = absorbing_probe(spec, Cubic{}, paths, {1.0, 5.0}, SolveConfig{}, four);
    for (std::size_t i = 0; i < a.runs.size(); ++i) EXPECT_EQ(a.runs[i].energies, b.runs[i].energies);
}
