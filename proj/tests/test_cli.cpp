#include <sfhn/config.hpp>
#include <sfhn/experiments.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace sfhn;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("sfhn_cli_" + name);
    std::filesystem::remove_all(p);
    return p;
}

// Small, fast settings shared by the end-to-end tests.
ExperimentConfig small(const std::string& experiment) {
    ExperimentConfig c;
    c.set("experiment", experiment);
    for (const char* o : {"grid.L=8", "grid.n=64", "noise.ensemble=2", "noise.dt_path=1e-2", "solve.dt=1e-2",
                          "solve.t_end=2", "solve.record_every=10", "solve.horizons=1,2", "init.radii=1,5",
                          "init.ensemble=2", "diagnostics.tail_radii=2,4", "certify.samples=201"})
        c.apply_override(o);
    return c;
}

std::map<std::string, std::string> read_artifacts(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = io::read_text(e.path());
    return out;
}

}  // namespace

TEST(Config, ParsesSectionsCommentsAndOverrides) {
    auto c = ExperimentConfig::parse(
        "# a comment\n"
        "experiment = tails\n"
        "[grid]\n"
        "L = 10   # trailing comment\n"
        "n = 128\n"
        "[model]\n"
        "lambda = 0.5\n");
    EXPECT_EQ(c.get("experiment"), "tails");
    EXPECT_EQ(c.number("grid.L"), 10.0);
    EXPECT_EQ(c.integer("grid.n"), 128);
    EXPECT_EQ(c.params().lambda, 0.5);
    c.apply_override("grid.n=256");
    EXPECT_EQ(c.grid().points_per_axis(), 256);
    EXPECT_THROW(c.apply_override("no-equals-sign"), InvalidArgument);
    EXPECT_THROW(ExperimentConfig::parse("[grid]\nL 10\n"), InvalidArgument);
}

TEST(Validate, DefaultConfigIsRunnable) { EXPECT_TRUE(ExperimentConfig().validate().empty()); }

TEST(Validate, MisalignedStepGivesOneDiagnostic) {
    ExperimentConfig c;
    c.apply_override("solve.dt=3e-3");
    const auto d = c.validate();
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].path, "solve.dt");
}

TEST(Validate, TailRadiusBeyondDomainGivesOneDiagnostic) {
    ExperimentConfig c;
    c.apply_override("diagnostics.tail_radii=5,10,25");
    const auto d = c.validate();
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].path, "diagnostics.tail_radii");
}

TEST(Validate, ListsEveryProblem) {
    ExperimentConfig c;
    c.apply_override("model.lambda=-1");
    c.apply_override("bogus.key=3");
    c.apply_override("experiment=nothing");
    const auto d = c.validate();
    EXPECT_EQ(d.size(), 3u);
}

TEST(Run, ValidationFailureWritesErrorJson) {
    auto c = small("simulate");
    c.apply_override("solve.dt=3e-2");
    std::ostringstream err;
    const auto dir = scratch("invalid");
    EXPECT_EQ(run(c, dir, 1, err), kExitValidation);
    const auto j = io::json::parse(err.str());
    EXPECT_EQ(j["error"], "validation");
    EXPECT_EQ(j["diagnostics"].size(), 1u);
    EXPECT_FALSE(std::filesystem::exists(dir / "manifest.json"));
}

TEST(Run, DivergenceExitCode) {
    auto c = small("simulate");
    for (const char* o : {"noise.dt_path=0.25", "solve.dt=0.25", "solve.t_end=5", "solve.record_every=1",
                          "init.radius=1e4"})
        c.apply_override(o);
    std::ostringstream err;
    EXPECT_EQ(run(c, scratch("diverge"), 1, err), kExitDivergence);
    EXPECT_EQ(io::json::parse(err.str())["error"], "divergence");
}

TEST(Run, CertifyDefaultCubicPasses) {
    const auto dir = scratch("certify");
    std::ostringstream err;
    EXPECT_EQ(run(small("certify-f"), dir, 1, err), kExitPass) << err.str();
    const auto rep = io::json::parse(io::read_text(dir / "report.json"));
    EXPECT_TRUE(rep["certificate"]["pass"].get<bool>());
    for (const auto& c : rep["certificate"]["conditions"]) EXPECT_GE(c["worst_margin"].get<double>(), -1e-10);
}

TEST(Run, SelftestPasses) {
    const auto dir = scratch("selftest");
    std::ostringstream err;
    EXPECT_EQ(run(small("selftest"), dir, 1, err), kExitPass) << err.str();
}

TEST(Run, SameConfigTwiceGivesIdenticalHashes) {
    std::ostringstream err;
    const auto a = scratch("twice_a"), b = scratch("twice_b");
    ASSERT_EQ(run(small("simulate"), a, 1, err), kExitPass) << err.str();
    ASSERT_EQ(run(small("simulate"), b, 2, err), kExitPass) << err.str();
    EXPECT_EQ(io::read_text(a / "manifest.json"), io::read_text(b / "manifest.json"));
}

TEST(Run, ManifestReplayIsByteIdentical) {
    for (const char* e : {"simulate", "pullback", "tails", "absorbing"}) {
        std::ostringstream err;
        const auto a = scratch(std::string("replay_a_") + e), b = scratch(std::string("replay_b_") + e);
        const int code = run(small(e), a, 1, err);
        ASSERT_TRUE(code == kExitPass || code == kExitAcceptance) << e << " " << err.str();
        const auto replayed = ExperimentConfig::load(a / "manifest.json");
        EXPECT_TRUE(replayed.validate().empty());
        EXPECT_EQ(run(replayed, b, 1, err), code) << e;
        const auto fa = read_artifacts(a), fb = read_artifacts(b);
        EXPECT_EQ(fa, fb) << e;
        const auto manifest = io::json::parse(fa.at("manifest.json"));
        for (const auto& [name, hash] : manifest["artifacts"].items())
            EXPECT_EQ(hash.get<std::string>(), io::sha256_hex(fa.at(name))) << name;
    }
}

TEST(Run, ArtifactsStayInsideOutputDirectory) {
    const auto dir = scratch("inside");
    std::ostringstream err;
    ASSERT_EQ(run(small("simulate"), dir / "run", 1, err), kExitPass);
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        EXPECT_TRUE(e.path().string().starts_with((dir / "run").string())) << e.path();
}
