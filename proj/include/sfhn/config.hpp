#pragma once

// Plain-text experiment configuration.
//
//   # comment
//   [grid]            optional section; prefixes following keys with "grid."
//   L = 20
//   solve.dt = 1e-3   dotted keys work with or without sections
//
// Every key has a default (see ExperimentConfig::defaults); unknown keys are
// reported by validate().  Lists are comma separated.

#include <sfhn/errors.hpp>
#include <sfhn/io.hpp>
#include <sfhn/model.hpp>
#include <sfhn/noise.hpp>
#include <sfhn/solver.hpp>
#include <sfhn/spatial.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sfhn {

struct Diagnostic {
    std::string path;  // dotted config key
    std::string message;
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> n{"simulate", "pullback", "absorbing", "tails",
                                            "attractor", "certify-f", "selftest"};
    return n;
}

inline const char* const kFieldNames[] = {"g", "h", "phi1", "phi2", "psi1", "psi2", "psi3"};

class ExperimentConfig {
  public:
    using Map = std::map<std::string, std::string>;

    static const Map& defaults() {
        static const Map d = [] {
            Map m{
                {"experiment", "simulate"},
                {"output.dir", "out"},
                {"run.workers", "1"},
                {"grid.dim", "1"},
                {"grid.L", "20"},
                {"grid.n", "512"},
                {"grid.boundary", "dirichlet-zero"},
                {"model.lambda", "1"},
                {"model.alpha", "1"},
                {"model.delta", "1"},
                {"model.beta", "1"},
                {"model.p", "4"},
                {"model.alpha1", "1"},
                {"model.alpha2", "1"},
                {"model.nonlinearity", "cubic"},
                {"model.bump.kappa", "1"},
                {"model.bump.width", "1"},
                {"model.bump.center", "0,0"},
                {"model.table.file", ""},
                {"noise.seed", "1"},
                {"noise.ensemble", "16"},
                {"noise.dt_path", "1e-3"},
                {"noise.t_minus", "auto"},
                {"noise.t_plus", "auto"},
                {"solve.dt", "1e-3"},
                {"solve.scheme", "imex-be"},
                {"solve.record_every", "100"},
                {"solve.t_end", "10"},
                {"solve.horizons", "10,20,40"},
                {"init.radii", "1,10,100"},
                {"init.radius", "10"},
                {"init.direction_seed", "1"},
                {"init.ensemble", "8"},
                {"diagnostics.tail_radii", "5,10,15"},
                {"diagnostics.entry_time", "0"},
                {"tails.epsilon", "1e-4"},
                {"absorbing.entry_factor", "2"},
                {"attractor.cluster_tol", "1e-3"},
                {"attractor.invariance_shift", "1"},
                {"attractor.test_ball", "4"},
                {"certify.s_min", "-10"},
                {"certify.s_max", "10"},
                {"certify.samples", "2001"},
            };
            const std::map<std::string, std::pair<std::string, std::string>> fields{
                {"g", {"gaussian", "1"}},    {"h", {"gaussian", "0.5"}}, {"phi1", {"gaussian", "0.5"}},
                {"phi2", {"gaussian", "0.5"}}, {"psi1", {"zero", "0"}},   {"psi2", {"zero", "0"}},
                {"psi3", {"zero", "0"}}};
            for (const auto& [name, sa] : fields) {
                const std::string k = "field." + name + ".";
                m[k + "shape"] = sa.first;
                m[k + "amplitude"] = sa.second;
                m[k + "width"] = "1";
                m[k + "center"] = "0,0";
                m[k + "file"] = "";
            }
            return m;
        }();
        return d;
    }

    ExperimentConfig() : values_(defaults()) {}

    /// Parses `key = value` text on top of the defaults.
    static ExperimentConfig parse(std::string_view text) {
        ExperimentConfig c;
        std::string section;
        int lineno = 0;
        for (auto raw : io::split(text, '\n')) {
            ++lineno;
            std::string line(raw);
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw InvalidArgument("line " + std::to_string(lineno) + ": bad section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            c.set_assignment(line, section, lineno);
        }
        return c;
    }

    /// Loads a config file, or the "config" object of a manifest JSON.
    static ExperimentConfig load(const std::filesystem::path& file) {
        const std::string text = io::read_text(file);
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '{') {
            const auto j = io::json::parse(text);
            ExperimentConfig c;
            for (const auto& [k, v] : j.at("config").items()) c.values_[k] = v.get<std::string>();
            c.base_dir_ = file.parent_path();
            c.from_manifest_ = true;
            return c;
        }
        ExperimentConfig c = parse(text);
        c.base_dir_ = file.parent_path();
        return c;
    }

    /// Applies a "key=value" override.
    void apply_override(const std::string& assignment) { set_assignment(assignment, "", 0); }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw InvalidArgument("unknown config key " + key);
        return it->second;
    }

    double number(const std::string& key) const {
        try {
            return io::parse_double(get(key));
        } catch (const io::IoError&) {
            throw InvalidArgument(key + ": expected a number, got '" + get(key) + "'");
        }
    }

    std::int64_t integer(const std::string& key) const {
        const double v = number(key);
        if (v != std::floor(v) || std::abs(v) > 9.0e15) throw InvalidArgument(key + ": expected an integer");
        return static_cast<std::int64_t>(v);
    }

    std::uint64_t seed(const std::string& key) const {
        const std::string& s = get(key);
        std::uint64_t v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw InvalidArgument(key + ": expected an unsigned integer");
        return v;
    }

    std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        const std::string& s = get(key);
        if (trim(s).empty()) return out;
        for (auto part : io::split(s)) {
            try {
                out.push_back(io::parse_double(part));
            } catch (const io::IoError&) {
                throw InvalidArgument(key + ": bad list entry '" + std::string(part) + "'");
            }
        }
        return out;
    }

    std::optional<double> optional_number(const std::string& key) const {
        if (get(key) == "auto") return std::nullopt;
        return number(key);
    }

    const Map& values() const noexcept { return values_; }
    const std::filesystem::path& base_dir() const noexcept { return base_dir_; }
    void set_base_dir(std::filesystem::path p) { base_dir_ = std::move(p); }
    bool from_manifest() const noexcept { return from_manifest_; }

    std::filesystem::path resolve(const std::string& file) const {
        std::filesystem::path p(file);
        return p.is_absolute() ? p : base_dir_ / p;
    }

    // ---- typed views --------------------------------------------------------

    Grid grid() const {
        return Grid(static_cast<int>(integer("grid.dim")), number("grid.L"), static_cast<int>(integer("grid.n")),
                    parse_boundary(get("grid.boundary")));
    }

    ModelParams params() const {
        ModelParams p;
        p.lambda = number("model.lambda");
        p.alpha = number("model.alpha");
        p.delta = number("model.delta");
        p.beta = number("model.beta");
        p.p = number("model.p");
        p.alpha1 = number("model.alpha1");
        p.alpha2 = number("model.alpha2");
        return p;
    }

    Field field(const std::string& name, const Grid& g) const {
        const std::string k = "field." + name + ".";
        if (!get(k + "file").empty()) {
            Field f = io::read_field(resolve(get(k + "file")));
            if (!(f.grid() == g)) throw GridMismatch("field." + name + ".file is on a different grid");
            return f;
        }
        Shape s;
        s.kind = parse_shape_kind(get(k + "shape"));
        s.amplitude = number(k + "amplitude");
        s.width = number(k + "width");
        s.center = pair(k + "center");
        return s.on(g);
    }

    ModelSpec spec() const {
        const Grid g = grid();
        ModelSpec::Fields f{field("g", g),    field("h", g),    field("phi1", g), field("phi2", g),
                            field("psi1", g), field("psi2", g), field("psi3", g)};
        return ModelSpec(params(), std::move(f));
    }

    Nonlinearity nonlinearity() const {
        const std::string& kind = get("model.nonlinearity");
        if (kind == "cubic") return Cubic{};
        if (kind == "cubic-with-bump") {
            CubicWithBump b;
            b.kappa = number("model.bump.kappa");
            b.width = number("model.bump.width");
            b.center = pair("model.bump.center");
            b.dim = static_cast<int>(integer("grid.dim"));
            return b;
        }
        if (kind == "table") {
            const std::string text = io::read_text(resolve(get("model.table.file")));
            std::vector<double> s, f;
            bool header = true;
            for (auto line : io::split(text, '\n')) {
                if (line.empty() || line == "\r") continue;
                const auto cols = io::split(line);
                if (cols.size() != 2) throw InvalidArgument("model.table.file: rows must be s,f");
                if (header) {
                    header = false;
                    try {
                        io::parse_double(cols[0]);
                    } catch (const io::IoError&) {
                        continue;
                    }
                }
                s.push_back(io::parse_double(cols[0]));
                f.push_back(io::parse_double(cols[1]));
            }
            return UserTable(std::move(s), std::move(f));
        }
        throw InvalidArgument("model.nonlinearity: unknown kind '" + kind + "'");
    }

    SolveConfig solve() const {
        SolveConfig c;
        c.dt = number("solve.dt");
        c.scheme = parse_scheme(get("solve.scheme"));
        c.record_every = static_cast<int>(integer("solve.record_every"));
        return c;
    }

    SampleBox sample_box() const {
        SampleBox b;
        b.s_min = number("certify.s_min");
        b.s_max = number("certify.s_max");
        b.n_samples = static_cast<int>(integer("certify.samples"));
        return b;
    }

    std::vector<std::uint64_t> seeds() const {
        const auto base = seed("noise.seed");
        const auto n = integer("noise.ensemble");
        std::vector<std::uint64_t> s;
        for (std::int64_t i = 0; i < n; ++i) s.push_back(base + static_cast<std::uint64_t>(i));
        return s;
    }

    /// Past extent the experiment needs: largest pullback horizon plus the
    /// OU quadrature window of the slower rate.
    double required_t_minus() const {
        const auto h = list("solve.horizons");
        const double hmax = h.empty() ? 0.0 : *std::max_element(h.begin(), h.end());
        const double dtp = number("noise.dt_path");
        const double trunc = ou_truncation_horizon(std::min(number("model.lambda"), number("model.delta")), dtp);
        const std::string& e = get("experiment");
        const double pull = (e == "simulate" || e == "certify-f" || e == "selftest") ? 0.0 : hmax;
        return pull + trunc + dtp;
    }

    double required_t_plus() const {
        const std::string& e = get("experiment");
        if (e == "simulate") return number("solve.t_end");
        if (e == "attractor") return number("attractor.invariance_shift");
        return 0.0;
    }

    double t_minus() const { return optional_number("noise.t_minus").value_or(required_t_minus()); }
    double t_plus() const { return optional_number("noise.t_plus").value_or(required_t_plus()); }

    /// Every invariant violation, keyed by config path.  Empty iff runnable.
    std::vector<Diagnostic> validate() const {
        std::vector<Diagnostic> out;
        auto bad = [&](const std::string& k, const std::string& m) { out.push_back({k, m}); };
        for (const auto& [k, v] : values_)
            if (!defaults().count(k)) bad(k, "unknown key");

        auto num = [&](const std::string& k) -> std::optional<double> {
            try {
                const double v = number(k);
                if (!std::isfinite(v)) {
                    bad(k, "must be finite");
                    return std::nullopt;
                }
                return v;
            } catch (const InvalidArgument& e) {
                bad(k, e.what());
                return std::nullopt;
            }
        };
        auto positive = [&](const std::string& k) {
            auto v = num(k);
            if (v && !(*v > 0.0)) bad(k, "must be positive");
            return v;
        };
        auto lst = [&](const std::string& k) -> std::optional<std::vector<double>> {
            try {
                return list(k);
            } catch (const InvalidArgument& e) {
                bad(k, e.what());
                return std::nullopt;
            }
        };
        auto integral = [&](const std::string& k, double lo) {
            auto v = num(k);
            if (v && (*v != std::floor(*v) || *v < lo)) bad(k, "must be an integer >= " + io::fmt(lo));
            return v;
        };

        if (std::find(experiment_names().begin(), experiment_names().end(), get("experiment")) ==
            experiment_names().end())
            bad("experiment", "unknown experiment '" + get("experiment") + "'");
        if (get("output.dir").empty()) bad("output.dir", "must not be empty");
        integral("run.workers", 1);

        auto dim = integral("grid.dim", 1);
        if (dim && *dim > 2) bad("grid.dim", "must be 1 or 2");
        auto L = positive("grid.L");
        integral("grid.n", 3);
        try {
            parse_boundary(get("grid.boundary"));
        } catch (const InvalidArgument& e) {
            bad("grid.boundary", e.what());
        }
        for (const char* k : {"model.lambda", "model.alpha", "model.delta", "model.beta", "model.alpha1", "model.alpha2"})
            positive(k);
        if (auto p = num("model.p"); p && !(*p >= 2.0)) bad("model.p", "must be >= 2");
        {
            const std::string& k = get("model.nonlinearity");
            if (k != "cubic" && k != "cubic-with-bump" && k != "table")
                bad("model.nonlinearity", "must be cubic, cubic-with-bump or table");
            if (k == "table" && get("model.table.file").empty()) bad("model.table.file", "required for table");
            if (k == "cubic-with-bump") positive("model.bump.width");
        }
        for (const char* name : kFieldNames) {
            const std::string k = std::string("field.") + name + ".";
            if (!get(k + "file").empty()) {
                if (!std::filesystem::exists(resolve(get(k + "file")))) bad(k + "file", "file not found");
                continue;
            }
            try {
                parse_shape_kind(get(k + "shape"));
            } catch (const InvalidArgument& e) {
                bad(k + "shape", e.what());
            }
            num(k + "amplitude");
            positive(k + "width");
            try {
                pair(k + "center");
            } catch (const InvalidArgument& e) {
                bad(k + "center", e.what());
            }
        }

        try {
            seed("noise.seed");
        } catch (const InvalidArgument& e) {
            bad("noise.seed", e.what());
        }
        integral("noise.ensemble", 1);
        auto dtp = positive("noise.dt_path");
        auto dt = positive("solve.dt");
        bool dt_ok = dt.has_value() && dtp.has_value();
        if (dt_ok) {
            const double r = *dt / *dtp;
            const double lr = std::log2(r);
            if (std::abs(lr - std::round(lr)) > 1e-9) {
                bad("solve.dt", "solve.dt / noise.dt_path = " + io::fmt(r) + " is not a power of two");
                dt_ok = false;
            }
        }
        try {
            parse_scheme(get("solve.scheme"));
        } catch (const InvalidArgument& e) {
            bad("solve.scheme", e.what());
        }
        integral("solve.record_every", 1);
        auto t_end = num("solve.t_end");
        if (t_end && *t_end < 0.0) bad("solve.t_end", "must be >= 0");
        auto horizons = lst("solve.horizons");
        if (horizons) {
            if (horizons->empty()) bad("solve.horizons", "needs at least one horizon");
            if (!std::is_sorted(horizons->begin(), horizons->end())) bad("solve.horizons", "must increase");
            for (double h : *horizons)
                if (!(h >= 0.0)) {
                    bad("solve.horizons", "must be >= 0");
                    break;
                }
        }
        if (dt_ok) {
            auto aligned = [&](const std::string& k, double t) {
                const double q = t / *dt;
                if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, q)) bad(k, "not a multiple of solve.dt");
            };
            if (t_end) aligned("solve.t_end", *t_end);
            if (horizons)
                for (double h : *horizons) {
                    const double q = h / *dt;
                    if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, q)) {
                        bad("solve.horizons", "entry " + io::fmt(h) + " is not a multiple of solve.dt");
                        break;
                    }
                }
        }
        for (const char* k : {"noise.t_minus", "noise.t_plus"}) {
            if (get(k) == "auto") continue;
            if (auto v = num(k); v && *v < 0.0) bad(k, "must be >= 0 or auto");
        }
        if (out.empty()) {
            if (get("noise.t_minus") != "auto" && t_minus() < required_t_minus())
                bad("noise.t_minus", "window " + io::fmt(t_minus()) + " shorter than horizons plus OU window " +
                                         io::fmt(required_t_minus()));
            if (get("noise.t_plus") != "auto" && t_plus() < required_t_plus())
                bad("noise.t_plus", "window shorter than the forward extent " + io::fmt(required_t_plus()));
        }

        auto radii = lst("init.radii");
        if (radii)
            for (double r : *radii)
                if (!(r >= 0.0)) {
                    bad("init.radii", "must be >= 0");
                    break;
                }
        if (auto r = num("init.radius"); r && *r < 0.0) bad("init.radius", "must be >= 0");
        try {
            seed("init.direction_seed");
        } catch (const InvalidArgument& e) {
            bad("init.direction_seed", e.what());
        }
        integral("init.ensemble", 1);
        if (auto tr = lst("diagnostics.tail_radii"); tr && L) {
            for (double k : *tr)
                if (!(k > 0.0) || k >= *L) {
                    bad("diagnostics.tail_radii", "radius " + io::fmt(k) + " must lie in (0, grid.L)");
                    break;
                }
            if (!std::is_sorted(tr->begin(), tr->end())) bad("diagnostics.tail_radii", "must increase");
        }
        num("diagnostics.entry_time");
        positive("tails.epsilon");
        positive("absorbing.entry_factor");
        positive("attractor.cluster_tol");
        if (auto s = num("attractor.invariance_shift"); s && *s < 0.0) bad("attractor.invariance_shift", "must be >= 0");
        if (auto s = num("attractor.invariance_shift"); s && dtp) {
            const double q = *s / *dtp;
            if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, q))
                bad("attractor.invariance_shift", "not a multiple of noise.dt_path");
        }
        integral("attractor.test_ball", 0);
        auto smin = num("certify.s_min");
        auto smax = num("certify.s_max");
        if (smin && smax && !(*smax >= *smin)) bad("certify.s_max", "must be >= certify.s_min");
        integral("certify.samples", 1);
        return out;
    }

  private:
    static std::string trim(std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return {};
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    void set_assignment(const std::string& line, const std::string& section, int lineno) {
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument((lineno ? "line " + std::to_string(lineno) + ": " : std::string()) +
                                  "expected key = value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw InvalidArgument("empty config key");
        if (!section.empty()) key = section + "." + key;
        values_[key] = trim(line.substr(eq + 1));
    }

    std::array<double, 2> pair(const std::string& key) const {
        const auto v = list(key);
        if (v.empty() || v.size() > 2) throw InvalidArgument(key + ": expected one or two numbers");
        return {v[0], v.size() > 1 ? v[1] : 0.0};
    }

    Map values_;
    std::filesystem::path base_dir_ = ".";
    bool from_manifest_ = false;
};

}  // namespace sfhn
