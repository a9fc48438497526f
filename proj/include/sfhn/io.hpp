#pragma once

// CSV/JSON serialization.  Doubles are written in shortest round-trip form
// so a write/read cycle is bit-exact.

#include <sfhn/attractor_lab.hpp>
#include <sfhn/errors.hpp>
#include <sfhn/noise.hpp>
#include <sfhn/spatial.hpp>

#include <json.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace sfhn::io {

using json = nlohmann::ordered_json;

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline std::string fmt(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw IoError("not a number: '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline void write_text(const std::filesystem::path& file, const std::string& text) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot open " + file.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed: " + file.string());
}

inline std::string read_text(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot read " + file.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw IoError("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Field snapshots: "dim,L,n,boundary" header, one metadata row, then values.

inline std::string field_to_csv(const Field& f) {
    const Grid& g = f.grid();
    std::string s = "dim,L,n,boundary\n";
    s += std::to_string(g.dim()) + "," + fmt(g.half_length()) + "," + std::to_string(g.points_per_axis()) + "," +
         std::string(to_string(g.boundary())) + "\n";
    for (double v : f.values()) {
        s += fmt(v);
        s += '\n';
    }
    return s;
}

inline Field field_from_csv(std::string_view text) {
    std::vector<std::string_view> lines;
    for (auto l : split(text, '\n'))
        if (!l.empty() && l != "\r") lines.push_back(l);
    if (lines.size() < 2) throw IoError("field CSV needs a header and a metadata row");
    const auto head = split(lines[0]);
    if (head.size() != 4 || head[0] != "dim") throw IoError("field CSV header must be dim,L,n,boundary");
    const auto meta = split(lines[1]);
    if (meta.size() != 4) throw IoError("field CSV metadata row must have 4 entries");
    std::string bnd(meta[3]);
    while (!bnd.empty() && (bnd.back() == '\r' || bnd.back() == ' ')) bnd.pop_back();
    const Grid g(static_cast<int>(parse_double(meta[0])), parse_double(meta[1]),
                 static_cast<int>(parse_double(meta[2])), parse_boundary(bnd));
    std::vector<double> vals;
    vals.reserve(lines.size() - 2);
    for (std::size_t i = 2; i < lines.size(); ++i) vals.push_back(parse_double(lines[i]));
    if (vals.size() != g.size())
        throw IoError("field CSV has " + std::to_string(vals.size()) + " values, grid needs " + std::to_string(g.size()));
    return Field(g, std::move(vals));
}

inline void write_field(const std::filesystem::path& file, const Field& f) { write_text(file, field_to_csv(f)); }
inline Field read_field(const std::filesystem::path& file) { return field_from_csv(read_text(file)); }

// ---------------------------------------------------------------------------
// Wiener path export: CSV t,w1,w2,y1,y2 on the path grid plus JSON sidecar.

inline std::string path_to_csv(const WienerPath& path, double lambda, double delta, double t_from, double t_to) {
    const double dt = path.dt_path();
    const auto k0 = detail::to_steps(t_from, dt, "export start");
    const auto k1 = detail::to_steps(t_to, dt, "export end");
    if (k1 < k0) throw InvalidArgument("path export range is empty");
    std::vector<double> t;
    for (auto k = k0; k <= k1; ++k) t.push_back(static_cast<double>(k) * dt);
    const auto y1 = ou_evaluate(path, lambda, 0, t).values;
    const auto y2 = ou_evaluate(path, delta, 1, t).values;
    std::string s = "t,w1,w2,y1,y2\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto [w1, w2] = path_value(path, t[i]);
        s += fmt(t[i]) + "," + fmt(w1) + "," + fmt(w2) + "," + fmt(y1[i]) + "," + fmt(y2[i]) + "\n";
    }
    return s;
}

inline json path_sidecar(const WienerPath& path) {
    const double dt = path.dt_path();
    const auto left = path.origin() - path.shift_steps();
    json j;
    j["seed"] = path.seed();
    j["dt_path"] = dt;
    j["generated_t_minus"] = static_cast<double>(left) * dt;
    j["generated_t_plus"] = static_cast<double>(path.intervals() - left) * dt;
    j["shift_steps"] = path.shift_steps();
    j["generator"] = "mt19937_64, normal_distribution, seed_seq{seed, component, direction}";
    return j;
}

/// Regenerates the path view described by a sidecar (bit-exact).
inline WienerPath path_from_sidecar(const json& j) {
    const double dt = j.at("dt_path").get<double>();
    const WienerPath base = generate_path(j.at("seed").get<std::uint64_t>(), dt,
                                          j.at("generated_t_minus").get<double>(),
                                          j.at("generated_t_plus").get<double>());
    const auto shift = j.at("shift_steps").get<std::int64_t>();
    return shift == 0 ? base : base.shifted(static_cast<double>(shift) * dt);
}

// ---------------------------------------------------------------------------
// Trajectory CSV

inline std::string trajectory_to_csv(const std::vector<DiagnosticRow>& rows, const std::vector<double>& tail_radii) {
    std::string s = "t,energy,norm_u_tilde,norm_v_tilde,norm_grad_u_tilde,lp_u,norm_grad_u";
    for (double k : tail_radii) s += ",tail_" + fmt(k);
    s += '\n';
    for (const auto& r : rows) {
        s += fmt(r.t) + "," + fmt(r.energy) + "," + fmt(r.norm_u_tilde) + "," + fmt(r.norm_v_tilde) + "," +
             fmt(r.grad_u_tilde) + "," + fmt(r.lp_u) + "," + fmt(r.grad_u);
        for (double m : r.tails) s += "," + fmt(m);
        s += '\n';
    }
    return s;
}

}  // namespace sfhn::io
