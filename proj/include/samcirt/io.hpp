#ifndef SAMCIRT_IO_HPP
#define SAMCIRT_IO_HPP

// File formats.
//
//   Volume     <base>.raw  little-endian float32, x fastest
//              <base>.json {"dims": [...], "spacing": [...], "center": [...]}
//   ProjStack  <base>.raw  little-endian float32, angle-major, cols fastest
//              <base>.json {"angles": [...], "det_count": [cols] | [cols, rows],
//                           "det_spacing": d, "subscan_bounds": [[begin, end], ...]}
//   AffineParams      {"model": "rigid", "raw": [...]}; trajectories are arrays
//   SubscanPlan       {"segments": [[begin, end], ...], "s": [...], "lambda": l,
//                      "objective_value": g}
//   RunHistory CSV    iter,objective,gamma_x,gamma_p,p<i>_<k>...
//
// All ranges are zero-based and half-open.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "samcirt/core.hpp"
#include "samcirt/optimizer.hpp"
#include "samcirt/partition.hpp"
#include "samcirt/projector.hpp"
#include "samcirt/warp.hpp"

namespace samcirt::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Writes to a temporary sibling and renames it into place.
inline void write_atomic(const fs::path& path, const std::string& bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        check(bool(out), "io", "cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), std::streamsize(bytes.size()));
        check(bool(out), "io", "write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    check(bool(in), "io", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error("io", path.string() + ": " + e.what());
    }
}

inline void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

inline std::string encode_f32(std::span<const double> values) {
    std::string out(values.size() * 4, '\0');
    for (std::size_t n = 0; n < values.size(); ++n) {
        std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(values[n]));
        if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
        std::memcpy(out.data() + 4 * n, &u, 4);
    }
    return out;
}

inline std::vector<double> decode_f32(const std::string& bytes, std::size_t expected, const fs::path& src) {
    check(bytes.size() == expected * 4, "io",
          src.string() + ": expected " + std::to_string(expected * 4) + " bytes, found " + std::to_string(bytes.size()));
    std::vector<double> out(expected);
    for (std::size_t n = 0; n < expected; ++n) {
        std::uint32_t u;
        std::memcpy(&u, bytes.data() + 4 * n, 4);
        if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
        out[n] = static_cast<double>(std::bit_cast<float>(u));
    }
    return out;
}

inline fs::path with_ext(const fs::path& base, const char* ext) { return fs::path(base.string() + ext); }

inline json to_json(IndexRange r) { return json::array({r.begin, r.end}); }
inline IndexRange range_from_json(const json& j) {
    check(j.is_array() && j.size() == 2, "io", "a range must be [begin, end]");
    return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

inline json ranges_to_json(std::span<const IndexRange> rs) {
    json a = json::array();
    for (const auto& r : rs) a.push_back(to_json(r));
    return a;
}
inline std::vector<IndexRange> ranges_from_json(const json& j) {
    std::vector<IndexRange> out;
    for (const auto& e : j) out.push_back(range_from_json(e));
    return out;
}

// ---- Volume ---------------------------------------------------------------

inline json grid_to_json(const Grid& g) {
    json j;
    j["dims"] = json::array();
    j["spacing"] = json::array();
    j["center"] = json::array();
    for (std::size_t a = 0; a < g.ndim; ++a) {
        j["dims"].push_back(g.dims[a]);
        j["spacing"].push_back(g.spacing[a]);
        j["center"].push_back(g.center[a]);
    }
    return j;
}

inline Grid grid_from_json(const json& j) {
    try {
        const auto dims = j.at("dims").get<std::vector<std::size_t>>();
        check(dims.size() == 2 || dims.size() == 3, "io", "dims must have 2 or 3 entries");
        Grid g = dims.size() == 2 ? Grid::make_2d(dims[0], dims[1]) : Grid::make_3d(dims[0], dims[1], dims[2]);
        if (j.contains("spacing")) {
            const auto sp = j["spacing"].get<std::vector<double>>();
            check(sp.size() == dims.size(), "io", "spacing must match dims");
            for (std::size_t a = 0; a < sp.size(); ++a) g.spacing[a] = sp[a];
        }
        if (j.contains("center")) {
            const auto c = j["center"].get<std::vector<double>>();
            check(c.size() == dims.size(), "io", "center must match dims");
            for (std::size_t a = 0; a < c.size(); ++a) g.center[a] = c[a];
        }
        g.validate();
        return g;
    } catch (const json::exception& e) {
        throw Error("io", std::string("invalid volume sidecar: ") + e.what());
    }
}

inline void write_volume(const fs::path& base, const Volume& v) {
    v.validate();
    write_atomic(with_ext(base, ".raw"), encode_f32(v.data));
    write_json(with_ext(base, ".json"), grid_to_json(v.grid));
}

inline Volume read_volume(const fs::path& base) {
    const Grid g = grid_from_json(read_json(with_ext(base, ".json")));
    const fs::path raw = with_ext(base, ".raw");
    return Volume(g, decode_f32(read_file(raw), g.size(), raw));
}

// ---- ProjStack --------------------------------------------------------------

inline json stack_header(const ProjStack& b) {
    json j;
    j["angles"] = b.geometry.angles;
    j["det_count"] = b.geometry.det_rows == 1 ? json::array({b.geometry.det_count})
                                              : json::array({b.geometry.det_count, b.geometry.det_rows});
    j["det_spacing"] = b.geometry.det_spacing;
    j["subscan_bounds"] = ranges_to_json(b.subscan_bounds);
    return j;
}

inline void write_projstack(const fs::path& base, const ProjStack& b) {
    b.validate();
    write_atomic(with_ext(base, ".raw"), encode_f32(b.data.data));
    write_json(with_ext(base, ".json"), stack_header(b));
}

inline ProjStack read_projstack(const fs::path& base) {
    const json j = read_json(with_ext(base, ".json"));
    ProjStack b;
    try {
        b.geometry.angles = j.at("angles").get<std::vector<double>>();
        const json& dc = j.at("det_count");
        if (dc.is_number()) {
            b.geometry.det_count = dc.get<std::size_t>();
        } else {
            check(dc.size() == 1 || dc.size() == 2, "io", "det_count must be [cols] or [cols, rows]");
            b.geometry.det_count = dc[0].get<std::size_t>();
            b.geometry.det_rows = dc.size() == 2 ? dc[1].get<std::size_t>() : 1;
        }
        b.geometry.det_spacing = j.at("det_spacing").get<double>();
        b.subscan_bounds = j.contains("subscan_bounds") ? ranges_from_json(j["subscan_bounds"])
                                                        : std::vector<IndexRange>{b.geometry.all()};
    } catch (const json::exception& e) {
        throw Error("io", std::string("invalid projection sidecar: ") + e.what());
    }
    const fs::path raw = with_ext(base, ".raw");
    const std::size_t n = b.geometry.n_angles() * b.geometry.det_rows * b.geometry.det_count;
    b.data = ProjArray(b.geometry.n_angles(), b.geometry.det_rows, b.geometry.det_count);
    b.data.data = decode_f32(read_file(raw), n, raw);
    b.validate();
    return b;
}

// ---- AffineParams -------------------------------------------------------------

inline json to_json(const AffineParams& p) {
    return json{{"model", std::string(to_string(p.model.kind))}, {"raw", p.raw}};
}

inline AffineParams params_from_json(const json& j) {
    try {
        AffineParams p;
        const MotionKind kind = parse_motion_kind(j.at("model").get<std::string>());
        p.raw = j.at("raw").get<std::vector<double>>();
        p.model = MotionModel::from_count(kind, p.raw.size());
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw Error("io", std::string("invalid affine parameters: ") + e.what());
    }
}

inline json trajectory_to_json(const std::vector<AffineParams>& ps) {
    json a = json::array();
    for (const auto& p : ps) a.push_back(to_json(p));
    return a;
}

inline std::vector<AffineParams> trajectory_from_json(const json& j) {
    check(j.is_array(), "io", "a parameter trajectory must be a JSON array");
    std::vector<AffineParams> out;
    for (const auto& e : j) out.push_back(params_from_json(e));
    return out;
}

// ---- SubscanPlan -------------------------------------------------------------

inline json to_json(const SubscanPlan& plan) {
    return json{{"segments", ranges_to_json(plan.segments)},
                {"s", plan.s},
                {"lambda", plan.lambda},
                {"objective_value", plan.objective_value}};
}

inline SubscanPlan plan_from_json(const json& j) {
    try {
        SubscanPlan p;
        p.segments = ranges_from_json(j.at("segments"));
        p.s = j.at("s").get<std::vector<double>>();
        p.lambda = j.at("lambda").get<double>();
        p.objective_value = j.value("objective_value", 0.0);
        check(ranges_partition(p.segments, p.s.size()), "io", "plan segments must partition the SSIM vector");
        return p;
    } catch (const json::exception& e) {
        throw Error("io", std::string("invalid subscan plan: ") + e.what());
    }
}

// ---- RunHistory ----------------------------------------------------------------

inline std::string history_csv(const RunHistory& h, std::size_t n_subscans) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "iter,objective,gamma_x,gamma_p";
    const std::size_t width = h.p.empty() ? 0 : h.p.front().size();
    const std::size_t per = n_subscans ? width / n_subscans : 0;
    for (std::size_t c = 0; c < width; ++c) os << ",p" << (per ? c / per : 0) << "_" << (per ? c % per : c);
    os << "\n";
    for (std::size_t k = 0; k < h.size(); ++k) {
        os << k << "," << h.objective[k] << "," << h.gamma_x[k] << "," << h.gamma_p[k];
        for (double v : h.p[k]) os << "," << v;
        os << "\n";
    }
    return os.str();
}

} // namespace samcirt::io

#endif // SAMCIRT_IO_HPP
