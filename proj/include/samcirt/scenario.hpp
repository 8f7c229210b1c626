#ifndef SAMCIRT_SCENARIO_HPP
#define SAMCIRT_SCENARIO_HPP

// Simulation scenario files:
//
//   {
//     "phantom":  {"kind": "gaussian-blobs", "dims": [64, 64], "smoothness": 1, "count": 12},
//     "geometry": {"angles": [{"count": 16, "start": 0, "stop": 3.14159}, 0.0],
//                  "det_count": [96], "det_spacing": 1},
//     "subscans": [[0, 16], [16, 17]],
//     "schedule": {"model": "scaling", "params": [[1, 1], [0.95, 1.10]]},
//     "kernel":   "cubic",
//     "noise":    0.01,
//     "seed":     7
//   }
//
// "angles" mixes explicit values and evenly spaced runs over [start, stop).
// Omitted fields: det_count = ceil(1.5 nx) (rows = nz in 3D), one subscan,
// identity schedule, no noise, seed 0.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "samcirt/io.hpp"
#include "samcirt/model.hpp"
#include "samcirt/simulation.hpp"

namespace samcirt {

struct Scenario {
    PhantomSpec phantom;
    ScanModel scan;
    MotionSchedule schedule;
    std::uint64_t seed = 0;
};

namespace detail {

inline void append_angles(const nlohmann::json& j, std::vector<double>& out) {
    if (j.is_number()) {
        out.push_back(j.get<double>());
    } else if (j.is_array()) {
        for (const auto& e : j) append_angles(e, out);
    } else if (j.is_object()) {
        const auto n = j.at("count").get<std::size_t>();
        const double a = j.value("start", 0.0), b = j.value("stop", std::numbers::pi);
        for (std::size_t k = 0; k < n; ++k) out.push_back(a + (b - a) * double(k) / double(n));
    } else {
        throw Error("io", "angles must be numbers or {count, start, stop} runs");
    }
}

} // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
    try {
        Scenario sc;
        sc.seed = j.value("seed", std::uint64_t{0});

        const auto& ph = j.at("phantom");
        sc.phantom.kind = parse_phantom_kind(ph.value("kind", std::string("gaussian-blobs")));
        sc.phantom.grid = io::grid_from_json(ph);
        sc.phantom.smoothness = ph.value("smoothness", 0.0);
        sc.phantom.count = ph.value("count", std::size_t{0});
        sc.phantom.seed = sc.seed;
        sc.phantom.validate();
        const Grid& g = sc.phantom.grid;

        Geometry& geo = sc.scan.geometry;
        const auto& gj = j.at("geometry");
        detail::append_angles(gj.at("angles"), geo.angles);
        geo.det_count = std::size_t(std::ceil(1.5 * double(g.nx())));
        geo.det_rows = g.ndim == 3 ? g.nz() : 1;
        if (gj.contains("det_count")) {
            const auto& dc = gj["det_count"];
            if (dc.is_number()) {
                geo.det_count = dc.get<std::size_t>();
            } else {
                geo.det_count = dc.at(0).get<std::size_t>();
                if (dc.size() > 1) geo.det_rows = dc[1].get<std::size_t>();
            }
        }
        geo.det_spacing = gj.value("det_spacing", 1.0);

        sc.scan.subscan_bounds = j.contains("subscans") ? io::ranges_from_json(j["subscans"])
                                                        : std::vector<IndexRange>{geo.all()};
        sc.scan.kernel = parse_kernel(j.value("kernel", std::string("cubic")));

        if (j.contains("schedule") && j["schedule"].is_array()) {
            sc.schedule.params = io::trajectory_from_json(j["schedule"]);
        } else if (j.contains("schedule")) {
            const auto& s = j["schedule"];
            const MotionKind kind = parse_motion_kind(s.at("model").get<std::string>());
            for (const auto& raw : s.at("params")) {
                AffineParams p{MotionModel{kind, g.ndim}, raw.get<std::vector<double>>()};
                p.validate();
                sc.schedule.params.push_back(std::move(p));
            }
        }
        sc.scan.motion_model = sc.schedule.params.empty() ? MotionModel{MotionKind::rigid, g.ndim}
                                                          : sc.schedule.params.front().model;
        if (sc.schedule.params.empty())
            sc.schedule.params.assign(sc.scan.n_subscans(), AffineParams::identity(sc.scan.motion_model));
        for (const auto& p : sc.schedule.params)
            check(p.model == sc.scan.motion_model, "io", "schedule entries must share one motion model");
        sc.schedule.noise_std_fraction = j.value("noise", 0.0);
        sc.scan.validate();
        check(sc.schedule.params.size() == sc.scan.n_subscans(), "io", "schedule needs one entry per subscan");
        return sc;
    } catch (const nlohmann::json::exception& e) {
        throw Error("io", std::string("invalid scenario: ") + e.what());
    }
}

} // namespace samcirt

#endif // SAMCIRT_SCENARIO_HPP
