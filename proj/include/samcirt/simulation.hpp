#ifndef SAMCIRT_SIMULATION_HPP
#define SAMCIRT_SIMULATION_HPP

// Synthetic phantoms and dynamic-scan simulation: each subscan sees the
// phantom warped by its own AffineParams, projected, plus Gaussian noise on
// the line integrals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "samcirt/core.hpp"
#include "samcirt/model.hpp"
#include "samcirt/parallel.hpp"
#include "samcirt/projector.hpp"
#include "samcirt/random.hpp"
#include "samcirt/warp.hpp"

namespace samcirt {

enum class PhantomKind { gaussian_blobs, ellipsoids, shepp_logan, diamond };

inline std::string_view to_string(PhantomKind k) {
    switch (k) {
    case PhantomKind::gaussian_blobs: return "gaussian-blobs";
    case PhantomKind::ellipsoids: return "ellipsoids";
    case PhantomKind::shepp_logan: return "shepp-logan-like";
    case PhantomKind::diamond: return "binary-diamond-like";
    }
    return "?";
}

inline PhantomKind parse_phantom_kind(std::string_view s) {
    if (s == "gaussian-blobs") return PhantomKind::gaussian_blobs;
    if (s == "ellipsoids") return PhantomKind::ellipsoids;
    if (s == "shepp-logan-like" || s == "shepp-logan") return PhantomKind::shepp_logan;
    if (s == "binary-diamond-like" || s == "diamond") return PhantomKind::diamond;
    throw Error("simulation", "unknown phantom kind '" + std::string(s) + "'");
}

struct PhantomSpec {
    PhantomKind kind = PhantomKind::gaussian_blobs;
    Grid grid = Grid::make_2d(64, 64);
    std::uint64_t seed = 0;
    /// Gaussian blur std in voxels applied after rasterization; 0 disables.
    double smoothness = 0.0;
    /// Number of blobs / ellipsoids; 0 selects the kind's default.
    std::size_t count = 0;

    void validate() const {
        grid.validate();
        for (std::size_t a = 0; a < grid.ndim; ++a)
            check(grid.dims[a] >= 8, "simulation", "phantom dims must be >= 8 per axis");
        check(smoothness >= 0.0 && std::isfinite(smoothness), "simulation", "blur std must be >= 0");
    }
};

/// Separable Gaussian blur with zero padding outside the grid.
inline Volume gaussian_blur(const Volume& v, double sigma) {
    if (sigma <= 0.0) return v;
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> taps(std::size_t(2 * r + 1));
    double sum = 0.0;
    for (int d = -r; d <= r; ++d) sum += taps[std::size_t(d + r)] = std::exp(-0.5 * d * d / (sigma * sigma));
    for (double& t : taps) t /= sum;
    Volume cur = v;
    const Grid& g = v.grid;
    for (std::size_t axis = 0; axis < g.ndim; ++axis) {
        Volume next(g);
        const std::size_t stride = axis == 0 ? 1 : axis == 1 ? g.nx() : g.nx() * g.ny();
        const auto n = static_cast<std::ptrdiff_t>(g.dims[axis]);
        parallel::for_chunks(g.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t u = lo; u < hi; ++u) {
                const auto pos = static_cast<std::ptrdiff_t>((u / stride) % g.dims[axis]);
                double acc = 0.0;
                for (int d = -r; d <= r; ++d) {
                    const std::ptrdiff_t q = pos + d;
                    if (q < 0 || q >= n) continue;
                    acc += taps[std::size_t(d + r)] * cur.data[std::size_t(std::ptrdiff_t(u) + d * std::ptrdiff_t(stride))];
                }
                next.data[u] = acc;
            }
        });
        cur = std::move(next);
    }
    return cur;
}

namespace detail {

/// Voxel position relative to the grid center, scaled so the half-extent of
/// each axis is 1.
inline Vec3 normalized_coord(const Grid& g, std::size_t idx) {
    const Vec3 u = voxel_coord(g, idx);
    Vec3 out{};
    for (std::size_t a = 0; a < g.ndim; ++a) out[a] = (u[a] - g.center[a]) / (0.5 * double(g.dims[a]));
    return out;
}

struct Ellipsoid {
    Vec3 center{};
    Vec3 axes{1, 1, 1};
    double angle = 0.0; // about z
    double value = 1.0;

    [[nodiscard]] bool contains(const Vec3& q, std::size_t ndim) const {
        const double c = std::cos(angle), s = std::sin(angle);
        const double dx = q[0] - center[0], dy = q[1] - center[1], dz = q[2] - center[2];
        const double rx = c * dx + s * dy, ry = -s * dx + c * dy;
        double r = (rx * rx) / (axes[0] * axes[0]) + (ry * ry) / (axes[1] * axes[1]);
        if (ndim == 3) r += (dz * dz) / (axes[2] * axes[2]);
        return r <= 1.0;
    }
};

inline Volume paint_ellipsoids(const Grid& g, const std::vector<Ellipsoid>& es, bool additive) {
    Volume v(g);
    for (std::size_t u = 0; u < g.size(); ++u) {
        const Vec3 q = normalized_coord(g, u);
        double val = 0.0;
        for (const auto& e : es) {
            if (!e.contains(q, g.ndim)) continue;
            val = additive ? val + e.value : e.value;
        }
        v.data[u] = val;
    }
    return v;
}

inline Volume gaussian_blobs(const PhantomSpec& spec) {
    const Grid& g = spec.grid;
    const std::size_t count = spec.count ? spec.count : 12;
    random::Stream rng(spec.seed, 1);
    struct Blob {
        Vec3 c;
        double sigma, amp;
    };
    std::vector<Blob> blobs;
    for (std::size_t b = 0; b < count; ++b) {
        Blob bl{{0, 0, 0}, 0, 0};
        for (std::size_t a = 0; a < g.ndim; ++a) bl.c[a] = rng.uniform(-0.45, 0.45);
        bl.sigma = rng.uniform(0.08, 0.2);
        bl.amp = rng.uniform(0.4, 1.0);
        blobs.push_back(bl);
    }
    Volume v(g);
    parallel::for_chunks(g.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t u = lo; u < hi; ++u) {
            const Vec3 q = normalized_coord(g, u);
            double s = 0.0;
            for (const auto& bl : blobs) {
                double r2 = 0.0;
                for (std::size_t a = 0; a < g.ndim; ++a) r2 += (q[a] - bl.c[a]) * (q[a] - bl.c[a]);
                s += bl.amp * std::exp(-0.5 * r2 / (bl.sigma * bl.sigma));
            }
            v.data[u] = s;
        }
    });
    return v;
}

inline Volume random_ellipsoids(const PhantomSpec& spec) {
    const std::size_t count = spec.count ? spec.count : 6;
    random::Stream rng(spec.seed, 2);
    std::vector<Ellipsoid> es;
    // Body: centered, value 1.
    es.push_back({{0, 0, 0}, {0.75, 0.6, 0.7}, 0.0, 1.0});
    for (std::size_t k = 1; k < count; ++k) {
        Ellipsoid e;
        for (std::size_t a = 0; a < spec.grid.ndim; ++a) e.center[a] = rng.uniform(-0.35, 0.35);
        for (std::size_t a = 0; a < 3; ++a) e.axes[a] = rng.uniform(0.08, 0.25);
        e.angle = rng.uniform(0.0, std::numbers::pi);
        e.value = rng.uniform(0.2, 0.9);
        es.push_back(e);
    }
    return paint_ellipsoids(spec.grid, es, false);
}

inline Volume shepp_logan(const PhantomSpec& spec) {
    // Modified Shepp-Logan ellipses (Toft), extended to ellipsoids in 3D;
    // intensities are additive and clipped to [0, 1] afterwards.
    constexpr double deg = std::numbers::pi / 180.0;
    const std::vector<Ellipsoid> es = {
        {{0, 0, 0}, {0.69, 0.92, 0.81}, 0.0, 1.0},
        {{0, -0.0184, 0}, {0.6624, 0.874, 0.78}, 0.0, -0.8},
        {{0.22, 0, 0}, {0.11, 0.31, 0.22}, -18 * deg, -0.2},
        {{-0.22, 0, 0}, {0.16, 0.41, 0.28}, 18 * deg, -0.2},
        {{0, 0.35, 0}, {0.21, 0.25, 0.41}, 0.0, 0.1},
        {{0, 0.1, 0}, {0.046, 0.046, 0.05}, 0.0, 0.1},
        {{0, -0.1, 0}, {0.046, 0.046, 0.05}, 0.0, 0.1},
        {{-0.08, -0.605, 0}, {0.046, 0.023, 0.05}, 0.0, 0.1},
        {{0, -0.606, 0}, {0.023, 0.023, 0.02}, 0.0, 0.1},
        {{0.06, -0.605, 0}, {0.023, 0.046, 0.02}, 0.0, 0.1},
    };
    return paint_ellipsoids(spec.grid, es, true);
}

/// Faceted convex solid shaped like a round brilliant: table plane on top,
/// crown and pavilion facets, and a polygonal girdle.
inline Volume diamond(const PhantomSpec& spec) {
    const Grid& g = spec.grid;
    random::Stream rng(spec.seed, 3);
    const double twist = rng.uniform(0.0, std::numbers::pi / 8.0);
    const std::size_t facets = spec.count ? spec.count : 8;
    // Half-spaces n . q <= d in normalized coordinates; the vertical axis is
    // y in 2D and z in 3D.
    struct Plane {
        Vec3 n;
        double d;
    };
    std::vector<Plane> planes;
    const std::size_t up = g.ndim == 3 ? 2 : 1;
    auto vertical = [&](double horiz_x, double horiz_y, double v) {
        Vec3 n{0, 0, 0};
        n[0] = horiz_x;
        if (g.ndim == 3) n[1] = horiz_y;
        n[up] = v;
        return n;
    };
    Vec3 table{0, 0, 0};
    table[up] = 1.0;
    planes.push_back({table, 0.35});
    const std::size_t around = g.ndim == 3 ? facets : 2;
    for (std::size_t k = 0; k < around; ++k) {
        const double phi = twist + 2.0 * std::numbers::pi * double(k) / double(around);
        const double cx = std::cos(phi), cy = std::sin(phi);
        const double hx = g.ndim == 3 ? cx : (k == 0 ? 1.0 : -1.0);
        const double hy = g.ndim == 3 ? cy : 0.0;
        planes.push_back({vertical(hx, hy, 0.0), 0.75});                           // girdle
        planes.push_back({vertical(hx * 0.8, hy * 0.8, 0.6), 0.75});                // crown
        planes.push_back({vertical(hx * 0.55, hy * 0.55, -0.835), 0.5});            // pavilion
    }
    Volume v(g);
    for (std::size_t u = 0; u < g.size(); ++u) {
        const Vec3 q = normalized_coord(g, u);
        bool inside = true;
        for (const auto& p : planes) {
            if (p.n[0] * q[0] + p.n[1] * q[1] + p.n[2] * q[2] > p.d) {
                inside = false;
                break;
            }
        }
        v.data[u] = inside ? 1.0 : 0.0;
    }
    return v;
}

} // namespace detail

/// Deterministic phantom with values in [0, 1].
inline Volume make_phantom(const PhantomSpec& spec) {
    spec.validate();
    Volume v;
    switch (spec.kind) {
    case PhantomKind::gaussian_blobs: v = detail::gaussian_blobs(spec); break;
    case PhantomKind::ellipsoids: v = detail::random_ellipsoids(spec); break;
    case PhantomKind::shepp_logan: v = detail::shepp_logan(spec); break;
    case PhantomKind::diamond: v = detail::diamond(spec); break;
    }
    v = gaussian_blur(v, spec.smoothness);
    for (double& x : v.data) x = std::clamp(x, 0.0, 1.0);
    if (spec.kind == PhantomKind::gaussian_blobs) {
        const double peak = *std::max_element(v.data.begin(), v.data.end());
        if (peak > 0.0)
            for (double& x : v.data) x /= peak;
    }
    return v;
}

struct MotionSchedule {
    std::vector<AffineParams> params;
    /// Noise std as a fraction of the clean stack's maximum value.
    double noise_std_fraction = 0.0;
};

/// b_i = W_i M(p_i) phantom + noise, with noise std
/// noise_std_fraction * max(clean b).
inline ProjStack simulate_scan(const Volume& phantom, const ScanModel& scan, const MotionSchedule& schedule,
                               std::uint64_t seed) {
    phantom.validate();
    scan.validate();
    check(schedule.params.size() == scan.n_subscans(), "simulation", "schedule needs one entry per subscan");
    check(schedule.noise_std_fraction >= 0.0 && std::isfinite(schedule.noise_std_fraction), "simulation",
          "noise fraction must be >= 0");
    ProjStack b;
    b.geometry = scan.geometry;
    b.subscan_bounds = scan.subscan_bounds;
    b.data = ProjArray(scan.geometry.n_angles(), scan.geometry.det_rows, scan.geometry.det_count);
    for (std::size_t i = 0; i < scan.n_subscans(); ++i) {
        const Volume moved = warp_apply(phantom, schedule.params[i], scan.kernel);
        const ProjArray part = forward_project(moved, scan.geometry, scan.subscan_bounds[i]);
        std::copy(part.data.begin(), part.data.end(),
                  b.data.data.begin() + std::ptrdiff_t(scan.subscan_bounds[i].begin * b.data.image_size()));
    }
    if (schedule.noise_std_fraction > 0.0) {
        const double peak = *std::max_element(b.data.data.begin(), b.data.data.end());
        const double sigma = schedule.noise_std_fraction * peak;
        parallel::for_chunks(b.data.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t n = lo; n < hi; ++n) b.data.data[n] += sigma * random::normal(seed, 0, n);
        });
    }
    return b;
}

} // namespace samcirt

#endif // SAMCIRT_SIMULATION_HPP
