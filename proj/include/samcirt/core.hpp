#ifndef SAMCIRT_CORE_HPP
#define SAMCIRT_CORE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace samcirt {

/// Failure raised by any toolkit operation. The message is prefixed with the
/// module that detected it, e.g. "projector: shape mismatch".
class Error : public std::runtime_error {
public:
    Error(const std::string& module, const std::string& what)
        : std::runtime_error(module + ": " + what) {}
};

inline void check(bool cond, const char* module, const std::string& what) {
    if (!cond) throw Error(module, what);
}

/// Half-open index range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    [[nodiscard]] constexpr std::size_t size() const noexcept { return end - begin; }
    [[nodiscard]] constexpr bool empty() const noexcept { return end <= begin; }
    friend constexpr bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Checks that `ranges` are non-empty, ordered, disjoint and cover [0, total).
inline bool ranges_partition(std::span<const IndexRange> ranges, std::size_t total) {
    std::size_t next = 0;
    for (const auto& r : ranges) {
        if (r.empty() || r.begin != next) return false;
        next = r.end;
    }
    return !ranges.empty() && next == total;
}

/// Regular voxel grid. Axes are ordered (x, y[, z]); storage is row-major over
/// (z, y, x), so x is the fastest-varying index. 2D grids carry dims[2] == 1.
struct Grid {
    std::size_t ndim = 2;
    std::array<std::size_t, 3> dims{1, 1, 1};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    /// Rotation / warp center in voxel coordinates.
    std::array<double, 3> center{0.0, 0.0, 0.0};

    [[nodiscard]] std::size_t size() const noexcept { return dims[0] * dims[1] * dims[2]; }
    [[nodiscard]] std::size_t nx() const noexcept { return dims[0]; }
    [[nodiscard]] std::size_t ny() const noexcept { return dims[1]; }
    [[nodiscard]] std::size_t nz() const noexcept { return dims[2]; }
    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k = 0) const noexcept {
        return (k * dims[1] + j) * dims[0] + i;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

    /// 2D grid with the default center (n - 1) / 2 per axis.
    static Grid make_2d(std::size_t nx, std::size_t ny, double spacing = 1.0) {
        Grid g;
        g.ndim = 2;
        g.dims = {nx, ny, 1};
        g.spacing = {spacing, spacing, 1.0};
        g.center = {(double(nx) - 1.0) / 2.0, (double(ny) - 1.0) / 2.0, 0.0};
        return g;
    }
    static Grid make_3d(std::size_t nx, std::size_t ny, std::size_t nz, double spacing = 1.0) {
        Grid g;
        g.ndim = 3;
        g.dims = {nx, ny, nz};
        g.spacing = {spacing, spacing, spacing};
        g.center = {(double(nx) - 1.0) / 2.0, (double(ny) - 1.0) / 2.0, (double(nz) - 1.0) / 2.0};
        return g;
    }

    void validate() const {
        check(ndim == 2 || ndim == 3, "volume", "grid must have 2 or 3 axes");
        for (std::size_t a = 0; a < 3; ++a) {
            check(dims[a] >= 1, "volume", "all extents must be >= 1");
            check(spacing[a] > 0.0 && std::isfinite(spacing[a]), "volume", "spacing must be > 0");
            check(std::isfinite(center[a]), "volume", "center must be finite");
        }
        check(ndim == 3 || dims[2] == 1, "volume", "2D grid must have dims[2] == 1");
    }
};

/// Dense scalar field on a Grid.
struct Volume {
    Grid grid;
    std::vector<double> data;

    Volume() = default;
    explicit Volume(const Grid& g, double fill = 0.0) : grid(g), data(g.size(), fill) {}
    Volume(const Grid& g, std::vector<double> values) : grid(g), data(std::move(values)) { validate(); }

    [[nodiscard]] std::size_t size() const noexcept { return data.size(); }
    double& operator[](std::size_t i) noexcept { return data[i]; }
    double operator[](std::size_t i) const noexcept { return data[i]; }
    double& at(std::size_t i, std::size_t j, std::size_t k = 0) noexcept { return data[grid.index(i, j, k)]; }
    [[nodiscard]] double at(std::size_t i, std::size_t j, std::size_t k = 0) const noexcept {
        return data[grid.index(i, j, k)];
    }

    void validate() const {
        grid.validate();
        check(data.size() == grid.size(), "volume", "data length must equal product of dims");
        check(std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); }), "volume",
              "all values must be finite");
    }
};

// Small dense-vector helpers used across modules. Reductions run sequentially
// in index order so results do not depend on the thread count.

inline double dot(std::span<const double> a, std::span<const double> b) {
    check(a.size() == b.size(), "core", "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return dot(a, a); }
inline double norm(std::span<const double> a) { return std::sqrt(norm2(a)); }

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    check(x.size() == y.size(), "core", "axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline std::vector<double> subtract(std::span<const double> a, std::span<const double> b) {
    check(a.size() == b.size(), "core", "subtract: length mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

} // namespace samcirt

#endif // SAMCIRT_CORE_HPP
