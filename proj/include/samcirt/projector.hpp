#ifndef SAMCIRT_PROJECTOR_HPP
#define SAMCIRT_PROJECTOR_HPP

// Parallel-beam Joseph projector and its exact transpose.
//
// Conventions:
//   * the rotation axis passes through Grid::center (z axis in 3D);
//   * the ray direction at angle theta is d = (-sin theta, cos theta), so
//     angle 0 integrates along +y; the detector axis is e = (cos theta, sin theta);
//   * detector bin k sits at offset (k - (det_count - 1) / 2) * det_spacing;
//   * in 3D, detector row r coincides with voxel slice z = r, so
//     det_rows must equal the grid's nz;
//   * rays are sampled once per voxel edge along the dominant axis, with
//     linear interpolation across the transverse axis. Samples outside the
//     grid contribute 0.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "samcirt/core.hpp"
#include "samcirt/parallel.hpp"

namespace samcirt {

struct Geometry {
    std::vector<double> angles;
    std::size_t det_count = 1;
    /// 1 for 2D scans; the number of z slices for 3D scans.
    std::size_t det_rows = 1;
    double det_spacing = 1.0;

    [[nodiscard]] std::size_t n_angles() const noexcept { return angles.size(); }
    [[nodiscard]] IndexRange all() const noexcept { return {0, angles.size()}; }

    void validate() const {
        check(!angles.empty(), "projector", "geometry needs at least one angle");
        check(det_count >= 1 && det_rows >= 1, "projector", "detector must have at least one element");
        check(det_spacing > 0.0 && std::isfinite(det_spacing), "projector", "det_spacing must be > 0");
        for (double a : angles) check(std::isfinite(a), "projector", "angles must be finite");
    }

    friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Projection images shaped angles x rows x cols, cols fastest.
struct ProjArray {
    std::size_t n_angles = 0;
    std::size_t rows = 1;
    std::size_t cols = 0;
    std::vector<double> data;

    ProjArray() = default;
    ProjArray(std::size_t a, std::size_t r, std::size_t c, double fill = 0.0)
        : n_angles(a), rows(r), cols(c), data(a * r * c, fill) {}

    [[nodiscard]] std::size_t size() const noexcept { return data.size(); }
    [[nodiscard]] std::size_t image_size() const noexcept { return rows * cols; }
    double& at(std::size_t a, std::size_t r, std::size_t c) noexcept { return data[(a * rows + r) * cols + c]; }
    [[nodiscard]] double at(std::size_t a, std::size_t r, std::size_t c) const noexcept {
        return data[(a * rows + r) * cols + c];
    }
    [[nodiscard]] std::span<const double> image(std::size_t a) const noexcept {
        return std::span<const double>(data).subspan(a * image_size(), image_size());
    }

    /// Copy of the angle range [r.begin, r.end).
    [[nodiscard]] ProjArray slice(IndexRange r) const {
        check(r.end <= n_angles && !r.empty(), "projector", "slice: angle range out of bounds");
        ProjArray out(r.size(), rows, cols);
        std::copy(data.begin() + std::ptrdiff_t(r.begin * image_size()),
                  data.begin() + std::ptrdiff_t(r.end * image_size()), out.data.begin());
        return out;
    }
};

/// Measured data b together with its geometry and subscan layout.
struct ProjStack {
    Geometry geometry;
    std::vector<IndexRange> subscan_bounds;
    ProjArray data;

    [[nodiscard]] std::size_t n_subscans() const noexcept { return subscan_bounds.size(); }
    [[nodiscard]] ProjArray subscan(std::size_t i) const {
        check(i < subscan_bounds.size(), "projector", "subscan index out of range");
        return data.slice(subscan_bounds[i]);
    }

    void validate() const {
        geometry.validate();
        check(ranges_partition(subscan_bounds, geometry.n_angles()), "projector",
              "subscan bounds must be non-empty, ordered, disjoint and cover all angles");
        check(data.n_angles == geometry.n_angles() && data.rows == geometry.det_rows &&
                  data.cols == geometry.det_count && data.size() == data.n_angles * data.rows * data.cols,
              "projector", "projection data shape does not match geometry");
        check(all_finite(data.data), "projector", "projection data must be finite");
    }
};

namespace detail {

inline void check_consistent(const Grid& grid, const Geometry& geom, IndexRange range) {
    grid.validate();
    geom.validate();
    check(!range.empty(), "projector", "empty angle range");
    check(range.end <= geom.n_angles(), "projector", "angle range exceeds geometry");
    if (grid.ndim == 2) {
        check(geom.det_rows == 1, "projector", "2D volume requires det_rows == 1");
    } else {
        check(geom.det_rows == grid.nz(), "projector", "3D volume requires det_rows == nz");
    }
}

/// Visits (voxel index within the slice, weight) for every interpolation tap
/// of the ray at detector offset tau. The visitor sees the same taps in the
/// same order for forward and back projection, which makes them exact
/// transposes of each other.
template <typename Visit>
void trace_ray(const Grid& grid, double theta, double tau, Visit&& visit) {
    const double dx = -std::sin(theta), dy = std::cos(theta);
    const double ex = std::cos(theta), ey = std::sin(theta);
    const auto nx = static_cast<std::ptrdiff_t>(grid.nx());
    const auto ny = static_cast<std::ptrdiff_t>(grid.ny());
    const double sx = grid.spacing[0], sy = grid.spacing[1];
    const double cx = grid.center[0], cy = grid.center[1];

    if (std::abs(dy) >= std::abs(dx)) {
        const double w = sy / std::abs(dy);
        for (std::ptrdiff_t j = 0; j < ny; ++j) {
            const double y = (double(j) - cy) * sy;
            const double s = (y - tau * ey) / dy;
            const double fi = (tau * ex + s * dx) / sx + cx;
            const double f0 = std::floor(fi);
            const auto i0 = static_cast<std::ptrdiff_t>(f0);
            const double frac = fi - f0;
            if (i0 >= 0 && i0 < nx) visit(std::size_t(j * nx + i0), w * (1.0 - frac));
            if (i0 + 1 >= 0 && i0 + 1 < nx) visit(std::size_t(j * nx + i0 + 1), w * frac);
        }
    } else {
        const double w = sx / std::abs(dx);
        for (std::ptrdiff_t i = 0; i < nx; ++i) {
            const double x = (double(i) - cx) * sx;
            const double s = (x - tau * ex) / dx;
            const double fj = (tau * ey + s * dy) / sy + cy;
            const double f0 = std::floor(fj);
            const auto j0 = static_cast<std::ptrdiff_t>(f0);
            const double frac = fj - f0;
            if (j0 >= 0 && j0 < ny) visit(std::size_t(j0 * nx + i), w * (1.0 - frac));
            if (j0 + 1 >= 0 && j0 + 1 < ny) visit(std::size_t((j0 + 1) * nx + i), w * frac);
        }
    }
}

inline double detector_offset(const Geometry& geom, std::size_t k) {
    return (double(k) - (double(geom.det_count) - 1.0) / 2.0) * geom.det_spacing;
}

} // namespace detail

/// Line integrals of `values` (laid out on `grid`) for the angles in `range`.
inline ProjArray forward_project(const Grid& grid, std::span<const double> values, const Geometry& geom,
                                 IndexRange range) {
    detail::check_consistent(grid, geom, range);
    check(values.size() == grid.size(), "projector", "volume data does not match grid");
    ProjArray out(range.size(), geom.det_rows, geom.det_count);
    const std::size_t slice = grid.nx() * grid.ny();
    const std::size_t n_rows = range.size() * geom.det_rows;
    parallel::for_each_index(n_rows, [&](std::size_t ar) {
        const std::size_t a = ar / geom.det_rows;
        const std::size_t r = ar % geom.det_rows;
        const double theta = geom.angles[range.begin + a];
        const double* src = values.data() + r * slice;
        for (std::size_t k = 0; k < geom.det_count; ++k) {
            double acc = 0.0;
            detail::trace_ray(grid, theta, detail::detector_offset(geom, k),
                              [&](std::size_t v, double w) { acc += w * src[v]; });
            out.at(a, r, k) = acc;
        }
    });
    return out;
}

inline ProjArray forward_project(const Volume& vol, const Geometry& geom, IndexRange range) {
    return forward_project(vol.grid, vol.data, geom, range);
}

/// Exact transpose of forward_project over the same angle range.
inline Volume back_project(const ProjArray& proj, const Grid& grid, const Geometry& geom, IndexRange range) {
    detail::check_consistent(grid, geom, range);
    check(proj.n_angles == range.size() && proj.rows == geom.det_rows && proj.cols == geom.det_count &&
              proj.data.size() == proj.n_angles * proj.rows * proj.cols,
          "projector", "projection shape mismatch");
    Volume out(grid);
    const std::size_t slice = grid.nx() * grid.ny();
    const std::size_t n_rows = range.size() * geom.det_rows;
    parallel::scatter_reduce(n_rows, out.data, [&](std::size_t lo, std::size_t hi, std::span<double> buf) {
        for (std::size_t ar = lo; ar < hi; ++ar) {
            const std::size_t a = ar / geom.det_rows;
            const std::size_t r = ar % geom.det_rows;
            const double theta = geom.angles[range.begin + a];
            double* dst = buf.data() + r * slice;
            for (std::size_t k = 0; k < geom.det_count; ++k) {
                const double y = proj.at(a, r, k);
                if (y == 0.0) continue;
                detail::trace_ray(grid, theta, detail::detector_offset(geom, k),
                                  [&](std::size_t v, double w) { dst[v] += w * y; });
            }
        }
    });
    return out;
}

} // namespace samcirt

#endif // SAMCIRT_PROJECTOR_HPP
