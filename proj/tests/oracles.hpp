#pragma once

// Reference implementations used only by the tests. Each one is written from
// the defining formula rather than from the library's code path: dense
// matrices from unit vectors, hat/cubic kernels summed over every voxel,
// SSIM from explicit 2D windows, and exhaustive recursion for partitions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "samcirt/samcirt.hpp"

namespace oracle {

using samcirt::Grid;

/// Row-major dense matrix.
struct Dense {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;
    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

/// Matrix of a linear map, column by column from unit inputs.
inline Dense matrix_of(std::size_t n_in, std::size_t n_out,
                       const std::function<std::vector<double>(const std::vector<double>&)>& op) {
    Dense m{n_out, n_in, std::vector<double>(n_in * n_out, 0.0)};
    std::vector<double> e(n_in, 0.0);
    for (std::size_t c = 0; c < n_in; ++c) {
        e[c] = 1.0;
        const auto col = op(e);
        for (std::size_t r = 0; r < n_out; ++r) m(r, c) = col[r];
        e[c] = 0.0;
    }
    return m;
}

inline double max_abs_transpose_gap(const Dense& a, const Dense& at) {
    double worst = 0.0;
    for (std::size_t r = 0; r < a.rows; ++r)
        for (std::size_t c = 0; c < a.cols; ++c) worst = std::max(worst, std::abs(a(r, c) - at(c, r)));
    return worst;
}

inline double hat(double s) { return std::max(0.0, 1.0 - std::abs(s)); }

/// Keys cubic convolution kernel with a = -1/2.
inline double keys(double s) {
    s = std::abs(s);
    if (s <= 1.0) return 1.5 * s * s * s - 2.5 * s * s + 1.0;
    if (s < 2.0) return -0.5 * s * s * s + 2.5 * s * s - 4.0 * s + 2.0;
    return 0.0;
}

/// Joseph line integral of one ray through a 2D slice: the ray is sampled
/// where it crosses each row (or column) of voxel centres, and each sample
/// spreads over that row with a hat function.
inline double joseph_ray(const Grid& g, std::span<const double> slice, double theta, double tau) {
    const double dx = -std::sin(theta), dy = std::cos(theta);
    const double ex = std::cos(theta), ey = std::sin(theta);
    double sum = 0.0;
    if (std::abs(dy) >= std::abs(dx)) {
        for (std::size_t j = 0; j < g.ny(); ++j) {
            const double y = (double(j) - g.center[1]) * g.spacing[1];
            const double s = (y - tau * ey) / dy;
            const double x = tau * ex + s * dx;
            for (std::size_t i = 0; i < g.nx(); ++i) {
                const double xi = (double(i) - g.center[0]) * g.spacing[0];
                sum += g.spacing[1] / std::abs(dy) * hat((x - xi) / g.spacing[0]) * slice[j * g.nx() + i];
            }
        }
    } else {
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const double x = (double(i) - g.center[0]) * g.spacing[0];
            const double s = (x - tau * ex) / dx;
            const double y = tau * ey + s * dy;
            for (std::size_t j = 0; j < g.ny(); ++j) {
                const double yj = (double(j) - g.center[1]) * g.spacing[1];
                sum += g.spacing[0] / std::abs(dx) * hat((y - yj) / g.spacing[1]) * slice[j * g.nx() + i];
            }
        }
    }
    return sum;
}

inline samcirt::ProjArray project(const samcirt::Volume& v, const samcirt::Geometry& geo) {
    const Grid& g = v.grid;
    samcirt::ProjArray out(geo.n_angles(), geo.det_rows, geo.det_count);
    const std::size_t slice = g.nx() * g.ny();
    for (std::size_t a = 0; a < geo.n_angles(); ++a)
        for (std::size_t r = 0; r < geo.det_rows; ++r)
            for (std::size_t k = 0; k < geo.det_count; ++k) {
                const double tau = (double(k) - (double(geo.det_count) - 1.0) / 2.0) * geo.det_spacing;
                out.at(a, r, k) =
                    joseph_ray(g, std::span<const double>(v.data).subspan(r * slice, slice), geo.angles[a], tau);
            }
    return out;
}

/// Pull-back warp summing kernel(q - v) over every voxel v.
inline samcirt::Volume warp(const samcirt::Volume& x, const samcirt::AffineParams& p, samcirt::InterpKernel k) {
    const Grid& g = x.grid;
    const samcirt::Affine m = samcirt::to_matrix(p);
    const auto kern = [k](double s) { return k == samcirt::InterpKernel::linear ? hat(s) : keys(s); };
    samcirt::Volume out(g);
    for (std::size_t uz = 0; uz < g.nz(); ++uz)
        for (std::size_t uy = 0; uy < g.ny(); ++uy)
            for (std::size_t ux = 0; ux < g.nx(); ++ux) {
                const double d[3] = {ux - g.center[0], uy - g.center[1], uz - g.center[2]};
                double q[3];
                for (int r = 0; r < 3; ++r)
                    q[r] = m.A[r][0] * d[0] + m.A[r][1] * d[1] + m.A[r][2] * d[2] + g.center[r] + m.t[r];
                double acc = 0.0;
                for (std::size_t vz = 0; vz < g.nz(); ++vz) {
                    const double wz = g.ndim == 3 ? kern(q[2] - double(vz)) : 1.0;
                    if (wz == 0.0) continue;
                    for (std::size_t vy = 0; vy < g.ny(); ++vy) {
                        const double wy = kern(q[1] - double(vy));
                        if (wy == 0.0) continue;
                        for (std::size_t vx = 0; vx < g.nx(); ++vx)
                            acc += wz * wy * kern(q[0] - double(vx)) * x.at(vx, vy, vz);
                    }
                }
                out.at(ux, uy, uz) = acc;
            }
    return out;
}

/// SSIM with an explicit truncated 2D Gaussian window, renormalized over the
/// in-image part of the window.
inline double ssim(std::span<const double> a, std::span<const double> b, std::size_t rows, std::size_t cols,
                   double sigma = 1.5, double k1 = 0.01, double k2 = 0.03, double range = 1.0) {
    const int rad = int(std::floor(3.5 * sigma));
    const double c1 = (k1 * range) * (k1 * range), c2 = (k2 * range) * (k2 * range);
    double total = 0.0;
    for (int y = 0; y < int(rows); ++y)
        for (int x = 0; x < int(cols); ++x) {
            double ws = 0, ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int dy = -rad; dy <= rad; ++dy)
                for (int dx = -rad; dx <= rad; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= int(rows) || xx < 0 || xx >= int(cols)) continue;
                    const double w = std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
                    const double va = a[std::size_t(yy) * cols + std::size_t(xx)];
                    const double vb = b[std::size_t(yy) * cols + std::size_t(xx)];
                    ws += w;
                    ma += w * va;
                    mb += w * vb;
                    saa += w * va * va;
                    sbb += w * vb * vb;
                    sab += w * va * vb;
                }
            ma /= ws;
            mb /= ws;
            const double va = saa / ws - ma * ma, vb = sbb / ws - mb * mb, cab = sab / ws - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    return total / double(rows * cols);
}

inline double variance(std::span<const double> s) {
    double m = 0.0;
    for (double v : s) m += v;
    m /= double(s.size());
    double acc = 0.0;
    for (double v : s) acc += (v - m) * (v - m);
    return acc / double(s.size());
}

/// Minimum of n + lambda * sum Var over all contiguous partitions, by
/// recursion on the first segment.
inline double best_partition_objective(std::span<const double> s, double lambda) {
    if (s.empty()) return 0.0;
    double best = INFINITY;
    for (std::size_t j = 1; j <= s.size(); ++j)
        best = std::min(best, 1.0 + lambda * variance(s.first(j)) + best_partition_objective(s.subspan(j), lambda));
    return best;
}

/// Conjugate gradients on the normal equations W^T W x = W^T b.
inline std::vector<double> cgls(const std::function<std::vector<double>(const std::vector<double>&)>& fwd,
                                const std::function<std::vector<double>(const std::vector<double>&)>& adj,
                                const std::vector<double>& b, std::size_t n, std::size_t iters) {
    std::vector<double> x(n, 0.0), r = b, s = adj(r), p = s;
    double gamma = samcirt::norm2(s);
    for (std::size_t k = 0; k < iters && gamma > 1e-30; ++k) {
        const auto q = fwd(p);
        const double alpha = gamma / samcirt::norm2(q);
        samcirt::axpy(alpha, p, x);
        samcirt::axpy(-alpha, q, r);
        s = adj(r);
        const double g2 = samcirt::norm2(s);
        for (std::size_t i = 0; i < n; ++i) p[i] = s[i] + g2 / gamma * p[i];
        gamma = g2;
    }
    return x;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) {
    samcirt::random::Stream rng(seed, stream);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

inline std::vector<double> angles(std::size_t n, double span = std::numbers::pi) {
    std::vector<double> a(n);
    for (std::size_t k = 0; k < n; ++k) a[k] = span * double(k) / double(n);
    return a;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

} // namespace oracle
