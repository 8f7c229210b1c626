#ifndef SAMCIRT_WARP_HPP
#define SAMCIRT_WARP_HPP

// Affine warp operator M(p), its transpose, and the Jacobian of M(p)x with
// respect to the motion parameters.
//
// Pull-back convention: out(u) = x(u_hat) with
//     u_hat = A (u - c) + c + t,
// u and c in voxel coordinates (x, y[, z]). A positive translation therefore
// moves image content towards -t. Reads outside the grid return 0.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "samcirt/core.hpp"
#include "samcirt/parallel.hpp"

namespace samcirt {

enum class MotionKind { general, rigid, scaling, translation };

/// Physical role of a parameter; the optimizer scales initial steps per group.
enum class ParamGroup { matrix, rotation, translation, scale };

inline std::string_view to_string(MotionKind k) {
    switch (k) {
    case MotionKind::general: return "general";
    case MotionKind::rigid: return "rigid";
    case MotionKind::scaling: return "scaling";
    case MotionKind::translation: return "translation";
    }
    return "?";
}

inline MotionKind parse_motion_kind(std::string_view s) {
    if (s == "general" || s == "affine") return MotionKind::general;
    if (s == "rigid") return MotionKind::rigid;
    if (s == "scaling") return MotionKind::scaling;
    if (s == "translation") return MotionKind::translation;
    throw Error("warp", "unknown motion model '" + std::string(s) + "'");
}

struct MotionModel {
    MotionKind kind = MotionKind::rigid;
    std::size_t ndim = 3;

    [[nodiscard]] std::size_t param_count() const noexcept {
        switch (kind) {
        case MotionKind::general: return ndim * ndim + ndim;
        case MotionKind::rigid: return ndim == 3 ? 6 : 3;
        case MotionKind::scaling:
        case MotionKind::translation: return ndim;
        }
        return 0;
    }

    [[nodiscard]] ParamGroup group(std::size_t k) const noexcept {
        switch (kind) {
        case MotionKind::general: return k < ndim * ndim ? ParamGroup::matrix : ParamGroup::translation;
        case MotionKind::rigid: return k < (ndim == 3 ? 3u : 1u) ? ParamGroup::rotation : ParamGroup::translation;
        case MotionKind::scaling: return ParamGroup::scale;
        case MotionKind::translation: return ParamGroup::translation;
        }
        return ParamGroup::matrix;
    }

    /// Inverse of param_count for a given kind; throws when no dimension fits.
    static MotionModel from_count(MotionKind kind, std::size_t count) {
        for (std::size_t nd : {std::size_t{2}, std::size_t{3}}) {
            MotionModel m{kind, nd};
            if (m.param_count() == count) return m;
        }
        throw Error("warp", "parameter count " + std::to_string(count) + " does not fit model '" +
                                std::string(to_string(kind)) + "'");
    }

    friend bool operator==(const MotionModel&, const MotionModel&) = default;
};

struct AffineParams {
    MotionModel model;
    std::vector<double> raw;

    static AffineParams identity(const MotionModel& m) {
        AffineParams p{m, std::vector<double>(m.param_count(), 0.0)};
        if (m.kind == MotionKind::scaling) std::fill(p.raw.begin(), p.raw.end(), 1.0);
        if (m.kind == MotionKind::general)
            for (std::size_t d = 0; d < m.ndim; ++d) p.raw[d * m.ndim + d] = 1.0;
        return p;
    }

    void validate() const {
        check(model.ndim == 2 || model.ndim == 3, "warp", "motion model must be 2D or 3D");
        check(raw.size() == model.param_count(), "warp",
              "expected " + std::to_string(model.param_count()) + " parameters for model '" +
                  std::string(to_string(model.kind)) + "', got " + std::to_string(raw.size()));
        check(all_finite(raw), "warp", "parameters must be finite");
        if (model.kind == MotionKind::scaling)
            for (double s : raw) check(s > 0.0, "warp", "non-positive scale");
    }

    friend bool operator==(const AffineParams&, const AffineParams&) = default;
};

enum class InterpKernel { linear, cubic };

inline std::string_view to_string(InterpKernel k) { return k == InterpKernel::linear ? "linear" : "cubic"; }
inline InterpKernel parse_kernel(std::string_view s) {
    if (s == "linear") return InterpKernel::linear;
    if (s == "cubic") return InterpKernel::cubic;
    throw Error("warp", "unknown interpolation kernel '" + std::string(s) + "'");
}
constexpr int kernel_support(InterpKernel k) noexcept { return k == InterpKernel::linear ? 2 : 4; }

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

/// (A, t) with A embedded in 3x3 form; for 2D models the z row and column
/// are those of the identity (or zero for derivatives).
struct Affine {
    Mat3 A{};
    Vec3 t{};
};

inline Mat3 mat_identity() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

inline Mat3 mat_mul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

namespace detail {
inline Mat3 rot_x(double a, bool derivative = false) {
    const double c = std::cos(a), s = std::sin(a);
    if (derivative) return {{{0, 0, 0}, {0, -s, -c}, {0, c, -s}}};
    return {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}
inline Mat3 rot_y(double a, bool derivative = false) {
    const double c = std::cos(a), s = std::sin(a);
    if (derivative) return {{{-s, 0, c}, {0, 0, 0}, {-c, 0, -s}}};
    return {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}
inline Mat3 rot_z(double a, bool derivative = false) {
    const double c = std::cos(a), s = std::sin(a);
    if (derivative) return {{{-s, -c, 0}, {c, -s, 0}, {0, 0, 0}}};
    return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}
} // namespace detail

/// Affine map of the parameters. Rigid rotations compose as Rz * Ry * Rx
/// with raw = [theta_x, theta_y, theta_z, t...] in 3D and [theta, t...] in 2D.
inline Affine to_matrix(const AffineParams& p) {
    p.validate();
    const std::size_t nd = p.model.ndim;
    Affine m{mat_identity(), {0, 0, 0}};
    switch (p.model.kind) {
    case MotionKind::general:
        for (std::size_t r = 0; r < nd; ++r) {
            for (std::size_t c = 0; c < nd; ++c) m.A[r][c] = p.raw[r * nd + c];
            m.t[r] = p.raw[nd * nd + r];
        }
        break;
    case MotionKind::rigid:
        if (nd == 3) {
            m.A = mat_mul(detail::rot_z(p.raw[2]), mat_mul(detail::rot_y(p.raw[1]), detail::rot_x(p.raw[0])));
            m.t = {p.raw[3], p.raw[4], p.raw[5]};
        } else {
            m.A = detail::rot_z(p.raw[0]);
            m.t = {p.raw[1], p.raw[2], 0.0};
        }
        break;
    case MotionKind::scaling:
        for (std::size_t d = 0; d < nd; ++d) m.A[d][d] = p.raw[d];
        break;
    case MotionKind::translation:
        for (std::size_t d = 0; d < nd; ++d) m.t[d] = p.raw[d];
        break;
    }
    return m;
}

/// Displacement of the material point at the rotation center: under the
/// pull-back map the input at c appears in the output at c - A^{-1} t.
inline Vec3 center_displacement(const AffineParams& p) {
    const Affine m = to_matrix(p);
    const Mat3& a = m.A;
    const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                       a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                       a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    check(std::abs(det) > 1e-12, "warp", "singular affine matrix");
    Vec3 d{};
    for (int i = 0; i < 3; ++i) {
        Mat3 ai = a;
        for (int r = 0; r < 3; ++r) ai[r][i] = m.t[r];
        const double di = ai[0][0] * (ai[1][1] * ai[2][2] - ai[1][2] * ai[2][1]) -
                          ai[0][1] * (ai[1][0] * ai[2][2] - ai[1][2] * ai[2][0]) +
                          ai[0][2] * (ai[1][0] * ai[2][1] - ai[1][1] * ai[2][0]);
        d[i] = -di / det;
    }
    return d;
}

/// Partial derivatives (dA/dp_k, dt/dp_k) for every parameter k.
inline std::vector<Affine> to_matrix_derivatives(const AffineParams& p) {
    p.validate();
    const std::size_t nd = p.model.ndim;
    std::vector<Affine> d(p.model.param_count());
    switch (p.model.kind) {
    case MotionKind::general:
        for (std::size_t r = 0; r < nd; ++r) {
            for (std::size_t c = 0; c < nd; ++c) d[r * nd + c].A[r][c] = 1.0;
            d[nd * nd + r].t[r] = 1.0;
        }
        break;
    case MotionKind::rigid:
        if (nd == 3) {
            using namespace detail;
            const double ax = p.raw[0], ay = p.raw[1], az = p.raw[2];
            d[0].A = mat_mul(rot_z(az), mat_mul(rot_y(ay), rot_x(ax, true)));
            d[1].A = mat_mul(rot_z(az), mat_mul(rot_y(ay, true), rot_x(ax)));
            d[2].A = mat_mul(rot_z(az, true), mat_mul(rot_y(ay), rot_x(ax)));
            for (std::size_t r = 0; r < 3; ++r) d[3 + r].t[r] = 1.0;
        } else {
            d[0].A = detail::rot_z(p.raw[0], true);
            d[1].t[0] = 1.0;
            d[2].t[1] = 1.0;
        }
        break;
    case MotionKind::scaling:
        for (std::size_t k = 0; k < nd; ++k) d[k].A[k][k] = 1.0;
        break;
    case MotionKind::translation:
        for (std::size_t k = 0; k < nd; ++k) d[k].t[k] = 1.0;
        break;
    }
    return d;
}

/// Linear interpolation: taps at floor(q) and floor(q) + 1.
struct LinearKernel {
    static constexpr int taps = 2;
    static constexpr int offset = 0;
    static void weights(double f, double* w) noexcept {
        w[0] = 1.0 - f;
        w[1] = f;
    }
    static void derivatives(double, double* dw) noexcept {
        dw[0] = -1.0;
        dw[1] = 1.0;
    }
};

/// Catmull-Rom cubic convolution (a = -1/2): interpolating and C1.
struct CatmullRomKernel {
    static constexpr int taps = 4;
    static constexpr int offset = 1;
    static void weights(double f, double* w) noexcept {
        const double f2 = f * f, f3 = f2 * f;
        w[0] = 0.5 * (-f3 + 2.0 * f2 - f);
        w[1] = 0.5 * (3.0 * f3 - 5.0 * f2 + 2.0);
        w[2] = 0.5 * (-3.0 * f3 + 4.0 * f2 + f);
        w[3] = 0.5 * (f3 - f2);
    }
    static void derivatives(double f, double* dw) noexcept {
        const double f2 = f * f;
        dw[0] = 0.5 * (-3.0 * f2 + 4.0 * f - 1.0);
        dw[1] = 0.5 * (9.0 * f2 - 10.0 * f);
        dw[2] = 0.5 * (-9.0 * f2 + 8.0 * f + 1.0);
        dw[3] = 0.5 * (3.0 * f2 - 2.0 * f);
    }
};

namespace detail {

/// Interpolation stencil of one sample point: per-axis first tap, weights and
/// weight derivatives.
template <typename K, std::size_t ND>
struct Stencil {
    std::array<std::ptrdiff_t, ND> first{};
    std::array<std::array<double, K::taps>, ND> w{};
    std::array<std::array<double, K::taps>, ND> dw{};

    Stencil(const Vec3& q, bool with_derivatives) {
        for (std::size_t a = 0; a < ND; ++a) {
            const double fl = std::floor(q[a]);
            first[a] = static_cast<std::ptrdiff_t>(fl) - K::offset;
            K::weights(q[a] - fl, w[a].data());
            if (with_derivatives) K::derivatives(q[a] - fl, dw[a].data());
        }
    }
};

/// Calls visit(voxel index, tap weight, gradient of the tap weight) for every
/// in-grid tap of the stencil at q.
template <typename K, std::size_t ND, bool Grad, typename Visit>
void for_taps(const Grid& grid, const Vec3& q, Visit&& visit) {
    const Stencil<K, ND> st(q, Grad);
    const auto nx = static_cast<std::ptrdiff_t>(grid.nx());
    const auto ny = static_cast<std::ptrdiff_t>(grid.ny());
    const auto nz = static_cast<std::ptrdiff_t>(grid.nz());
    const int kz_taps = ND == 3 ? K::taps : 1;
    for (int kz = 0; kz < kz_taps; ++kz) {
        std::ptrdiff_t z = 0;
        double wz = 1.0, dwz = 0.0;
        if constexpr (ND == 3) {
            z = st.first[2] + kz;
            if (z < 0 || z >= nz) continue;
            wz = st.w[2][kz];
            dwz = st.dw[2][kz];
        }
        for (int ky = 0; ky < K::taps; ++ky) {
            const std::ptrdiff_t y = st.first[1] + ky;
            if (y < 0 || y >= ny) continue;
            const double wy = st.w[1][ky];
            for (int kx = 0; kx < K::taps; ++kx) {
                const std::ptrdiff_t x = st.first[0] + kx;
                if (x < 0 || x >= nx) continue;
                const double wx = st.w[0][kx];
                const std::size_t idx = std::size_t((z * ny + y) * nx + x);
                if constexpr (Grad) {
                    Vec3 g{st.dw[0][kx] * wy * wz, wx * st.dw[1][ky] * wz, 0.0};
                    if constexpr (ND == 3) g[2] = wx * wy * dwz;
                    visit(idx, wx * wy * wz, g);
                } else {
                    visit(idx, wx * wy * wz, Vec3{});
                }
            }
        }
    }
}

inline Vec3 map_point(const Affine& m, const Vec3& c, const Vec3& u) {
    Vec3 q{};
    const Vec3 d{u[0] - c[0], u[1] - c[1], u[2] - c[2]};
    for (int r = 0; r < 3; ++r) q[r] = m.A[r][0] * d[0] + m.A[r][1] * d[1] + m.A[r][2] * d[2] + c[r] + m.t[r];
    return q;
}

inline Vec3 voxel_coord(const Grid& g, std::size_t idx) {
    const std::size_t i = idx % g.nx();
    const std::size_t j = (idx / g.nx()) % g.ny();
    const std::size_t k = idx / (g.nx() * g.ny());
    return {double(i), double(j), double(k)};
}

inline void check_warp_inputs(const Volume& x, const AffineParams& p) {
    x.grid.validate();
    check(x.data.size() == x.grid.size(), "warp", "volume data does not match grid");
    p.validate();
    check(p.model.ndim == x.grid.ndim, "warp", "motion model dimensionality does not match volume");
}

/// Dispatches a generic lambda on (kernel type, dimensionality).
template <typename Fn>
decltype(auto) dispatch(InterpKernel k, std::size_t ndim, Fn&& fn) {
    if (k == InterpKernel::linear) {
        if (ndim == 2) return fn.template operator()<LinearKernel, 2>();
        return fn.template operator()<LinearKernel, 3>();
    }
    if (ndim == 2) return fn.template operator()<CatmullRomKernel, 2>();
    return fn.template operator()<CatmullRomKernel, 3>();
}

/// Accumulated d<y, M(p)x>/dA and d<y, M(p)x>/dt.
struct AffineGrad {
    Mat3 A{};
    Vec3 t{};
    AffineGrad& operator+=(const AffineGrad& o) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) A[r][c] += o.A[r][c];
            t[r] += o.t[r];
        }
        return *this;
    }
};

} // namespace detail

/// M(p) x.
inline Volume warp_apply(const Volume& x, const AffineParams& p, InterpKernel kernel) {
    detail::check_warp_inputs(x, p);
    const Affine m = to_matrix(p);
    const Vec3 c = x.grid.center;
    Volume out(x.grid);
    detail::dispatch(kernel, x.grid.ndim, [&]<typename K, std::size_t ND>() {
        parallel::for_chunks(x.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t u = lo; u < hi; ++u) {
                const Vec3 q = detail::map_point(m, c, detail::voxel_coord(x.grid, u));
                double acc = 0.0;
                detail::for_taps<K, ND, false>(x.grid, q,
                                               [&](std::size_t v, double w, const Vec3&) { acc += w * x.data[v]; });
                out.data[u] = acc;
            }
        });
    });
    return out;
}

/// M(p)^T y: scatters each output sample back onto its interpolation taps.
inline Volume warp_adjoint(const Volume& y, const AffineParams& p, InterpKernel kernel) {
    detail::check_warp_inputs(y, p);
    const Affine m = to_matrix(p);
    const Vec3 c = y.grid.center;
    Volume out(y.grid);
    detail::dispatch(kernel, y.grid.ndim, [&]<typename K, std::size_t ND>() {
        parallel::scatter_reduce(y.size(), out.data, [&](std::size_t lo, std::size_t hi, std::span<double> buf) {
            for (std::size_t u = lo; u < hi; ++u) {
                const double val = y.data[u];
                if (val == 0.0) continue;
                const Vec3 q = detail::map_point(m, c, detail::voxel_coord(y.grid, u));
                detail::for_taps<K, ND, false>(y.grid, q,
                                               [&](std::size_t v, double w, const Vec3&) { buf[v] += w * val; });
            }
        });
    });
    return out;
}

/// [dM(p)x/dp]^T y: the gradient of <M(p)x, y> with respect to p.
inline std::vector<double> warp_derivative_vjp(const Volume& x, const AffineParams& p, const Volume& y,
                                               InterpKernel kernel) {
    detail::check_warp_inputs(x, p);
    check(y.grid.dims == x.grid.dims && y.data.size() == x.data.size(), "warp", "vjp: shape mismatch");
    const Affine m = to_matrix(p);
    const Vec3 c = x.grid.center;
    const detail::AffineGrad g = detail::dispatch(kernel, x.grid.ndim, [&]<typename K, std::size_t ND>() {
        return parallel::block_sum(x.size(), detail::AffineGrad{}, [&](std::size_t lo, std::size_t hi) {
            detail::AffineGrad part;
            for (std::size_t u = lo; u < hi; ++u) {
                const double yu = y.data[u];
                if (yu == 0.0) continue;
                const Vec3 uc = detail::voxel_coord(x.grid, u);
                const Vec3 q = detail::map_point(m, c, uc);
                Vec3 grad{};
                detail::for_taps<K, ND, true>(x.grid, q, [&](std::size_t v, double, const Vec3& gw) {
                    for (int a = 0; a < 3; ++a) grad[a] += gw[a] * x.data[v];
                });
                for (int r = 0; r < 3; ++r) {
                    const double gr = yu * grad[r];
                    for (int col = 0; col < 3; ++col) part.A[r][col] += gr * (uc[col] - c[col]);
                    part.t[r] += gr;
                }
            }
            return part;
        });
    });
    const auto dparams = to_matrix_derivatives(p);
    std::vector<double> out(dparams.size(), 0.0);
    for (std::size_t k = 0; k < dparams.size(); ++k) {
        double s = 0.0;
        for (int r = 0; r < 3; ++r) {
            for (int col = 0; col < 3; ++col) s += g.A[r][col] * dparams[k].A[r][col];
            s += g.t[r] * dparams[k].t[r];
        }
        out[k] = s;
    }
    return out;
}

/// [dM(p)x/dp] dp: the directional derivative of the warped image.
inline Volume warp_derivative_jvp(const Volume& x, const AffineParams& p, std::span<const double> dp,
                                  InterpKernel kernel) {
    detail::check_warp_inputs(x, p);
    check(dp.size() == p.raw.size(), "warp", "jvp: parameter direction length mismatch");
    const Affine m = to_matrix(p);
    const auto dparams = to_matrix_derivatives(p);
    Affine dm{};
    for (std::size_t k = 0; k < dparams.size(); ++k) {
        for (int r = 0; r < 3; ++r) {
            for (int col = 0; col < 3; ++col) dm.A[r][col] += dp[k] * dparams[k].A[r][col];
            dm.t[r] += dp[k] * dparams[k].t[r];
        }
    }
    const Vec3 c = x.grid.center;
    Volume out(x.grid);
    detail::dispatch(kernel, x.grid.ndim, [&]<typename K, std::size_t ND>() {
        parallel::for_chunks(x.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t u = lo; u < hi; ++u) {
                const Vec3 uc = detail::voxel_coord(x.grid, u);
                const Vec3 q = detail::map_point(m, c, uc);
                Vec3 grad{};
                detail::for_taps<K, ND, true>(x.grid, q, [&](std::size_t v, double, const Vec3& gw) {
                    for (int a = 0; a < 3; ++a) grad[a] += gw[a] * x.data[v];
                });
                // du_hat = dA (u - c) + dt
                double acc = 0.0;
                for (int r = 0; r < 3; ++r) {
                    const double du = dm.A[r][0] * (uc[0] - c[0]) + dm.A[r][1] * (uc[1] - c[1]) +
                                      dm.A[r][2] * (uc[2] - c[2]) + dm.t[r];
                    acc += grad[r] * du;
                }
                out.data[u] = acc;
            }
        });
    });
    return out;
}

} // namespace samcirt

#endif // SAMCIRT_WARP_HPP
