#ifndef SAMCIRT_VERIFY_HPP
#define SAMCIRT_VERIFY_HPP

// Self-checks behind `samcirt check`: dot-product adjoint tests, central
// difference gradient tests and the partition solver against enumeration.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "samcirt/model.hpp"
#include "samcirt/partition.hpp"
#include "samcirt/projector.hpp"
#include "samcirt/random.hpp"
#include "samcirt/simulation.hpp"
#include "samcirt/warp.hpp"

namespace samcirt::verify {

struct CheckResult {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    [[nodiscard]] bool pass() const { return std::isfinite(value) && value <= tolerance; }
};

struct Tolerances {
    double adjoint = 1e-6;
    double grad_x = 1e-6;
    double grad_p = 1e-3;
    double duality = 1e-8;
};

inline std::vector<double> random_vector(std::size_t n, random::Stream& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

inline std::vector<double> uniform_angles(std::size_t n, double span = std::numbers::pi) {
    std::vector<double> a(n);
    for (std::size_t k = 0; k < n; ++k) a[k] = span * double(k) / double(n);
    return a;
}

inline Grid cube(std::size_t ndim, std::size_t n) { return ndim == 2 ? Grid::make_2d(n, n) : Grid::make_3d(n, n, n); }

inline Geometry geometry_for(const Grid& g, std::size_t n_angles) {
    Geometry geo;
    geo.angles = uniform_angles(n_angles);
    geo.det_count = std::size_t(std::ceil(1.5 * double(g.nx())));
    geo.det_rows = g.ndim == 3 ? g.nz() : 1;
    return geo;
}

/// Parameters a small random distance from the identity.
inline AffineParams random_params(const MotionModel& m, random::Stream& rng, double scale = 1.0) {
    AffineParams p = AffineParams::identity(m);
    for (std::size_t k = 0; k < p.raw.size(); ++k) {
        switch (m.group(k)) {
        case ParamGroup::rotation: p.raw[k] += scale * rng.uniform(-0.1, 0.1); break;
        case ParamGroup::translation: p.raw[k] += scale * rng.uniform(-1.5, 1.5); break;
        case ParamGroup::scale:
        case ParamGroup::matrix: p.raw[k] += scale * rng.uniform(-0.08, 0.08); break;
        }
    }
    return p;
}

inline double relative_gap(double a, double b) {
    const double den = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / den;
}

inline std::vector<CheckResult> adjoint_checks(std::uint64_t seed, const Tolerances& tol = {}) {
    std::vector<CheckResult> out;
    random::Stream rng(seed, 101);
    for (std::size_t nd : {2u, 3u}) {
        for (std::size_t n : {8u, 16u, 32u}) {
            const Grid g = cube(nd, n);
            const Geometry geo = geometry_for(g, 12);
            const auto x = random_vector(g.size(), rng);
            const auto y = random_vector(geo.n_angles() * geo.det_rows * geo.det_count, rng);
            ProjArray py(geo.n_angles(), geo.det_rows, geo.det_count);
            py.data = y;
            const double lhs = dot(forward_project(g, x, geo, geo.all()).data, y);
            const double rhs = dot(x, back_project(py, g, geo, geo.all()).data);
            out.push_back({"projector " + std::to_string(nd) + "D n=" + std::to_string(n), relative_gap(lhs, rhs),
                           tol.adjoint});

            for (MotionKind kind : {MotionKind::general, MotionKind::rigid, MotionKind::scaling, MotionKind::translation}) {
                for (InterpKernel k : {InterpKernel::linear, InterpKernel::cubic}) {
                    const AffineParams p = random_params(MotionModel{kind, nd}, rng);
                    const Volume vx(g, random_vector(g.size(), rng));
                    const Volume vy(g, random_vector(g.size(), rng));
                    const double l = dot(warp_apply(vx, p, k).data, vy.data);
                    const double r = dot(vx.data, warp_adjoint(vy, p, k).data);
                    out.push_back({"warp " + std::to_string(nd) + "D n=" + std::to_string(n) + " " +
                                       std::string(to_string(kind)) + " " + std::string(to_string(k)),
                                   relative_gap(l, r), tol.adjoint});
                }
            }
        }
    }
    return out;
}

/// Two-subscan problem on a smooth phantom with data from a different motion,
/// so the residual and both gradients are nonzero.
struct GradientProblem {
    ScanModel scan;
    ProjStack b;
    JointState s;
};

inline GradientProblem gradient_problem(std::size_t nd, MotionKind kind, std::uint64_t seed) {
    const std::size_t n = nd == 2 ? 24 : 12;
    const Grid g = cube(nd, n);
    random::Stream rng(seed, 202);
    Geometry geo = geometry_for(g, 6);
    ScanModel scan{geo, {{0, 3}, {3, 6}}, MotionModel{kind, nd}, InterpKernel::cubic};
    const Volume phantom = make_phantom({PhantomKind::gaussian_blobs, g, seed, 1.5, 6});
    MotionSchedule truth{{random_params(scan.motion_model, rng), random_params(scan.motion_model, rng)}, 0.0};
    GradientProblem prob{scan, simulate_scan(phantom, scan, truth, seed), {}};
    Volume x0 = gaussian_blur(phantom, 1.0);
    prob.s = JointState{x0, {random_params(scan.motion_model, rng, 0.5), random_params(scan.motion_model, rng, 0.5)}};
    return prob;
}

inline std::vector<CheckResult> gradient_checks(std::uint64_t seed, const Tolerances& tol = {}) {
    std::vector<CheckResult> out;
    for (std::size_t nd : {2u, 3u}) {
        for (MotionKind kind : {MotionKind::general, MotionKind::rigid, MotionKind::scaling, MotionKind::translation}) {
            const std::string tag = std::to_string(nd) + "D " + std::string(to_string(kind));
            GradientProblem pr = gradient_problem(nd, kind, seed);
            random::Stream rng(seed, 303);

            // grad_x: g is quadratic in x, so the central difference is exact
            // up to rounding.
            const Volume gx = grad_x(pr.s, pr.scan, pr.b);
            const auto v = random_vector(gx.size(), rng);
            const double h = 1e-3;
            JointState sp = pr.s, sm = pr.s;
            axpy(h, v, sp.x.data);
            axpy(-h, v, sm.x.data);
            const double fd = (objective(sp, pr.scan, pr.b) - objective(sm, pr.scan, pr.b)) / (2 * h);
            out.push_back({"grad_x " + tag, relative_gap(fd, dot(gx.data, v)), tol.grad_x});

            // grad_p per component.
            double worst = 0.0;
            for (std::size_t i = 0; i < pr.scan.n_subscans(); ++i) {
                const auto gp = grad_p(pr.s, pr.scan, pr.b, i);
                double scale = norm(gp);
                for (std::size_t k = 0; k < gp.size(); ++k) {
                    const double hp = 1e-5;
                    JointState a = pr.s, c = pr.s;
                    a.p[i].raw[k] += hp;
                    c.p[i].raw[k] -= hp;
                    const double d = (objective(a, pr.scan, pr.b) - objective(c, pr.scan, pr.b)) / (2 * hp);
                    worst = std::max(worst, std::abs(d - gp[k]) / std::max(scale, 1e-300));
                }
            }
            out.push_back({"grad_p " + tag, worst, tol.grad_p});

            // Warp Jacobian: jvp against a central difference of warp_apply,
            // and <jvp(dp), y> = <dp, vjp(y)>.
            const AffineParams& p = pr.s.p[1];
            const auto dp = random_vector(p.raw.size(), rng);
            const Volume j = warp_derivative_jvp(pr.s.x, p, dp, InterpKernel::cubic);
            AffineParams pa = p, pc = p;
            axpy(1e-5, dp, pa.raw);
            axpy(-1e-5, dp, pc.raw);
            const auto fdj = subtract(warp_apply(pr.s.x, pa, InterpKernel::cubic).data,
                                      warp_apply(pr.s.x, pc, InterpKernel::cubic).data);
            std::vector<double> diff(fdj.size());
            for (std::size_t q = 0; q < fdj.size(); ++q) diff[q] = fdj[q] / 2e-5 - j.data[q];
            out.push_back({"warp jvp " + tag, norm(diff) / std::max(norm(j.data), 1e-300), tol.grad_p});

            const Volume y(pr.s.x.grid, random_vector(pr.s.x.size(), rng));
            const auto vj = warp_derivative_vjp(pr.s.x, p, y, InterpKernel::cubic);
            out.push_back({"jvp/vjp duality " + tag, relative_gap(dot(j.data, y.data), dot(dp, vj)), tol.duality});
        }
    }
    return out;
}

inline std::vector<CheckResult> partition_checks(std::uint64_t seed, std::size_t instances = 300) {
    std::vector<CheckResult> out;
    random::Stream rng(seed, 404);
    std::size_t objective_mismatch = 0, segment_mismatch = 0, lambda_le_one = 0;
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t n = 1 + std::size_t(rng.uniform() * 12.0);
        std::vector<double> s(n);
        const bool clustered = rng.uniform() < 0.5;
        for (double& v : s) v = clustered ? (rng.uniform() < 0.8 ? 0.95 : 0.3) : rng.uniform();
        for (double lambda : {1.5, 10.0, 100.0}) {
            const SubscanPlan a = partition_exact(s, lambda);
            const SubscanPlan b = partition_bruteforce(s, lambda);
            objective_mismatch += a.objective_value != b.objective_value;
            segment_mismatch += a.segments != b.segments;
        }
        lambda_le_one += partition_exact(s, rng.uniform(0.01, 1.0)).n_segments() != 1;
    }
    out.push_back({"partition objective mismatches", double(objective_mismatch), 0.0});
    out.push_back({"partition segment mismatches", double(segment_mismatch), 0.0});
    out.push_back({"partition lambda<=1 with n>1", double(lambda_le_one), 0.0});
    return out;
}

} // namespace samcirt::verify

#endif // SAMCIRT_VERIFY_HPP
