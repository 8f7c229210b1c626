#ifndef SAMCIRT_MODEL_HPP
#define SAMCIRT_MODEL_HPP

// Dynamic-CT least-squares objective
//     g(x, p) = 1/2 sum_i |W_i M(p_i) x - b_i|^2
// with its partial gradients, the per-subscan projection distance, and
// volume-domain affine registration.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "samcirt/core.hpp"
#include "samcirt/projector.hpp"
#include "samcirt/step_size.hpp"
#include "samcirt/warp.hpp"

namespace samcirt {

struct ScanModel {
    Geometry geometry;
    std::vector<IndexRange> subscan_bounds;
    MotionModel motion_model;
    InterpKernel kernel = InterpKernel::cubic;

    [[nodiscard]] std::size_t n_subscans() const noexcept { return subscan_bounds.size(); }

    void validate() const {
        geometry.validate();
        check(!subscan_bounds.empty(), "model", "scan needs at least one subscan");
        check(ranges_partition(subscan_bounds, geometry.n_angles()), "model",
              "subscan bounds must cover all angles in order");
    }

    /// Scan model matching a projection stack's geometry and subscan layout.
    static ScanModel from_stack(const ProjStack& b, MotionModel m, InterpKernel k = InterpKernel::cubic) {
        return ScanModel{b.geometry, b.subscan_bounds, m, k};
    }
};

/// Unknowns of the joint problem: one image, one AffineParams per subscan.
struct JointState {
    Volume x;
    std::vector<AffineParams> p;

    static JointState identity(Volume x, const ScanModel& scan) {
        return {std::move(x), std::vector<AffineParams>(scan.n_subscans(), AffineParams::identity(scan.motion_model))};
    }
};

/// Initial-step proportionality coefficients per block.
struct StepCoefficients {
    double c_x = 1.0;
    double c_theta = 1e-3;
    double c_t = 0.1;
    double c_scale = 0.01;

    [[nodiscard]] double for_group(ParamGroup g) const noexcept {
        switch (g) {
        case ParamGroup::rotation: return c_theta;
        case ParamGroup::translation: return c_t;
        case ParamGroup::scale:
        case ParamGroup::matrix: return c_scale;
        }
        return c_scale;
    }
};

/// One BlockStepper per parameter group present in the model, over the
/// flattened parameter vector of n_blocks parameter sets. The first
/// `fixed_blocks` sets are left out and never updated.
inline std::vector<std::pair<ParamGroup, BlockStepper>> make_param_steppers(const MotionModel& model,
                                                                             std::size_t n_blocks,
                                                                             const StepCoefficients& coef,
                                                                             BbClamp clamp,
                                                                             std::optional<double> probe,
                                                                             std::size_t fixed_blocks = 0) {
    std::vector<std::pair<ParamGroup, BlockStepper>> out;
    const std::size_t np = model.param_count();
    for (ParamGroup g : {ParamGroup::matrix, ParamGroup::rotation, ParamGroup::translation, ParamGroup::scale}) {
        std::vector<std::size_t> idx;
        for (std::size_t b = fixed_blocks; b < n_blocks; ++b)
            for (std::size_t k = 0; k < np; ++k)
                if (model.group(k) == g) idx.push_back(b * np + k);
        if (!idx.empty()) out.emplace_back(g, BlockStepper(std::move(idx), coef.for_group(g), clamp, probe));
    }
    return out;
}

namespace detail {

inline void check_problem(const JointState& s, const ScanModel& scan, const ProjStack& b) {
    scan.validate();
    check(s.p.size() == scan.n_subscans(), "model", "need one parameter set per subscan");
    for (const auto& p : s.p) {
        p.validate();
        check(p.model == scan.motion_model, "model", "all parameter sets must use the scan's motion model");
    }
    check(b.data.n_angles == scan.geometry.n_angles() && b.data.rows == scan.geometry.det_rows &&
              b.data.cols == scan.geometry.det_count && b.data.size() == b.data.n_angles * b.data.rows * b.data.cols,
          "model", "projection data shape mismatch");
    check(s.x.data.size() == s.x.grid.size(), "model", "volume data does not match grid");
}

inline void check_index(const ScanModel& scan, std::size_t i) {
    check(i < scan.n_subscans(), "model", "subscan index " + std::to_string(i) + " out of range");
}

/// W_i M(p_i) x - b_i without argument validation.
inline ProjArray residual_unchecked(const JointState& s, const ScanModel& scan, const ProjStack& b, std::size_t i) {
    const IndexRange r = scan.subscan_bounds[i];
    const Volume xi = warp_apply(s.x, s.p[i], scan.kernel);
    ProjArray out = forward_project(xi, scan.geometry, r);
    const std::size_t off = r.begin * b.data.image_size();
    for (std::size_t n = 0; n < out.size(); ++n) out.data[n] -= b.data.data[off + n];
    return out;
}

} // namespace detail

/// W_i M(p_i) x - b_i.
inline ProjArray residual(const JointState& s, const ScanModel& scan, const ProjStack& b, std::size_t i) {
    detail::check_problem(s, scan, b);
    detail::check_index(scan, i);
    return detail::residual_unchecked(s, scan, b, i);
}

/// |W_i M(p_i) x - b_i|.
inline double projection_distance(const JointState& s, const ScanModel& scan, const ProjStack& b, std::size_t i) {
    return norm(residual(s, scan, b, i).data);
}

/// 1/2 sum_i |W_i M(p_i) x - b_i|^2, accumulated subscan by subscan.
inline double objective(const JointState& s, const ScanModel& scan, const ProjStack& b) {
    detail::check_problem(s, scan, b);
    double total = 0.0;
    for (std::size_t i = 0; i < scan.n_subscans(); ++i) total += norm2(detail::residual_unchecked(s, scan, b, i).data);
    return 0.5 * total;
}

/// sum_i M(p_i)^T W_i^T r_i.
inline Volume grad_x(const JointState& s, const ScanModel& scan, const ProjStack& b) {
    detail::check_problem(s, scan, b);
    Volume g(s.x.grid);
    for (std::size_t i = 0; i < scan.n_subscans(); ++i) {
        const ProjArray r = detail::residual_unchecked(s, scan, b, i);
        const Volume wr = back_project(r, s.x.grid, scan.geometry, scan.subscan_bounds[i]);
        axpy(1.0, warp_adjoint(wr, s.p[i], scan.kernel).data, g.data);
    }
    return g;
}

/// [dM(p_i)x/dp_i]^T W_i^T r_i. Depends only on x, p_i and b_i.
inline std::vector<double> grad_p(const JointState& s, const ScanModel& scan, const ProjStack& b, std::size_t i) {
    detail::check_problem(s, scan, b);
    detail::check_index(scan, i);
    const ProjArray r = detail::residual_unchecked(s, scan, b, i);
    const Volume wr = back_project(r, s.x.grid, scan.geometry, scan.subscan_bounds[i]);
    return warp_derivative_vjp(s.x, s.p[i], wr, scan.kernel);
}

/// Objective, both gradients and per-subscan distances from one residual pass.
struct Evaluation {
    double objective = 0.0;
    std::vector<double> distances;
    Volume grad_x;
    /// Flattened: subscan i occupies [i * P, (i + 1) * P).
    std::vector<double> grad_p;
};

inline Evaluation evaluate(const JointState& s, const ScanModel& scan, const ProjStack& b, bool want_grad_p = true) {
    detail::check_problem(s, scan, b);
    Evaluation ev;
    ev.grad_x = Volume(s.x.grid);
    const std::size_t np = scan.motion_model.param_count();
    ev.grad_p.assign(want_grad_p ? np * scan.n_subscans() : 0, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < scan.n_subscans(); ++i) {
        const ProjArray r = detail::residual_unchecked(s, scan, b, i);
        const double sq = norm2(r.data);
        total += sq;
        ev.distances.push_back(std::sqrt(sq));
        const Volume wr = back_project(r, s.x.grid, scan.geometry, scan.subscan_bounds[i]);
        axpy(1.0, warp_adjoint(wr, s.p[i], scan.kernel).data, ev.grad_x.data);
        if (want_grad_p) {
            const auto gp = warp_derivative_vjp(s.x, s.p[i], wr, scan.kernel);
            std::copy(gp.begin(), gp.end(), ev.grad_p.begin() + std::ptrdiff_t(i * np));
        }
    }
    ev.objective = 0.5 * total;
    return ev;
}

struct RegistrationOptions {
    std::size_t iters = 100;
    InterpKernel kernel = InterpKernel::cubic;
    StepCoefficients coefficients{1.0, 1e-3, 0.1, 0.01};
    BbClamp clamp{};
    /// Starting point; identity of the model when unset.
    std::optional<AffineParams> initial;
};

struct RegistrationResult {
    AffineParams params;
    double initial_objective = 0.0;
    double final_objective = 0.0;
    std::vector<double> objectives;
};

/// argmin_p 1/2 |M(p) x1 - x2|^2 by gradient descent with per-group
/// Barzilai-Borwein steps. Returns the best iterate visited, so the final
/// objective never exceeds the initial one.
inline RegistrationResult register_affine(const Volume& x1, const Volume& x2, const MotionModel& model,
                                          const RegistrationOptions& opt = {}) {
    x1.validate();
    x2.validate();
    check(x1.grid == x2.grid, "model", "register_affine: volumes must share a grid");
    check(model.ndim == x1.grid.ndim, "model", "register_affine: model dimensionality mismatch");
    AffineParams p = opt.initial.value_or(AffineParams::identity(model));
    p.validate();
    check(p.model == model, "model", "register_affine: initial parameters use a different model");

    auto eval = [&](const AffineParams& q, std::vector<double>* grad) {
        Volume r = warp_apply(x1, q, opt.kernel);
        for (std::size_t n = 0; n < r.size(); ++n) r.data[n] -= x2.data[n];
        const double f = 0.5 * norm2(r.data);
        if (grad) *grad = warp_derivative_vjp(x1, q, r, opt.kernel);
        return f;
    };

    auto steppers = make_param_steppers(model, 1, opt.coefficients, opt.clamp, 1e-3);
    RegistrationResult res{p, 0.0, 0.0, {}};
    std::vector<double> grad;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it <= opt.iters; ++it) {
        const double f = eval(p, it < opt.iters ? &grad : nullptr);
        if (!std::isfinite(f) || !all_finite(grad))
            throw Error("model", "register_affine: objective became non-finite at iteration " + std::to_string(it));
        if (it == 0) res.initial_objective = f;
        res.objectives.push_back(f);
        if (f < best) {
            best = f;
            res.params = p;
        }
        if (it == opt.iters) break;
        for (auto& [group, stepper] : steppers) stepper.update(grad, p.raw);
        if (model.kind == MotionKind::scaling)
            for (double& v : p.raw)
                if (!(v > 0.0)) throw Error("model", "register_affine: scale left the positive range");
    }
    res.final_objective = best;
    return res;
}

} // namespace samcirt

#endif // SAMCIRT_MODEL_HPP
