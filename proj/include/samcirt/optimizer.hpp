#ifndef SAMCIRT_OPTIMIZER_HPP
#define SAMCIRT_OPTIMIZER_HPP

// Split gradient iteration for simultaneous reconstruction and motion
// estimation:
//     x^{k+1} = x^k - gamma_x^k grad_x g(x^k, p^k)
//     p^{k+1} = p^k - gamma_p^k grad_p g(x^k, p^k)
// with independent Barzilai-Borwein steps for the image and for each group
// of motion parameters (rotations, translations, scales, matrix entries).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "samcirt/core.hpp"
#include "samcirt/model.hpp"
#include "samcirt/projector.hpp"
#include "samcirt/step_size.hpp"
#include "samcirt/warp.hpp"

namespace samcirt {

struct OptConfig {
    std::size_t iters = 10;
    /// Iterations of the static reconstruction that provides x^0.
    std::size_t init_iters = 20;
    StepCoefficients coefficients{};
    /// Overrides the per-group motion coefficients when set.
    std::optional<double> c_p;
    /// First-iteration displacement per parameter when grad_p vanishes.
    double first_p_step = 1e-3;
    BbClamp bb_clamp{};
    /// When set, x is clamped to [0, clamp_x] after every update.
    std::optional<double> clamp_x;
    /// false freezes p at its initial value (known-motion reconstruction).
    bool estimate_motion = true;
    /// Keeps p_1 at its initial value: the first subscan defines the frame
    /// in which x is reconstructed.
    bool fix_first_subscan = true;
    /// Starting motion; identity parameters when unset.
    std::optional<std::vector<AffineParams>> initial_p;

    [[nodiscard]] StepCoefficients motion_coefficients() const {
        StepCoefficients c = coefficients;
        if (c_p) c.c_theta = c.c_t = c.c_scale = *c_p;
        return c;
    }

    void validate() const {
        check(iters >= 1, "optimizer", "iters must be >= 1");
        check(coefficients.c_x > 0 && coefficients.c_theta > 0 && coefficients.c_t > 0 && coefficients.c_scale > 0,
              "optimizer", "step coefficients must be > 0");
        check(!c_p || *c_p > 0, "optimizer", "c_p must be > 0");
        check(first_p_step > 0, "optimizer", "first_p_step must be > 0");
        check(bb_clamp.min > 0 && bb_clamp.min <= bb_clamp.max, "optimizer", "bb clamp needs 0 < min <= max");
        check(!clamp_x || *clamp_x > 0, "optimizer", "clamp_x must be > 0");
    }
};

/// Per-iteration record. Entry k describes the iterate (x^k, p^k) and the
/// steps taken from it.
struct RunHistory {
    std::vector<double> objective;
    std::vector<double> gamma_x;
    /// |p^{k+1} - p^k| / |grad_p g|, a single summary of the group steps.
    std::vector<double> gamma_p;
    /// Step of each parameter group, in make_param_steppers order.
    std::vector<std::vector<double>> gamma_p_groups;
    std::vector<ParamGroup> groups;
    /// Flattened p^k (subscan-major).
    std::vector<std::vector<double>> p;
    double final_objective = 0.0;
    std::vector<double> final_distances;
    double wall_seconds = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return objective.size(); }
};

struct RunResult {
    JointState state;
    RunHistory history;
};

/// Thrown when an iterate stops being finite; carries the history so far.
class RunAborted : public Error {
public:
    RunAborted(const std::string& what, RunHistory h) : Error("optimizer", what), history(std::move(h)) {}
    RunHistory history;
};

namespace detail {

inline void clamp_volume(Volume& x, std::optional<double> hi) {
    if (!hi) return;
    for (double& v : x.data) v = std::clamp(v, 0.0, *hi);
}

inline std::vector<double> flatten(const std::vector<AffineParams>& ps) {
    std::vector<double> out;
    for (const auto& p : ps) out.insert(out.end(), p.raw.begin(), p.raw.end());
    return out;
}

inline void unflatten(std::span<const double> flat, std::vector<AffineParams>& ps) {
    std::size_t off = 0;
    for (auto& p : ps) {
        std::copy(flat.begin() + std::ptrdiff_t(off), flat.begin() + std::ptrdiff_t(off + p.raw.size()), p.raw.begin());
        off += p.raw.size();
    }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/// Gradient method with BB steps on the motion-free problem
/// min_x 1/2 |W x - b|^2, started from x = 0.
inline RunResult run_static_gmbb(const ScanModel& scan, const ProjStack& b, const Grid& grid, std::size_t iters,
                                 double c_x = 1.0, BbClamp clamp = {}, std::optional<double> clamp_x = std::nullopt) {
    scan.validate();
    b.validate();
    grid.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunResult res{JointState::identity(Volume(grid), scan), {}};
    Volume& x = res.state.x;
    RunHistory& h = res.history;
    const IndexRange all = scan.geometry.all();
    BlockStepper stepper({}, c_x, clamp);
    auto eval = [&](std::vector<double>* grad) {
        ProjArray r = forward_project(x, scan.geometry, all);
        for (std::size_t n = 0; n < r.size(); ++n) r.data[n] -= b.data.data[n];
        if (grad) *grad = back_project(r, grid, scan.geometry, all).data;
        return 0.5 * norm2(r.data);
    };
    std::vector<double> g;
    for (std::size_t k = 0; k < iters; ++k) {
        const double f = eval(&g);
        if (!std::isfinite(f) || !all_finite(g))
            throw RunAborted("static reconstruction became non-finite at iteration " + std::to_string(k), h);
        h.objective.push_back(f);
        h.p.push_back(detail::flatten(res.state.p));
        h.gamma_x.push_back(stepper.update(g, x.data));
        h.gamma_p.push_back(0.0);
        h.gamma_p_groups.emplace_back();
        detail::clamp_volume(x, clamp_x);
    }
    h.final_objective = eval(nullptr);
    if (!std::isfinite(h.final_objective)) throw RunAborted("static reconstruction became non-finite", h);
    h.final_distances.clear();
    for (std::size_t i = 0; i < scan.n_subscans(); ++i) h.final_distances.push_back(projection_distance(res.state, scan, b, i));
    h.wall_seconds = detail::seconds_since(t0);
    return res;
}

/// Reconstruction without motion correction, used as x^0.
inline Volume init_reconstruction(const ScanModel& scan, const ProjStack& b, const Grid& grid, std::size_t init_iters,
                                  double c_x = 1.0) {
    if (init_iters == 0) return Volume(grid);
    return run_static_gmbb(scan, b, grid, init_iters, c_x).state.x;
}

/// Simultaneous reconstruction and affine motion estimation. Runs exactly
/// config.iters iterations.
inline RunResult samcirt_run(const ScanModel& scan, const ProjStack& b, const Grid& grid, const OptConfig& config) {
    config.validate();
    scan.validate();
    b.validate();
    grid.validate();
    check(grid.ndim == scan.motion_model.ndim, "optimizer", "motion model dimensionality does not match the grid");
    check(b.subscan_bounds == scan.subscan_bounds, "optimizer", "data and scan model disagree on subscans");
    const auto t0 = std::chrono::steady_clock::now();

    RunResult res{JointState::identity(init_reconstruction(scan, b, grid, config.init_iters, config.coefficients.c_x),
                                       scan),
                  {}};
    if (config.initial_p) {
        check(config.initial_p->size() == scan.n_subscans(), "optimizer", "initial_p needs one entry per subscan");
        res.state.p = *config.initial_p;
    }
    JointState& s = res.state;
    RunHistory& h = res.history;

    BlockStepper x_stepper({}, config.coefficients.c_x, config.bb_clamp);
    const std::size_t fixed_blocks = config.fix_first_subscan ? 1 : 0;
    const std::size_t np = scan.motion_model.param_count();
    auto p_steppers = make_param_steppers(scan.motion_model, scan.n_subscans(), config.motion_coefficients(),
                                          config.bb_clamp, config.first_p_step, fixed_blocks);
    for (const auto& [g, st] : p_steppers) h.groups.push_back(g);

    for (std::size_t k = 0; k < config.iters; ++k) {
        const Evaluation ev = evaluate(s, scan, b, config.estimate_motion);
        if (!std::isfinite(ev.objective) || !all_finite(ev.grad_x.data) || !all_finite(ev.grad_p))
            throw RunAborted("objective or gradient became non-finite at iteration " + std::to_string(k), h);
        std::vector<double> p_flat = detail::flatten(s.p);
        h.objective.push_back(ev.objective);
        h.p.push_back(p_flat);

        h.gamma_x.push_back(x_stepper.update(ev.grad_x.data, s.x.data));
        detail::clamp_volume(s.x, config.clamp_x);

        std::vector<double> group_steps;
        double gamma_p = 0.0;
        if (config.estimate_motion) {
            const std::vector<double> before = p_flat;
            for (auto& [g, st] : p_steppers) group_steps.push_back(st.update(ev.grad_p, p_flat));
            const double gn = norm(std::span<const double>(ev.grad_p).subspan(fixed_blocks * np));
            gamma_p = gn > 0.0 ? norm(subtract(p_flat, before)) / gn : 0.0;
            detail::unflatten(p_flat, s.p);
            try {
                for (const auto& p : s.p) p.validate();
            } catch (const Error& e) {
                throw RunAborted(std::string("invalid motion parameters at iteration ") + std::to_string(k) + ": " +
                                     e.what(),
                                 h);
            }
        }
        h.gamma_p.push_back(gamma_p);
        h.gamma_p_groups.push_back(std::move(group_steps));
    }

    double total = 0.0;
    for (std::size_t i = 0; i < scan.n_subscans(); ++i) {
        const double sq = norm2(residual(s, scan, b, i).data);
        h.final_distances.push_back(std::sqrt(sq));
        total += sq;
    }
    h.final_objective = 0.5 * total;
    if (!std::isfinite(h.final_objective)) throw RunAborted("final objective is non-finite", h);
    h.wall_seconds = detail::seconds_since(t0);
    return res;
}

} // namespace samcirt

#endif // SAMCIRT_OPTIMIZER_HPP
