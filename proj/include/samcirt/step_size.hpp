#ifndef SAMCIRT_STEP_SIZE_HPP
#define SAMCIRT_STEP_SIZE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "samcirt/core.hpp"

namespace samcirt {

/// Safeguard interval for Barzilai-Borwein steps, relative to the block's
/// initial step.
struct BbClamp {
    double min = 1e-8;
    double max = 1e8;
};

inline constexpr double kBbDenominatorFloor = 1e-30;

/// Two-point step <dg, dv> / <dg, dg> with dg = g_cur - g_prev and
/// dv = v_cur - v_prev, clamped to [lo, hi]. When |dg|^2 falls below 1e-30,
/// or the measured curvature <dg, dv> is not positive, the previous step is
/// returned unchanged.
inline double bb_step(std::span<const double> g_cur, std::span<const double> g_prev, std::span<const double> v_cur,
                      std::span<const double> v_prev, double prev_step, double lo, double hi) {
    check(g_cur.size() == g_prev.size() && v_cur.size() == v_prev.size() && g_cur.size() == v_cur.size(),
          "optimizer", "bb_step: shape mismatch");
    check(lo <= hi, "optimizer", "bb_step: empty clamp interval");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g_cur.size(); ++i) {
        const double dg = g_cur[i] - g_prev[i];
        num += dg * (v_cur[i] - v_prev[i]);
        den += dg * dg;
    }
    if (den < kBbDenominatorFloor || !(num > 0.0)) return prev_step;
    return std::clamp(num / den, lo, hi);
}

/// Step-size state for one block of unknowns (the image, or one group of
/// motion parameters). The first step is coefficient / |g|; later steps use
/// bb_step within clamp * (first step).
class BlockStepper {
public:
    /// `indices` selects the block's components from the full vectors passed
    /// to next(); an empty list selects everything. `probe`, when set, is the
    /// per-component displacement used on the first iteration if the block
    /// gradient vanishes.
    BlockStepper(std::vector<std::size_t> indices, double coefficient, BbClamp clamp,
                 std::optional<double> probe = std::nullopt)
        : indices_(std::move(indices)), coefficient_(coefficient), clamp_(clamp), probe_(probe) {
        check(coefficient > 0.0, "optimizer", "step coefficient must be > 0");
        check(clamp.min > 0.0 && clamp.min <= clamp.max, "optimizer", "invalid BB clamp");
    }

    /// Updates v in place from gradient g and returns the step used.
    double update(std::span<const double> g, std::span<double> v) {
        std::vector<double> gb = gather(g), vb = gather(v);
        double gamma = 0.0;
        bool probe_step = false;
        if (!prev_g_) {
            const double gn = norm(gb);
            if (gn < kVanishingGradient && probe_) {
                gamma = *probe_;
                probe_step = true;
            } else {
                gamma = gn < kVanishingGradient ? coefficient_ : coefficient_ / gn;
            }
            reference_ = gamma;
        } else {
            gamma = bb_step(gb, *prev_g_, vb, *prev_v_, last_, clamp_.min * reference_, clamp_.max * reference_);
        }
        prev_g_ = gb;
        prev_v_ = vb;
        last_ = gamma;
        for (std::size_t n = 0; n < vb.size(); ++n) {
            const double delta = probe_step ? gamma : -gamma * gb[n];
            v[index(n, v.size())] += delta;
        }
        return gamma;
    }

    [[nodiscard]] double reference_step() const noexcept { return reference_; }
    [[nodiscard]] BbClamp clamp() const noexcept { return clamp_; }

    static constexpr double kVanishingGradient = 1e-12;

private:
    [[nodiscard]] std::size_t index(std::size_t n, std::size_t) const { return indices_.empty() ? n : indices_[n]; }
    [[nodiscard]] std::vector<double> gather(std::span<const double> a) const {
        if (indices_.empty()) return {a.begin(), a.end()};
        std::vector<double> out(indices_.size());
        for (std::size_t n = 0; n < indices_.size(); ++n) out[n] = a[indices_[n]];
        return out;
    }

    std::vector<std::size_t> indices_;
    double coefficient_;
    BbClamp clamp_;
    std::optional<double> probe_;
    std::optional<std::vector<double>> prev_g_, prev_v_;
    double reference_ = 0.0;
    double last_ = 0.0;
};

} // namespace samcirt

#endif // SAMCIRT_STEP_SIZE_HPP
