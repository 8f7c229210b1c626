#ifndef SAMCIRT_PARTITION_HPP
#define SAMCIRT_PARTITION_HPP

// Subscan selection from the similarity of adjacent projections.
//
// s_i = SSIM(y_i, y_{i+1}) for N + 1 projections. The pair indices are split
// into contiguous segments S_1..S_n minimizing
//     n + lambda * sum_k Var({s_l : l in S_k})
// (population variance; a singleton has variance 0).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "samcirt/core.hpp"
#include "samcirt/parallel.hpp"
#include "samcirt/projector.hpp"

namespace samcirt {

struct SsimParams {
    /// Standard deviation of the Gaussian window, in pixels.
    double window = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;

    /// Half-width of the truncated window: 5 pixels (11 taps) at the default.
    [[nodiscard]] int radius() const { return std::max(1, static_cast<int>(std::floor(3.5 * window))); }

    void validate() const {
        check(window > 0.0, "partition", "SSIM window must be > 0");
        check(k1 > 0.0 && k2 > 0.0, "partition", "SSIM constants must be > 0");
        check(dynamic_range > 0.0 && std::isfinite(dynamic_range), "partition", "zero dynamic_range");
    }
};

namespace detail {

inline std::vector<double> gaussian_taps(const SsimParams& prm) {
    const int r = prm.radius();
    std::vector<double> w(std::size_t(2 * r + 1));
    for (int d = -r; d <= r; ++d) w[std::size_t(d + r)] = std::exp(-0.5 * double(d * d) / (prm.window * prm.window));
    return w;
}

/// Separable Gaussian mean with the window renormalized over in-image taps.
inline std::vector<double> local_mean(std::span<const double> img, std::size_t rows, std::size_t cols,
                                      std::span<const double> taps) {
    const auto r = static_cast<std::ptrdiff_t>(taps.size() / 2);
    std::vector<double> tmp(img.size()), out(img.size());
    for (std::size_t y = 0; y < rows; ++y) {
        for (std::size_t x = 0; x < cols; ++x) {
            double s = 0.0, ws = 0.0;
            for (std::ptrdiff_t d = -r; d <= r; ++d) {
                const auto xx = std::ptrdiff_t(x) + d;
                if (xx < 0 || xx >= std::ptrdiff_t(cols)) continue;
                const double w = taps[std::size_t(d + r)];
                s += w * img[y * cols + std::size_t(xx)];
                ws += w;
            }
            tmp[y * cols + x] = s / ws;
        }
    }
    for (std::size_t y = 0; y < rows; ++y) {
        for (std::size_t x = 0; x < cols; ++x) {
            double s = 0.0, ws = 0.0;
            for (std::ptrdiff_t d = -r; d <= r; ++d) {
                const auto yy = std::ptrdiff_t(y) + d;
                if (yy < 0 || yy >= std::ptrdiff_t(rows)) continue;
                const double w = taps[std::size_t(d + r)];
                s += w * tmp[std::size_t(yy) * cols + x];
                ws += w;
            }
            out[y * cols + x] = s / ws;
        }
    }
    return out;
}

} // namespace detail

/// Mean local SSIM of two equally shaped rows x cols images, with
/// Gaussian-weighted local statistics.
inline double ssim_pair(std::span<const double> a, std::span<const double> b, std::size_t rows, std::size_t cols,
                        const SsimParams& prm = {}) {
    prm.validate();
    check(a.size() == b.size() && a.size() == rows * cols && !a.empty(), "partition", "SSIM: shape mismatch");
    const auto taps = detail::gaussian_taps(prm);
    std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t n = 0; n < a.size(); ++n) {
        aa[n] = a[n] * a[n];
        bb[n] = b[n] * b[n];
        ab[n] = a[n] * b[n];
    }
    const auto mu_a = detail::local_mean(a, rows, cols, taps);
    const auto mu_b = detail::local_mean(b, rows, cols, taps);
    const auto e_aa = detail::local_mean(aa, rows, cols, taps);
    const auto e_bb = detail::local_mean(bb, rows, cols, taps);
    const auto e_ab = detail::local_mean(ab, rows, cols, taps);
    const double c1 = (prm.k1 * prm.dynamic_range) * (prm.k1 * prm.dynamic_range);
    const double c2 = (prm.k2 * prm.dynamic_range) * (prm.k2 * prm.dynamic_range);
    double total = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        const double va = e_aa[n] - mu_a[n] * mu_a[n];
        const double vb = e_bb[n] - mu_b[n] * mu_b[n];
        const double cov = e_ab[n] - mu_a[n] * mu_b[n];
        const double num = (2.0 * mu_a[n] * mu_b[n] + c1) * (2.0 * cov + c2);
        const double den = (mu_a[n] * mu_a[n] + mu_b[n] * mu_b[n] + c1) * (va + vb + c2);
        total += num / den;
    }
    return total / double(a.size());
}

/// s_i = SSIM(projection i, projection i + 1), clamped to [0, 1]. When
/// `params` is not given the defaults are used with dynamic_range set to
/// max - min over the whole stack.
inline std::vector<double> adjacent_ssim(const ProjArray& b, std::optional<SsimParams> params = std::nullopt) {
    check(b.n_angles >= 2, "partition", "adjacent SSIM needs at least 2 projections");
    SsimParams prm = params.value_or(SsimParams{});
    if (!params) {
        const auto [lo, hi] = std::minmax_element(b.data.begin(), b.data.end());
        prm.dynamic_range = *hi - *lo;
    }
    prm.validate();
    std::vector<double> s(b.n_angles - 1);
    parallel::for_each_index(s.size(), [&](std::size_t i) {
        s[i] = std::clamp(ssim_pair(b.image(i), b.image(i + 1), b.rows, b.cols, prm), 0.0, 1.0);
    });
    return s;
}

struct SubscanPlan {
    /// Contiguous half-open ranges of pair indices covering [0, N).
    std::vector<IndexRange> segments;
    std::vector<double> s;
    double lambda = 0.0;
    double objective_value = 0.0;

    [[nodiscard]] std::size_t n_segments() const noexcept { return segments.size(); }
};

/// Population variance of s over r, two-pass.
inline double segment_variance(std::span<const double> s, IndexRange r) {
    const double m = double(r.size());
    double mean = 0.0;
    for (std::size_t l = r.begin; l < r.end; ++l) mean += s[l];
    mean /= m;
    double v = 0.0;
    for (std::size_t l = r.begin; l < r.end; ++l) v += (s[l] - mean) * (s[l] - mean);
    return v / m;
}

/// n + lambda * sum of segment variances, evaluated directly.
inline double plan_objective(std::span<const double> s, std::span<const IndexRange> segments, double lambda) {
    double var_sum = 0.0;
    for (const auto& r : segments) var_sum += segment_variance(s, r);
    return double(segments.size()) + lambda * var_sum;
}

namespace detail {

/// Objectives closer than this are treated as ties.
inline constexpr double kPartitionTieTol = 1e-12;

inline void check_partition_inputs(std::span<const double> s, double lambda, std::optional<double> epsilon) {
    check(!s.empty(), "partition", "empty SSIM vector");
    check(lambda > 0.0 && std::isfinite(lambda), "partition", "lambda must be > 0");
    for (double v : s) check(v >= 0.0 && v <= 1.0, "partition", "SSIM values must lie in [0, 1]");
    check(!epsilon || *epsilon > 0.0, "partition", "epsilon must be > 0");
}

inline bool segment_feasible(std::span<const double> s, IndexRange r, std::optional<double> epsilon) {
    if (!epsilon) return true;
    const auto [lo, hi] = std::minmax_element(s.begin() + std::ptrdiff_t(r.begin), s.begin() + std::ptrdiff_t(r.end));
    return *hi - *lo < *epsilon;
}

} // namespace detail

/// Exact minimizer over contiguous partitions by dynamic programming over
/// suffixes, with O(1) segment variances from prefix sums. Ties go to fewer
/// segments, then to the lexicographically earliest boundaries. With
/// `epsilon`, segments with max - min >= epsilon are excluded.
inline SubscanPlan partition_exact(std::span<const double> s, double lambda,
                                   std::optional<double> epsilon = std::nullopt) {
    detail::check_partition_inputs(s, lambda, epsilon);
    const std::size_t n = s.size();
    std::vector<double> p1(n + 1, 0.0), p2(n + 1, 0.0);
    for (std::size_t l = 0; l < n; ++l) {
        p1[l + 1] = p1[l] + s[l];
        p2[l + 1] = p2[l] + s[l] * s[l];
    }
    auto var = [&](std::size_t i, std::size_t j) {
        const double m = double(j - i);
        const double mean = (p1[j] - p1[i]) / m;
        return std::max(0.0, (p2[j] - p2[i]) / m - mean * mean);
    };

    // best[i]: optimum over s[i..n); next[i]: end of its first segment.
    std::vector<double> best(n + 1, 0.0);
    std::vector<std::size_t> count(n + 1, 0), next(n + 1, n);
    for (std::size_t i = n; i-- > 0;) {
        bool found = false;
        double lo = s[i], hi = s[i];
        for (std::size_t j = i + 1; j <= n; ++j) {
            lo = std::min(lo, s[j - 1]);
            hi = std::max(hi, s[j - 1]);
            if (epsilon && hi - lo >= *epsilon) break;
            const double cand = 1.0 + lambda * var(i, j) + best[j];
            const std::size_t cnt = 1 + count[j];
            const bool better = !found || cand < best[i] - detail::kPartitionTieTol ||
                                (cand <= best[i] + detail::kPartitionTieTol && cnt < count[i]);
            if (better) {
                found = true;
                best[i] = cand;
                count[i] = cnt;
                next[i] = j;
            }
        }
    }

    SubscanPlan plan;
    for (std::size_t i = 0; i < n; i = next[i]) plan.segments.push_back({i, next[i]});
    plan.s.assign(s.begin(), s.end());
    plan.lambda = lambda;
    plan.objective_value = plan_objective(s, plan.segments, lambda);
    return plan;
}

/// Exhaustive search over all 2^(N-1) contiguous partitions (N <= 20), with
/// the same objective, feasibility rule and tie-breaks as partition_exact.
inline SubscanPlan partition_bruteforce(std::span<const double> s, double lambda,
                                        std::optional<double> epsilon = std::nullopt) {
    detail::check_partition_inputs(s, lambda, epsilon);
    const std::size_t n = s.size();
    check(n <= 20, "partition", "brute force limited to N <= 20");
    SubscanPlan plan;
    plan.s.assign(s.begin(), s.end());
    plan.lambda = lambda;
    bool found = false;
    std::vector<std::size_t> best_ends;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n - 1)); ++mask) {
        std::vector<IndexRange> segs;
        std::vector<std::size_t> ends;
        std::size_t start = 0;
        for (std::size_t b = 0; b + 1 < n; ++b) {
            if (mask & (std::uint64_t{1} << b)) {
                segs.push_back({start, b + 1});
                ends.push_back(b + 1);
                start = b + 1;
            }
        }
        segs.push_back({start, n});
        ends.push_back(n);
        if (!std::all_of(segs.begin(), segs.end(),
                         [&](const IndexRange& r) { return detail::segment_feasible(s, r, epsilon); }))
            continue;
        const double obj = plan_objective(s, segs, lambda);
        bool better = !found;
        if (found) {
            if (obj < plan.objective_value - detail::kPartitionTieTol) {
                better = true;
            } else if (obj <= plan.objective_value + detail::kPartitionTieTol) {
                if (segs.size() != plan.segments.size()) better = segs.size() < plan.segments.size();
                else better = std::lexicographical_compare(ends.begin(), ends.end(), best_ends.begin(), best_ends.end());
            }
        }
        if (better) {
            found = true;
            plan.segments = std::move(segs);
            plan.objective_value = obj;
            best_ends = std::move(ends);
        }
    }
    return plan;
}

/// Converts a partition of the N pair indices into subscans over the N + 1
/// projection angles. Pair l links angles l and l + 1; a segment boundary
/// after pair e closes the left subscan at angle e + 1, so a singleton
/// low-similarity pair ends the subscan at its left angle and isolates the
/// motion event. For segments {0,1},{2},{3} over 5 angles the result is
/// {0,1,2},{3},{4}.
inline std::vector<IndexRange> plan_to_subscans(const SubscanPlan& plan) {
    check(ranges_partition(plan.segments, plan.s.size()), "partition", "plan segments do not partition the pairs");
    const std::size_t n_angles = plan.s.size() + 1;
    std::vector<IndexRange> out;
    std::size_t start = 0;
    for (std::size_t k = 0; k + 1 < plan.segments.size(); ++k) {
        const std::size_t stop = plan.segments[k].end + 1;
        out.push_back({start, stop});
        start = stop;
    }
    out.push_back({start, n_angles});
    return out;
}

} // namespace samcirt

#endif // SAMCIRT_PARTITION_HPP
