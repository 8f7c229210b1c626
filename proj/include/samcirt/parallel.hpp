#ifndef SAMCIRT_PARALLEL_HPP
#define SAMCIRT_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace samcirt::parallel {

namespace detail {
inline std::atomic<std::size_t>& thread_setting() {
    static std::atomic<std::size_t> value{0};
    return value;
}
} // namespace detail

/// Number of worker threads used by parallel loops. Defaults to
/// SAMCIRT_THREADS when set, otherwise the hardware concurrency.
inline std::size_t thread_count() {
    std::size_t n = detail::thread_setting().load();
    if (n != 0) return n;
    if (const char* env = std::getenv("SAMCIRT_THREADS")) {
        try {
            long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// 0 restores the default.
inline void set_thread_count(std::size_t n) { detail::thread_setting().store(n); }

/// Calls fn(begin, end) on contiguous chunks covering [0, n). Chunks may run
/// concurrently, so fn must only write outputs owned by its own indices.
template <typename Fn>
void for_chunks(std::size_t n, Fn&& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
        pool.emplace_back([&fn, n, workers, w] { fn(w * n / workers, (w + 1) * n / workers); });
    }
    fn(std::size_t{0}, n / workers);
}

template <typename Fn>
void for_each_index(std::size_t n, Fn&& fn) {
    for_chunks(n, [&fn](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

/// Scatter work is split into this many blocks regardless of the thread
/// count; block partials are summed in block order, so the result is
/// bit-identical for any number of threads.
inline constexpr std::size_t kReduceBlocks = 8;

/// Runs fn(item_begin, item_end, buffer) on kReduceBlocks fixed item blocks,
/// each accumulating into a private zeroed buffer of length out.size(), then
/// writes the ordered sum of the buffers to out.
template <typename Fn>
void scatter_reduce(std::size_t n_items, std::span<double> out, Fn&& fn) {
    const std::size_t blocks = std::min(kReduceBlocks, std::max<std::size_t>(n_items, 1));
    std::vector<std::vector<double>> partial(blocks, std::vector<double>(out.size(), 0.0));
    for_each_index(blocks, [&](std::size_t b) {
        fn(b * n_items / blocks, (b + 1) * n_items / blocks, std::span<double>(partial[b]));
    });
    for_chunks(out.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t v = lo; v < hi; ++v) {
            double s = 0.0;
            for (std::size_t b = 0; b < blocks; ++b) s += partial[b][v];
            out[v] = s;
        }
    });
}

/// Sum of fn(begin, end) partial results over fixed blocks, combined in order.
/// T must support operator+= and be default-constructible to zero.
template <typename T, typename Fn>
T block_sum(std::size_t n_items, T zero, Fn&& fn) {
    const std::size_t blocks = std::min(kReduceBlocks, std::max<std::size_t>(n_items, 1));
    std::vector<T> partial(blocks, zero);
    for_each_index(blocks, [&](std::size_t b) {
        partial[b] = fn(b * n_items / blocks, (b + 1) * n_items / blocks);
    });
    T total = zero;
    for (auto& p : partial) total += p;
    return total;
}

} // namespace samcirt::parallel

#endif // SAMCIRT_PARALLEL_HPP
