#pragma once

#include <cstddef>
#include <future>
#include <thread>
#include <vector>

namespace koopstab {

// Runs fn(i) for i in [0, n); work is split over threads by fixed chunks.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    if (n == 0) return;
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(hw, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::future<void>> futs;
    futs.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        futs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        }));
    }
    for (auto& f : futs) f.get();
}

// Deterministic map-reduce: chunks are mapped (possibly in parallel) and
// combined in a fixed binary-tree order, so floating-point sums are
// reproducible regardless of scheduling.
template <class R, class MapFn, class ReduceFn>
R tree_mapreduce(std::size_t lo, std::size_t hi, const MapFn& map, const ReduceFn& reduce, int par_depth = 3) {
    if (hi - lo == 1) return map(lo);
    const std::size_t mid = lo + (hi - lo) / 2;
    if (par_depth > 0) {
        auto right = std::async(std::launch::async, [&] {
            return tree_mapreduce<R>(mid, hi, map, reduce, par_depth - 1);
        });
        R left = tree_mapreduce<R>(lo, mid, map, reduce, par_depth - 1);
        return reduce(std::move(left), right.get());
    }
    R left = tree_mapreduce<R>(lo, mid, map, reduce, 0);
    R right = tree_mapreduce<R>(mid, hi, map, reduce, 0);
    return reduce(std::move(left), std::move(right));
}

}  // namespace koopstab
