#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace annkit {

/// Runs fn over [0, n) split into `workers` contiguous chunks. workers <= 1
/// runs inline on the calling thread. Chunk boundaries depend only on
/// (n, workers), so any per-chunk state a caller keeps is reproducible.
inline void parallel_for(std::uint32_t n, std::uint32_t workers,
                         const std::function<void(std::uint32_t begin, std::uint32_t end)>& fn) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        fn(0, n);
        return;
    }
    if (workers > n) workers = n;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    const std::uint32_t chunk = n / workers;
    const std::uint32_t rem = n % workers;
    std::uint32_t begin = 0;
    for (std::uint32_t w = 0; w < workers; ++w) {
        const std::uint32_t end = begin + chunk + (w < rem ? 1 : 0);
        threads.emplace_back([&fn, begin, end] { fn(begin, end); });
        begin = end;
    }
    for (auto& t : threads) t.join();
}

}  // namespace annkit
