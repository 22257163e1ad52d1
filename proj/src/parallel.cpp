#include "owd/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace owd {

namespace {
int g_workers = 1;
}

void set_workers(int n) { g_workers = n < 0 ? 1 : n; }

int workers() {
    if (g_workers == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }
    return g_workers;
}

void parallel_for(std::int64_t n, std::int64_t chunk,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    if (chunk <= 0) chunk = 1;
    const std::int64_t nchunks = chunk_count(n, chunk);
    const int nthreads = static_cast<int>(std::min<std::int64_t>(workers(), nchunks));
    if (nthreads <= 1) {
        for (std::int64_t c = 0; c < nchunks; ++c)
            fn(c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::int64_t c = next.fetch_add(1);
            if (c >= nchunks) break;
            fn(c * chunk, std::min(n, (c + 1) * chunk));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads) - 1);
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

}  // namespace owd
