#pragma once

#include <cstdint>
#include <functional>

namespace owd {

// Worker count for data-parallel kernels. 0 means hardware concurrency.
void set_workers(int n);
int workers();

// Runs fn(begin, end) over [0, n) split into fixed-size chunks. Chunk
// boundaries do not depend on the worker count, so kernels that write
// disjoint ranges (or reduce per-chunk slots in chunk order) produce
// bitwise-identical results for any number of workers.
void parallel_for(std::int64_t n, std::int64_t chunk,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

inline std::int64_t chunk_count(std::int64_t n, std::int64_t chunk) {
    return (n + chunk - 1) / chunk;
}

}  // namespace owd
