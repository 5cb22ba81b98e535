#pragma once

#include <cstddef>
#include <functional>

namespace scv2 {

// Global worker pool. Work is always split into a chunk count that does not
// depend on the pool size, and chunk results are combined in chunk order, so
// numeric output is identical for any thread count (including 1).
//
// Calls from inside a worker run serially on the calling thread; nesting
// never deadlocks and never changes results.
class ThreadPool {
public:
    static ThreadPool& instance();

    // Resize the pool. Thread count is clamped to >= 1.
    void set_threads(int n);
    int threads() const;

    // Run fn(chunk) for chunk in [0, n_chunks). Blocks until done.
    void run_chunks(size_t n_chunks, const std::function<void(size_t)>& fn);

    // Force run_chunks on the calling thread to execute serially; used by
    // outer-level workers (e.g. per-block tuning threads) that must not
    // share the pool.
    static void set_force_serial(bool on);

private:
    ThreadPool();
    ~ThreadPool();
    struct Impl;
    Impl* impl_;
};

// Convenience: split [0, n) into chunks and call fn(begin, end, chunk_index).
void parallel_ranges(size_t n, size_t n_chunks,
                     const std::function<void(size_t, size_t, size_t)>& fn);

} // namespace scv2
