#include "scv2/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>
#include <cstdlib>

namespace scv2 {

struct ThreadPool::Impl {
    std::mutex mtx;
    std::condition_variable cv_work;
    std::condition_variable cv_done;
    std::vector<std::thread> workers;
    const std::function<void(size_t)>* job = nullptr;
    std::atomic<size_t> next_chunk{0};
    size_t n_chunks = 0;
    size_t active = 0;
    uint64_t generation = 0;
    bool job_open = false;
    bool stop = false;

    static thread_local bool on_worker;
    static thread_local bool force_serial;

    void worker_loop() {
        on_worker = true;
        std::unique_lock lk(mtx);
        uint64_t seen = 0;
        for (;;) {
            cv_work.wait(lk, [&] { return stop || generation != seen; });
            if (stop) return;
            seen = generation;
            if (!job_open) continue;
            auto* fn = job;
            size_t total = n_chunks;
            ++active;
            lk.unlock();
            for (;;) {
                size_t c = next_chunk.fetch_add(1);
                if (c >= total) break;
                (*fn)(c);
            }
            lk.lock();
            if (--active == 0) cv_done.notify_all();
        }
    }

    void shutdown() {
        {
            std::lock_guard lk(mtx);
            stop = true;
        }
        cv_work.notify_all();
        for (auto& t : workers) t.join();
        workers.clear();
        stop = false;
    }
};

thread_local bool ThreadPool::Impl::on_worker = false;
thread_local bool ThreadPool::Impl::force_serial = false;

void ThreadPool::set_force_serial(bool on) { Impl::force_serial = on; }

ThreadPool& ThreadPool::instance() {
    static ThreadPool pool;
    return pool;
}

ThreadPool::ThreadPool() : impl_(new Impl) {
    int n = 0;
    if (const char* env = std::getenv("SCV2_THREADS")) n = std::atoi(env);
    if (n <= 0) n = int(std::thread::hardware_concurrency());
    set_threads(n);
}

ThreadPool::~ThreadPool() {
    impl_->shutdown();
    delete impl_;
}

void ThreadPool::set_threads(int n) {
    if (n < 1) n = 1;
    impl_->shutdown();
    for (int i = 0; i + 1 < n; ++i)
        impl_->workers.emplace_back([this] { impl_->worker_loop(); });
}

int ThreadPool::threads() const { return int(impl_->workers.size()) + 1; }

void ThreadPool::run_chunks(size_t n_chunks, const std::function<void(size_t)>& fn) {
    if (n_chunks == 0) return;
    // Serial when nested or when the pool has no extra workers.
    if (Impl::on_worker || Impl::force_serial || impl_->workers.empty() || n_chunks == 1) {
        for (size_t c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    std::unique_lock lk(impl_->mtx);
    impl_->job = &fn;
    impl_->n_chunks = n_chunks;
    impl_->next_chunk.store(0);
    impl_->job_open = true;
    ++impl_->generation;
    impl_->cv_work.notify_all();
    lk.unlock();

    // The submitting thread participates too.
    for (;;) {
        size_t c = impl_->next_chunk.fetch_add(1);
        if (c >= n_chunks) break;
        fn(c);
    }

    lk.lock();
    impl_->cv_done.wait(lk, [&] { return impl_->active == 0; });
    // Close the job under the lock so late-waking workers never touch fn
    // after this call returns.
    impl_->job_open = false;
    impl_->job = nullptr;
}

void parallel_ranges(size_t n, size_t n_chunks,
                     const std::function<void(size_t, size_t, size_t)>& fn) {
    if (n == 0) return;
    if (n_chunks > n) n_chunks = n;
    size_t base = n / n_chunks, rem = n % n_chunks;
    ThreadPool::instance().run_chunks(n_chunks, [&](size_t c) {
        size_t begin = c * base + std::min(c, rem);
        size_t end = begin + base + (c < rem ? 1 : 0);
        fn(begin, end, c);
    });
}

} // namespace scv2
