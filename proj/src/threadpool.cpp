#include "tdcn/threadpool.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace tdcn {
namespace {

// A persistent pool; jobs are (chunk index -> work). Workers pull chunk
// indices from a shared counter, so scheduling is dynamic but every chunk's
// output depends only on the chunk index.
class Pool {
public:
    static Pool& instance() {
        static Pool pool;
        return pool;
    }

    int workers() const { return workers_; }

    void run(int64_t chunks, const std::function<void(int64_t)>& body) {
        if (chunks <= 0) return;
        if (chunks == 1 || workers_ == 1) {
            for (int64_t c = 0; c < chunks; ++c) body(c);
            return;
        }
        // Callers on distinct application threads serialize here; each still
        // gets the full pool for its own parallel section.
        std::lock_guard<std::mutex> run_lock(run_mu_);
        {
            std::unique_lock<std::mutex> lk(mu_);
            body_ = &body;
            next_ = 0;
            total_ = chunks;
            pending_ = chunks;
            ++generation_;
        }
        cv_.notify_all();
        // The calling thread participates.
        work();
        std::unique_lock<std::mutex> lk(mu_);
        done_cv_.wait(lk, [&] { return pending_ == 0; });
        body_ = nullptr;
    }

private:
    Pool() {
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw <= 0) hw = 1;
        workers_ = hw;
        if (const char* env = std::getenv("TDCN_THREADS")) {
            int cap = std::atoi(env);
            if (cap >= 1) workers_ = std::min(workers_, cap);
        }
        for (int i = 0; i + 1 < workers_; ++i)
            threads_.emplace_back([this] { worker_loop(); });
    }

    ~Pool() {
        {
            std::unique_lock<std::mutex> lk(mu_);
            shutdown_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void worker_loop() {
        uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return shutdown_ || (body_ && generation_ != seen); });
                if (shutdown_) return;
                seen = generation_;
            }
            work();
        }
    }

    void work() {
        for (;;) {
            int64_t c = next_.fetch_add(1, std::memory_order_relaxed);
            if (c >= total_) break;
            (*body_)(c);
            if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
                std::unique_lock<std::mutex> lk(mu_);
                done_cv_.notify_all();
            }
        }
    }

    int workers_ = 1;
    std::vector<std::thread> threads_;
    std::mutex run_mu_;
    std::mutex mu_;
    std::condition_variable cv_, done_cv_;
    const std::function<void(int64_t)>* body_ = nullptr;
    std::atomic<int64_t> next_{0};
    int64_t total_ = 0;
    std::atomic<int64_t> pending_{0};
    uint64_t generation_ = 0;
    bool shutdown_ = false;
};

} // namespace

int worker_count() { return Pool::instance().workers(); }

int64_t chunk_count(int64_t n, int64_t chunk_size) {
    return (n + chunk_size - 1) / chunk_size;
}

void parallel_chunks(int64_t n, int64_t chunk_size,
                     const std::function<void(int64_t, int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    int64_t chunks = chunk_count(n, chunk_size);
    Pool::instance().run(chunks, [&](int64_t c) {
        int64_t b = c * chunk_size;
        int64_t e = std::min(n, b + chunk_size);
        fn(c, b, e);
    });
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    // Fixed grain: enough chunks for the largest pools we expect, small
    // enough that tiny loops stay on one thread.
    int64_t grain = std::max<int64_t>(1024, n / 64);
    parallel_chunks(n, grain, [&](int64_t, int64_t b, int64_t e) { fn(b, e); });
}

} // namespace tdcn
