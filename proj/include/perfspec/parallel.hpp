#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace perfspec {

/// Fixed set of in-process workers running block-parallel loops. The calling
/// thread takes part, so a pool of size 1 spawns no threads. Each call to
/// for_each_block returns only after every block has finished.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t workers) : size_(std::max<std::size_t>(1, workers)) {
        threads_.reserve(size_ - 1);
        for (std::size_t i = 1; i < size_; ++i) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    ~WorkerPool() {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        start_.notify_all();
        for (auto& t : threads_) t.join();
    }

    [[nodiscard]] std::size_t size() const noexcept { return size_; }

    /// Runs fn(b) for every b in [0, blocks); blocks are claimed dynamically.
    void for_each_block(std::size_t blocks, const std::function<void(std::size_t)>& fn) {
        if (size_ == 1 || blocks <= 1) {
            for (std::size_t b = 0; b < blocks; ++b) fn(b);
            return;
        }
        {
            std::lock_guard lock(mutex_);
            task_ = &fn;
            blocks_ = blocks;
            next_.store(0);
            busy_ = threads_.size();
            ++generation_;
        }
        start_.notify_all();
        drain();
        std::unique_lock lock(mutex_);
        done_.wait(lock, [this] { return busy_ == 0; });
        task_ = nullptr;
    }

private:
    void drain() {
        for (;;) {
            const auto b = next_.fetch_add(1);
            if (b >= blocks_) return;
            (*task_)(b);
        }
    }

    void worker_loop() {
        std::size_t seen = 0;
        for (;;) {
            {
                std::unique_lock lock(mutex_);
                start_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            drain();
            {
                std::lock_guard lock(mutex_);
                --busy_;
            }
            done_.notify_one();
        }
    }

    std::size_t size_;
    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable start_;
    std::condition_variable done_;
    const std::function<void(std::size_t)>* task_{nullptr};
    std::size_t blocks_{0};
    std::atomic<std::size_t> next_{0};
    std::size_t busy_{0};
    std::size_t generation_{0};
    bool stop_{false};
};

} // namespace perfspec
