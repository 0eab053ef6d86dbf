#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mpqmc {

// Fixed fan-out pool for embarrassingly parallel slot work. run(count, fn)
// evaluates fn(i) for every i in [0, count); each index must write only its
// own output slot, which keeps results identical for any worker count. The
// first exception thrown by fn is rethrown on the calling thread after all
// indices have been attempted. One ThreadPool never runs two jobs at once;
// the orchestrating loop owns it.
class ThreadPool {
 public:
  explicit ThreadPool(int workers) : workers_(workers < 1 ? 1 : workers) {
    for (int i = 1; i < workers_; ++i) threads_.emplace_back([this] { worker_loop(); });
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int workers() const { return workers_; }

  void run(int count, const std::function<void(int)>& fn) {
    if (count <= 0) return;
    if (workers_ == 1 || count == 1) {
      std::exception_ptr err;
      for (int i = 0; i < count; ++i) {
        try {
          fn(i);
        } catch (...) {
          if (!err) err = std::current_exception();
        }
      }
      if (err) std::rethrow_exception(err);
      return;
    }

    std::unique_lock<std::mutex> lk(mu_);
    fn_ = &fn;
    count_ = count;
    next_.store(0, std::memory_order_relaxed);
    active_ = workers_ - 1;
    error_ = nullptr;
    ++generation_;
    lk.unlock();
    cv_.notify_all();

    drain(fn);

    lk.lock();
    done_cv_.wait(lk, [this] { return active_ == 0; });
    fn_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void worker_loop() {
    std::uint64_t seen = 0;
    std::unique_lock<std::mutex> lk(mu_);
    for (;;) {
      cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      const std::function<void(int)>* fn = fn_;
      lk.unlock();
      drain(*fn);
      lk.lock();
      if (--active_ == 0) done_cv_.notify_one();
    }
  }

  void drain(const std::function<void(int)>& fn) {
    for (;;) {
      const int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= count_) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu_);
        if (!error_) error_ = std::current_exception();
      }
    }
  }

  int workers_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  int count_ = 0;
  std::atomic<int> next_{0};
  int active_ = 0;
  std::uint64_t generation_ = 0;
  std::exception_ptr error_;
  bool stop_ = false;
};

}  // namespace mpqmc
