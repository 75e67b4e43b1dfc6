#include "netshield/worker_pool.hpp"

#include <algorithm>

namespace netshield {

WorkerPool::WorkerPool(int threads) {
  const int n = std::max(1, threads);
  threads_.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) threads_.emplace_back([this] { worker_loop(); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  work_cv_.notify_all();
  for (std::thread& t : threads_) t.join();
}

void WorkerPool::parallel_for(int count, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  std::unique_lock lock(mu_);
  task_ = &fn;
  next_index_ = 0;
  total_ = count;
  remaining_ = count;
  error_ = nullptr;
  work_cv_.notify_all();
  done_cv_.wait(lock, [this] { return remaining_ == 0; });
  task_ = nullptr;
  if (error_) std::rethrow_exception(error_);
}

void WorkerPool::worker_loop() {
  std::unique_lock lock(mu_);
  while (true) {
    work_cv_.wait(lock, [this] { return stop_ || (task_ && next_index_ < total_); });
    if (stop_) return;
    while (task_ && next_index_ < total_) {
      const int i = next_index_++;
      const auto* fn = task_;
      lock.unlock();
      std::exception_ptr err;
      try {
        (*fn)(i);
      } catch (...) {
        err = std::current_exception();
      }
      lock.lock();
      if (err && !error_) error_ = err;
      if (--remaining_ == 0) done_cv_.notify_all();
    }
  }
}

}  // namespace netshield
