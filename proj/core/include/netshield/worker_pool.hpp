#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace netshield {

/// Fixed set of worker threads executing indexed batches. One batch runs at a
/// time; parallel_for blocks until every index completed and rethrows the
/// first exception raised by a task.
class WorkerPool {
 public:
  /// threads < 1 is clamped to 1.
  explicit WorkerPool(int threads);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  void parallel_for(int count, const std::function<void(int)>& fn);
  int size() const { return static_cast<int>(threads_.size()); }

 private:
  void worker_loop();

  std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* task_ = nullptr;
  int next_index_ = 0;
  int total_ = 0;
  int remaining_ = 0;
  std::exception_ptr error_;
  bool stop_ = false;
  std::vector<std::thread> threads_;
};

}  // namespace netshield
