#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace manyhyp {

// Fixed set of worker threads for data-parallel loops. Work is split into
// contiguous static chunks; callers keep results indexed by item so that the
// outcome never depends on the worker count. One worker runs inline.
class WorkerPool {
 public:
  explicit WorkerPool(int workers = 1);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  int size() const { return static_cast<int>(threads_.size()) + 1; }

  // Calls fn(begin, end) over a partition of [0, n). Rethrows the exception
  // of the lowest-indexed failing chunk after all chunks finish.
  void run(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

 private:
  void worker_loop(std::size_t id);

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable start_;
  std::condition_variable done_;
  const std::function<void(std::size_t, std::size_t)>* task_ = nullptr;
  std::size_t task_size_ = 0;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  std::vector<std::exception_ptr> errors_;
  bool stopping_ = false;
};

}  // namespace manyhyp
