#include "manyhyp/parallel.hpp"

#include <algorithm>
#include <exception>

namespace manyhyp {

namespace {

std::pair<std::size_t, std::size_t> chunk(std::size_t n, std::size_t parts, std::size_t i) {
  const std::size_t base = n / parts;
  const std::size_t extra = n % parts;
  const std::size_t begin = i * base + std::min(i, extra);
  return {begin, begin + base + (i < extra ? 1 : 0)};
}

}  // namespace

WorkerPool::WorkerPool(int workers) {
  const int extra = std::max(workers, 1) - 1;
  for (int i = 0; i < extra; ++i) {
    threads_.emplace_back([this, i] { worker_loop(static_cast<std::size_t>(i) + 1); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  start_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::run(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (threads_.empty()) {
    fn(0, n);
    return;
  }
  const std::size_t parts = threads_.size() + 1;
  {
    std::lock_guard lock(mutex_);
    task_ = &fn;
    task_size_ = n;
    errors_.assign(parts, nullptr);
    pending_ = threads_.size();
    ++generation_;
  }
  start_.notify_all();
  const auto [b, e] = chunk(n, parts, 0);
  try {
    if (b < e) fn(b, e);
  } catch (...) {
    errors_[0] = std::current_exception();
  }
  std::unique_lock lock(mutex_);
  done_.wait(lock, [this] { return pending_ == 0; });
  task_ = nullptr;
  for (auto& err : errors_) {
    if (err) std::rethrow_exception(err);
  }
}

void WorkerPool::worker_loop(std::size_t id) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t, std::size_t)>* task = nullptr;
    std::size_t n = 0;
    {
      std::unique_lock lock(mutex_);
      start_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
      task = task_;
      n = task_size_;
    }
    const auto [b, e] = chunk(n, threads_.size() + 1, id);
    std::exception_ptr err;
    try {
      if (b < e) (*task)(b, e);
    } catch (...) {
      err = std::current_exception();
    }
    {
      std::lock_guard lock(mutex_);
      errors_[id] = err;
      if (--pending_ == 0) done_.notify_one();
    }
  }
}

}  // namespace manyhyp
