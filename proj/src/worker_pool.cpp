#include "flycoo/worker_pool.hpp"

#include "flycoo/error.hpp"

namespace flycoo {

WorkerPool::WorkerPool(std::size_t workers) {
  if (workers == 0) throw Error("worker count must be positive");
  threads_.reserve(workers - 1);
  for (std::size_t id = 1; id < workers; ++id) threads_.emplace_back([this, id] { loop(id); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  start_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::run(const std::function<void(std::size_t)>& body) {
  {
    std::lock_guard lock(mu_);
    body_ = &body;
    pending_ = threads_.size();
    ++generation_;
  }
  start_cv_.notify_all();
  body(0);
  std::unique_lock lock(mu_);
  done_cv_.wait(lock, [this] { return pending_ == 0; });
  body_ = nullptr;
}

void WorkerPool::loop(std::size_t id) {
  std::uint64_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t)>* body;
    {
      std::unique_lock lock(mu_);
      start_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      body = body_;
    }
    (*body)(id);
    {
      std::lock_guard lock(mu_);
      --pending_;
    }
    done_cv_.notify_one();
  }
}

}  // namespace flycoo
