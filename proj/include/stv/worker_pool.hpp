#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace stv {

/// Fixed-size fork/join pool. The calling thread takes part in every
/// parallel_for, so a pool of size 1 owns no threads and runs inline.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t threads);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const noexcept { return workers_.size() + 1; }

  /// Runs body(i) for every i in [0, n). Indices are split into size()
  /// contiguous blocks; block b always goes to the same participant, so
  /// per-index work is reproducible. Rethrows the first exception raised.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

 private:
  void worker_loop(std::size_t slot);
  void run_block(std::size_t slot);

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* body_ = nullptr;
  std::size_t count_ = 0;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stopping_ = false;
  std::exception_ptr error_;
};

/// Runs body over [0, n) on `pool`, or inline when pool is null.
inline void parallel_for(WorkerPool* pool, std::size_t n,
                         const std::function<void(std::size_t)>& body) {
  if (pool == nullptr || pool->size() == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  pool->parallel_for(n, body);
}

}  // namespace stv
