#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pmri {

/// Persistent worker pool for deterministic data parallelism. Work is
/// split into fixed index chunks so results do not depend on the number
/// of threads; every output element is written by exactly one chunk.
class ThreadPool {
 public:
  static ThreadPool& instance() {
    static ThreadPool pool;
    return pool;
  }

  void set_threads(int n) {
    std::unique_lock<std::mutex> lk(m_);
    target_threads_ = n < 1 ? 1 : n;
    int want = target_threads_ - 1;  // caller thread counts as one
    while (int(workers_.size()) < want)
      workers_.emplace_back([this] { worker_loop(); });
  }

  int threads() {
    std::unique_lock<std::mutex> lk(m_);
    return target_threads_;
  }

  /// Runs fn(chunk) for chunk in [0, nchunks). Blocks until every chunk
  /// is done and every helper has left the job before returning, so the
  /// job object can safely live on the caller's stack.
  void run(int nchunks, const std::function<void(int)>& fn) {
    if (nchunks <= 0) return;
    std::unique_lock<std::mutex> lk(m_);
    if (workers_.empty() || nchunks == 1) {
      lk.unlock();
      for (int i = 0; i < nchunks; ++i) fn(i);
      return;
    }
    job_ = &fn;
    next_chunk_.store(0);
    pending_ = nchunks;
    total_chunks_ = nchunks;
    ++generation_;
    cv_.notify_all();
    lk.unlock();

    work_off_chunks(&fn, nchunks);

    std::unique_lock<std::mutex> lk2(m_);
    done_cv_.wait(lk2, [&] { return pending_ == 0 && active_ == 0; });
    job_ = nullptr;
  }

  ~ThreadPool() {
    {
      std::unique_lock<std::mutex> lk(m_);
      shutdown_ = true;
      cv_.notify_all();
    }
    for (auto& t : workers_) t.join();
  }

 private:
  ThreadPool() = default;

  void work_off_chunks(const std::function<void(int)>* job, int total) {
    for (;;) {
      int c = next_chunk_.fetch_add(1);
      if (c >= total) break;
      (*job)(c);
      std::unique_lock<std::mutex> lk(m_);
      if (--pending_ == 0) done_cv_.notify_all();
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* job = nullptr;
      int total = 0;
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return shutdown_ || generation_ != seen; });
        if (shutdown_) return;
        seen = generation_;
        job = job_;
        total = total_chunks_;
        if (job != nullptr) ++active_;
      }
      if (job != nullptr) {
        work_off_chunks(job, total);
        std::unique_lock<std::mutex> lk(m_);
        if (--active_ == 0 && pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::mutex m_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> workers_;
  const std::function<void(int)>* job_ = nullptr;
  std::atomic<int> next_chunk_{0};
  int total_chunks_ = 0;
  int pending_ = 0;
  int active_ = 0;
  uint64_t generation_ = 0;
  int target_threads_ = 1;
  bool shutdown_ = false;
};

inline void set_threads(int n) { ThreadPool::instance().set_threads(n); }
inline int num_threads() { return ThreadPool::instance().threads(); }

/// Deterministic parallel loop: splits [0, n) into per-chunk ranges and
/// runs body(begin, end) on each. Single-threaded when the pool is.
inline void parallel_for(int n, const std::function<void(int, int)>& body) {
  int threads = num_threads();
  if (threads <= 1 || n <= 1) {
    body(0, n);
    return;
  }
  int chunks = threads < n ? threads : n;
  int per = (n + chunks - 1) / chunks;
  ThreadPool::instance().run(chunks, [&](int c) {
    int b = c * per;
    int e = b + per < n ? b + per : n;
    if (b < e) body(b, e);
  });
}

}  // namespace pmri
