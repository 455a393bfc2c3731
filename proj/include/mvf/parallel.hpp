#pragma once

#include <atomic>
#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mvf {

// Work is always split into fixed-size chunks whose boundaries depend only on
// the range, never on the thread count. Reductions combine per-chunk partials
// in chunk order, so results are identical for any pool size.
class ThreadPool {
 public:
  explicit ThreadPool(int threads = 0) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    thread_count_ = threads;
    for (int i = 0; i + 1 < threads; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_task_.notify_all();
    for (auto& w : workers_) w.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int thread_count() const { return thread_count_; }

  void parallel_chunks(int begin, int end, int chunk,
                       const std::function<void(int, int)>& fn) {
    if (end <= begin) return;
    if (chunk < 1) chunk = 1;
    const int nchunks = (end - begin + chunk - 1) / chunk;
    if (workers_.empty() || nchunks == 1) {
      for (int i = 0; i < nchunks; ++i) {
        int b = begin + i * chunk;
        fn(b, std::min(end, b + chunk));
      }
      return;
    }

    Job job;
    job.fn = &fn;
    job.begin = begin;
    job.end = end;
    job.chunk = chunk;
    job.nchunks = nchunks;
    {
      std::lock_guard<std::mutex> lk(mu_);
      current_job_ = &job;
      ++generation_;
    }
    cv_task_.notify_all();
    run_chunks(job);
    {
      std::unique_lock<std::mutex> lk(mu_);
      cv_done_.wait(lk, [&] {
        return job.done_chunks == job.nchunks && job.workers_inside == 0;
      });
      current_job_ = nullptr;
    }
    if (job.error) std::rethrow_exception(job.error);
  }

  template <typename T, typename ChunkFn, typename CombineFn>
  T parallel_reduce(int begin, int end, int chunk, T init, const ChunkFn& chunk_fn,
                    const CombineFn& combine) {
    if (end <= begin) return init;
    if (chunk < 1) chunk = 1;
    const int nchunks = (end - begin + chunk - 1) / chunk;
    std::vector<T> partials(nchunks, init);
    parallel_chunks(begin, end, chunk, [&](int b, int e) {
      int idx = (b - begin) / chunk;
      partials[idx] = chunk_fn(b, e, partials[idx]);
    });
    T total = init;
    for (auto& p : partials) total = combine(std::move(total), std::move(p));
    return total;
  }

 private:
  struct Job {
    const std::function<void(int, int)>* fn = nullptr;
    int begin = 0, end = 0, chunk = 1, nchunks = 0;
    std::atomic<int> next{0};
    int done_chunks = 0;     // guarded by mu_
    int workers_inside = 0;  // guarded by mu_
    std::exception_ptr error;
  };

  void run_chunks(Job& job) {
    while (true) {
      int i = job.next.fetch_add(1, std::memory_order_relaxed);
      if (i >= job.nchunks) break;
      int b = job.begin + i * job.chunk;
      std::exception_ptr err;
      try {
        (*job.fn)(b, std::min(job.end, b + job.chunk));
      } catch (...) {
        err = std::current_exception();
      }
      std::lock_guard<std::mutex> lk(mu_);
      if (err && !job.error) job.error = err;
      if (++job.done_chunks == job.nchunks) cv_done_.notify_all();
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    while (true) {
      Job* job = nullptr;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_task_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = current_job_;
        if (job) ++job->workers_inside;
      }
      if (!job) continue;
      run_chunks(*job);
      std::lock_guard<std::mutex> lk(mu_);
      if (--job->workers_inside == 0) cv_done_.notify_all();
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_task_;
  std::condition_variable cv_done_;
  bool stop_ = false;
  uint64_t generation_ = 0;
  Job* current_job_ = nullptr;
  int thread_count_ = 1;
};

inline void for_chunks(ThreadPool* pool, int begin, int end, int chunk,
                       const std::function<void(int, int)>& fn) {
  if (pool) {
    pool->parallel_chunks(begin, end, chunk, fn);
    return;
  }
  if (end <= begin) return;
  if (chunk < 1) chunk = 1;
  for (int b = begin; b < end; b += chunk) fn(b, std::min(end, b + chunk));
}

// Same partial-then-combine order with or without a pool, so a result never
// depends on how the work was scheduled.
template <typename T, typename ChunkFn, typename CombineFn>
T reduce_chunks(ThreadPool* pool, int begin, int end, int chunk, T init,
                const ChunkFn& chunk_fn, const CombineFn& combine) {
  if (pool) return pool->parallel_reduce(begin, end, chunk, init, chunk_fn, combine);
  if (end <= begin) return init;
  if (chunk < 1) chunk = 1;
  T total = init;
  for (int b = begin; b < end; b += chunk) {
    T part = chunk_fn(b, std::min(end, b + chunk), init);
    total = combine(std::move(total), std::move(part));
  }
  return total;
}

}  // namespace mvf
