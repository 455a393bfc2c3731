#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <vector>

#include "mvf/parallel.hpp"

using namespace mvf;

TEST_SUITE("parallel") {

TEST_CASE("parallel_chunks covers every index once") {
  ThreadPool pool(4);
  std::vector<std::atomic<int>> hits(1000);
  for (auto& h : hits) h = 0;
  pool.parallel_chunks(0, 1000, 7, [&](int b, int e) {
    for (int i = b; i < e; ++i) ++hits[i];
  });
  for (auto& h : hits) CHECK(h == 1);
}

TEST_CASE("parallel_chunks with empty range is a no-op") {
  ThreadPool pool(2);
  bool ran = false;
  pool.parallel_chunks(5, 5, 4, [&](int, int) { ran = true; });
  CHECK_FALSE(ran);
}

TEST_CASE("reduction result is independent of thread count") {
  // non-associative float sum: fixed chunking + in-order combine must make the
  // answer bit-identical at any pool width
  std::vector<float> data(4099);
  for (size_t i = 0; i < data.size(); ++i) {
    data[i] = std::sin(0.37f * float(i)) * 1e-3f + float(i % 19) * 1e4f;
  }
  auto chunk_sum = [&](int b, int e, float acc) {
    for (int i = b; i < e; ++i) acc += data[i];
    return acc;
  };
  auto combine = [](float a, float b) { return a + b; };

  const float serial =
      reduce_chunks<float>(nullptr, 0, int(data.size()), 64, 0.0f, chunk_sum,
                           combine);
  for (int threads : {1, 2, 4, 8}) {
    ThreadPool pool(threads);
    const float parallel = reduce_chunks<float>(
        &pool, 0, int(data.size()), 64, 0.0f, chunk_sum, combine);
    CHECK(parallel == serial);
  }
}

TEST_CASE("exceptions from workers propagate") {
  ThreadPool pool(4);
  CHECK_THROWS_WITH_AS(
      pool.parallel_chunks(0, 100, 1,
                           [&](int b, int) {
                             if (b == 57) throw std::runtime_error("boom 57");
                           }),
      "boom 57", std::runtime_error);
  // pool stays usable afterwards
  std::atomic<int> n{0};
  pool.parallel_chunks(0, 10, 1, [&](int, int) { ++n; });
  CHECK(n == 10);
}

TEST_CASE("pool runs back-to-back jobs without cross-talk") {
  ThreadPool pool(4);
  for (int round = 0; round < 50; ++round) {
    std::atomic<long> sum{0};
    pool.parallel_chunks(0, 256, 3, [&](int b, int e) {
      long local = 0;
      for (int i = b; i < e; ++i) local += i;
      sum += local;
    });
    CHECK(sum == 256 * 255 / 2);
  }
}

TEST_CASE("for_chunks falls back to the calling thread without a pool") {
  int count = 0;
  for_chunks(nullptr, 0, 10, 4, [&](int b, int e) { count += e - b; });
  CHECK(count == 10);
}

}  // TEST_SUITE
