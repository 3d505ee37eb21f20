#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <type_traits>
#include <vector>

namespace riot {

/// Applies fn to 0..count-1 on up to max_workers threads. Results come back in
/// index order. The first exception (by index) is rethrown after all workers join.
template <class Fn>
auto parallel_map(std::size_t count, std::size_t max_workers, Fn &&fn)
    -> std::vector<std::invoke_result_t<Fn &, std::size_t>> {
  using Result = std::invoke_result_t<Fn &, std::size_t>;
  std::vector<Result> results(count);
  std::vector<std::exception_ptr> errors(count);
  const std::size_t workers = std::min(count, std::max<std::size_t>(1, max_workers));

  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      results[i] = fn(i);
    }
    return results;
  }

  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            results[i] = fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto &e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return results;
}

} // namespace riot
