#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace dfindex {

/// Worker count: DF_THREADS if set to a positive integer, otherwise the
/// hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on worker_count() threads. Each index is
/// handled exactly once; results written per index keep reductions
/// deterministic. The exception of the lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace dfindex
