/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace bda {

template <class R>
std::vector<R> run_pool(int n, int jobs, const std::function<R(int)> & fn) {
  std::vector<R> out(static_cast<std::size_t>(std::max(n, 0)));
  const int workers = std::clamp(jobs, 1, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = fn(i);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < n; i = next++) out[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto & t : pool) t.join();
  for (const auto & e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace bda
