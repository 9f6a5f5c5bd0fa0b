// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace lol {

/// Worker cap used by batch APIs. 0 means "not set", in which case the
/// LOL_THREADS environment variable is consulted, then hardware concurrency.
void set_thread_limit(std::size_t n) noexcept;
std::size_t thread_limit() noexcept;

/// Runs fn(i) for i in [0, count) over at most `threads` workers using static
/// contiguous chunks. Callers write results into index-addressed slots, so the
/// output does not depend on scheduling. The first exception thrown by any
/// worker is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(count, begin + chunk);
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  parallel_for(count, thread_limit(), std::forward<Fn>(fn));
}

}  // namespace lol
