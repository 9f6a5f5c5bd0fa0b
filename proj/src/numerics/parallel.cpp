// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace lol {

namespace {
std::atomic<std::size_t> g_thread_limit{0};
}

void set_thread_limit(std::size_t n) noexcept { g_thread_limit.store(n); }

std::size_t thread_limit() noexcept {
  if (const std::size_t n = g_thread_limit.load(); n > 0) return n;
  if (const char* env = std::getenv("LOL_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace lol
