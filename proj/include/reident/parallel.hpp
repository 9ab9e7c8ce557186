// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace reident {

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Splits [0, n) into at most `parts` contiguous non-empty ranges.
inline std::vector<IndexRange> splitRange(std::size_t n, std::size_t parts) {
  std::vector<IndexRange> out;
  if (n == 0) return out;
  parts = std::clamp<std::size_t>(parts, 1, n);
  const std::size_t base = n / parts;
  const std::size_t extra = n % parts;
  std::size_t begin = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    out.push_back({begin, begin + len});
    begin += len;
  }
  return out;
}

/// Runs task(i) for i in [0, tasks) on up to `threads` workers. Tasks are
/// assigned statically, so callers that write results into slot i get
/// output independent of the worker count. The exception of the lowest
/// failing task is rethrown.
template <typename Fn>
void parallelTasks(std::size_t tasks, std::size_t threads, Fn&& task) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(tasks, 1));
  std::vector<std::exception_ptr> errors(tasks);
  auto worker = [&](std::size_t w) {
    for (std::size_t i = w; i < tasks; i += threads) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace reident
