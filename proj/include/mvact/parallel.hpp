// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace mvact {

/// Hardware concurrency, capped by MVACT_THREADS when set.
int worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work is split into
/// contiguous blocks; the first exception (lowest block) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int workers = worker_count());

}  // namespace mvact
