#pragma once

#include <cstddef>
#include <functional>

namespace phonon {

/// Runs task(i) for every i in [0, n) and returns when all are done. Tasks write
/// their results by index, so the gathered order is deterministic regardless of
/// scheduling. The first exception (lowest index) is rethrown.
using FanOut = std::function<void(std::size_t n, const std::function<void(std::size_t)>& task)>;

FanOut serial_fan_out();

/// Fan-out over `threads` worker threads (1 = run inline).
FanOut thread_fan_out(unsigned threads);

/// Default worker count: std::thread::hardware_concurrency(), at least 1.
unsigned default_thread_count();

} // namespace phonon
