#pragma once

#include <cstddef>
#include <functional>

namespace csddp {

/// Number of hardware threads, at least 1.
std::size_t hardware_threads();

/// Process-wide default worker count used when a component is asked for 0 threads.
/// Initialised from the CSDDP_THREADS environment variable, else hardware_threads().
std::size_t default_threads();
void set_default_threads(std::size_t threads);

/// Resolves a requested worker count (0 means default_threads()).
std::size_t resolve_threads(std::size_t requested);

/// Splits [0, count) into at most `threads` contiguous chunks and runs
/// body(begin, end, worker) for each, worker in [0, threads). Chunk boundaries
/// depend only on (count, threads); callers that write results into
/// index-addressed slots therefore get output independent of scheduling.
/// The first exception thrown by any chunk is rethrown on the calling thread.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t begin, std::size_t end, std::size_t worker)>& body);

}  // namespace csddp
