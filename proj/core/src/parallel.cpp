#include "csddp/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace csddp {

namespace {

std::size_t initial_default() {
  if (const char* env = std::getenv("CSDDP_THREADS")) {
    try {
      const auto v = std::stoul(env);
      if (v > 0) return v;
    } catch (...) {
    }
  }
  return hardware_threads();
}

std::atomic<std::size_t>& default_slot() {
  static std::atomic<std::size_t> slot{initial_default()};
  return slot;
}

}  // namespace

std::size_t hardware_threads() {
  const auto n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

std::size_t default_threads() { return default_slot().load(); }

void set_default_threads(std::size_t threads) { default_slot().store(std::max<std::size_t>(threads, 1)); }

std::size_t resolve_threads(std::size_t requested) { return requested == 0 ? default_threads() : requested; }

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  if (count == 0) return;
  threads = std::min(resolve_threads(threads), count);
  if (threads == 1) {
    body(0, count, 0);
    return;
  }
  const std::size_t base = count / threads;
  const std::size_t extra = count % threads;

  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    std::size_t begin = 0;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t end = begin + base + (w < extra ? 1 : 0);
      workers.emplace_back([&, begin, end, w] {
        try {
          body(begin, end, w);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
      begin = end;
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace csddp
