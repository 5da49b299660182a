#include "uspas/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace uspas {
namespace {

int initial_thread_count() {
  if (const char* env = std::getenv("USPAS_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> threads{initial_thread_count()};
  return threads;
}

}  // namespace

int default_thread_count() { return thread_setting().load(); }

void set_default_thread_count(int threads) {
  thread_setting().store(threads > 0 ? threads : initial_thread_count());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int threads) {
  if (n == 0) return;
  const auto workers = static_cast<std::size_t>(
      std::clamp<long>(threads > 0 ? threads : default_thread_count(), 1,
                       static_cast<long>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace uspas
