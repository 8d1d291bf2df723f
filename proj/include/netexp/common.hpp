#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace netexp {

// Error taxonomy; the CLI maps these onto exit codes 2/3/4.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Rounding { HalfAwayFromZero, HalfToEven };

inline long round_to_int(double v, Rounding rule = Rounding::HalfAwayFromZero) {
  switch (rule) {
    case Rounding::HalfAwayFromZero:
      return std::llround(v);
    case Rounding::HalfToEven: {
      double r = std::nearbyint(v);  // assumes default FE_TONEAREST
      return static_cast<long>(r);
    }
  }
  return std::llround(v);
}

// Deterministic parallel map: item i writes only to slot i, so results are
// identical for any thread count. If several items throw, the exception of
// the lowest index is rethrown.
inline void parallel_for(long n, int threads, const std::function<void(long)>& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  const int t = static_cast<int>(std::min<long>(threads, n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(t));
  std::vector<long> error_index(static_cast<std::size_t>(t), -1);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(t));
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&, w]() {
      for (long i = w; i < n; i += t) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
          error_index[static_cast<std::size_t>(w)] = i;
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  long best = -1;
  std::exception_ptr first;
  for (int w = 0; w < t; ++w) {
    if (errors[static_cast<std::size_t>(w)] &&
        (best < 0 || error_index[static_cast<std::size_t>(w)] < best)) {
      best = error_index[static_cast<std::size_t>(w)];
      first = errors[static_cast<std::size_t>(w)];
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace netexp
