#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace pflow {

// Runs fn(index, lane) for index in [0, n), indices split round-robin over
// lanes. Lanes must not share outputs; callers combine per-index results in
// canonical index order afterwards, so results never depend on the lane
// count or the schedule.
inline void parallel_for_index(int n, int n_lanes, const std::function<void(int, int)>& fn) {
  n_lanes = std::max(1, std::min(n_lanes, n));
  if (n_lanes == 1) {
    for (int i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(n_lanes);
  threads.reserve(n_lanes);
  for (int lane = 0; lane < n_lanes; ++lane)
    threads.emplace_back([&, lane] {
      try {
        for (int i = lane; i < n; i += n_lanes) fn(i, lane);
      } catch (...) {
        errors[lane] = std::current_exception();
      }
    });
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pflow
