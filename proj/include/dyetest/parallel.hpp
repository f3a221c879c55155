#pragma once

#include <cstddef>
#include <functional>

namespace dyetest {

/// Runs fn(0) .. fn(count-1). jobs == 1 takes the serial reference path;
/// jobs <= 0 uses all hardware threads; otherwise `jobs` OpenMP threads.
/// Tasks must write results into disjoint slots — completion order is
/// unspecified, result placement is by index. The first exception thrown by
/// any task is rethrown after the loop drains.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace dyetest
