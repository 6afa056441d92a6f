#pragma once

#include <cstddef>
#include <functional>

namespace xlkg {

/// Runs fn(i) for i in [0, n) on up to `threads` workers (1 = inline).
/// fn must only write to slots owned by i; the first exception is rethrown.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace xlkg
