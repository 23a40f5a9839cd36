#pragma once

#include <cstddef>
#include <functional>

namespace wregress {

/// Worker count for pure, embarrassingly parallel loops. Honors the
/// WREGRESS_THREADS environment variable as an upper bound.
std::size_t thread_count();

/// Calls body(begin, end) on disjoint chunks covering [0, n). Chunks never
/// share output slots, so results do not depend on the thread count.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 4096);

}  // namespace wregress
