#pragma once

#include <cstddef>
#include <functional>

namespace hpin {

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work items are
/// claimed dynamically; callers must make body(i) independent of which
/// thread runs it.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

/// Worker count used when a caller passes threads = 0.
unsigned default_threads();

}  // namespace hpin
