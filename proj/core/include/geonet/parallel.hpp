#pragma once

#include <cstddef>
#include <functional>

namespace geonet {

/// Resolves a requested worker count; 0 means "all hardware threads".
unsigned resolve_threads(unsigned requested) noexcept;

/// Runs body(i) for every i in [0, count) on up to `threads` workers using
/// contiguous static chunks. Each index must write only its own outputs, so
/// results never depend on the worker count. The first exception thrown by any
/// worker is rethrown on the calling thread.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace geonet
