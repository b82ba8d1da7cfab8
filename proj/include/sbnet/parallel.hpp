#pragma once

#include <cstddef>
#include <functional>

namespace sbnet {

/// Worker count used by batch-parallel kernels. Defaults to 1.
void set_num_threads(std::size_t n);
std::size_t num_threads();

/// Runs fn(i) for i in [0, count). Work items must be independent; callers
/// reduce per-item results in index order so output does not depend on the
/// worker count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace sbnet
