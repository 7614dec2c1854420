#pragma once

#include <cstddef>
#include <functional>

namespace fewshot {

// 0 means std::thread::hardware_concurrency() (at least 1).
std::size_t resolve_workers(std::size_t requested);

// Runs fn(i) for i in [0, count) on up to `workers` threads. Each index runs
// exactly once; the exception from the lowest failing index is rethrown.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace fewshot
