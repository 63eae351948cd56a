#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mslu/tensor.hpp"

namespace mslu {

// Data-parallel loops come in two flavours: Serial is the reference, Parallel
// spreads indices over OpenMP threads. Callers write results into per-index
// slots and reduce them in index order, so both produce identical bits.
enum class Execution { Serial, Parallel };

// Runs body(i) for every i in [0, n). The exception of the lowest failing
// index is rethrown after the loop.
void for_each_index(std::size_t n, Execution execution, const std::function<void(std::size_t)>& body);

// Element-wise sum of gradient lists, accumulated in list order.
std::vector<Tensor> ordered_sum(std::span<const std::vector<Tensor>> parts);

bool parallel_available() noexcept;
int worker_count() noexcept;

}  // namespace mslu
