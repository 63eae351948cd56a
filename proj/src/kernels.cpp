#include "mslu/kernels.hpp"

#include <exception>

#include "mslu/errors.hpp"
#include "mslu/params.hpp"

#ifdef MSLU_HAVE_OPENMP
#include <omp.h>
#endif

namespace mslu {

void for_each_index(std::size_t n, Execution execution, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  if (execution == Execution::Parallel && parallel_available()) {
#ifdef MSLU_HAVE_OPENMP
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
#endif
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<Tensor> ordered_sum(std::span<const std::vector<Tensor>> parts) {
  if (parts.empty()) throw InputError("ordered_sum of nothing");
  std::vector<Tensor> acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) add_into(acc, parts[i]);
  return acc;
}

bool parallel_available() noexcept {
#ifdef MSLU_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

int worker_count() noexcept {
#ifdef MSLU_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace mslu
