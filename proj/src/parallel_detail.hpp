#pragma once

#include <exception>
#include <vector>

namespace toolpose::detail {

// Runs body(i) for i in [0, n) in parallel; the exception of the lowest failing index is rethrown.
template <typename F>
void parallel_for(int n, F&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n > 0 ? n : 0));
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace toolpose::detail
