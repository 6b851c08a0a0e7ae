#pragma once

// Data-parallel kernels. Each OpenMP kernel has a serial twin with identical
// results; the serial versions are the reference the tests compare against.

#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "general/learn.hpp"

namespace general::kernels {

/// Trees of a forest over the projected training matrix. Tree t uses seed
/// derive_seed(seed, {t}).
std::vector<DecisionTree> fit_trees_serial(const Matrix& x, std::span<const double> y, TreeMode mode,
                                           const ForestParams& params, std::uint64_t seed);
std::vector<DecisionTree> fit_trees_parallel(const Matrix& x, std::span<const double> y, TreeMode mode,
                                             const ForestParams& params, std::uint64_t seed);

/// Runs task(i) for i in [0, n) and stores the results in order.
template <typename T>
std::vector<T> map_serial(std::size_t n, const std::function<T(std::size_t)>& task) {
  std::vector<T> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(task(i));
  return out;
}

template <typename T>
std::vector<T> map_parallel(std::size_t n, const std::function<T(std::size_t)>& task) {
  std::vector<std::optional<T>> slots(n);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      slots[static_cast<std::size_t>(i)].emplace(task(static_cast<std::size_t>(i)));
    } catch (...) {
#pragma omp critical(general_map_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace general::kernels
