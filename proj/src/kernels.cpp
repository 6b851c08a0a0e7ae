#include "general/kernels.hpp"

#include <numeric>

#include "general/rng.hpp"

namespace general::kernels {

namespace {

DecisionTree fit_one(const Matrix& x, std::span<const double> y, TreeMode mode, const ForestParams& params,
                     std::uint64_t seed, std::size_t t) {
  const std::size_t n = x.rows();
  std::vector<std::size_t> rows(n);
  if (params.bootstrap) {
    Rng rng(derive_seed(seed, {t, 0xb007}));
    for (auto& r : rows) r = rng.index(n);
  } else {
    std::iota(rows.begin(), rows.end(), 0);
  }
  return fit_tree(x, y, rows, mode, params.tree, derive_seed(seed, {t}));
}

}  // namespace

std::vector<DecisionTree> fit_trees_serial(const Matrix& x, std::span<const double> y, TreeMode mode,
                                           const ForestParams& params, std::uint64_t seed) {
  std::vector<DecisionTree> trees;
  trees.reserve(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) trees.push_back(fit_one(x, y, mode, params, seed, t));
  return trees;
}

std::vector<DecisionTree> fit_trees_parallel(const Matrix& x, std::span<const double> y, TreeMode mode,
                                             const ForestParams& params, std::uint64_t seed) {
  std::vector<DecisionTree> trees(params.n_trees);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(params.n_trees); ++t)
    trees[static_cast<std::size_t>(t)] = fit_one(x, y, mode, params, seed, static_cast<std::size_t>(t));
  return trees;
}

}  // namespace general::kernels
