#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "general/data.hpp"

namespace general {

struct FeatureSubset {
  std::vector<std::size_t> selected;  // ascending schema indices
  double merit = 0.0;
};

/// Pearson correlation; 0 when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Absolute correlations feeding the CFS merit.
struct CorrelationTable {
  std::vector<double> feature_label;            // |r_cf| per feature
  std::vector<std::vector<double>> feature_feature;  // |r_ff|, symmetric, unit diagonal

  static CorrelationTable compute(const ProjectTable& table);
};

/// k * mean|r_cf| / sqrt(k + k(k-1) * mean|r_ff|) for the subset.
double cfs_merit(const CorrelationTable& corr, std::span<const std::size_t> subset);

/// Best-first forward search over feature subsets; stops after five consecutive
/// expansions that fail to improve the best merit.
FeatureSubset cfs_select(const ProjectTable& table);

/// Oversamples the minority class up to the majority count by interpolating towards
/// one of the min(k, minority-1) nearest minority rows. Input rows come first, in order.
ProjectTable smote(const ProjectTable& table, std::uint64_t seed, std::size_t k = 5);

}  // namespace general
