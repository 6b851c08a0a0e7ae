#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace general {

struct TreatmentSamples {
  std::string name;
  std::vector<double> samples;
};

/// Vargha-Delaney: P(x > y) + 0.5 P(x == y) over all pairs.
double a12(std::span<const double> xs, std::span<const double> ys);

struct BootstrapParams {
  std::size_t iterations = 512;
  double alpha = 0.05;
};

/// Two-sided bootstrap test on the difference of means (Efron & Tibshirani, 16.4):
/// both samples are shifted to the pooled mean and the observed t-like statistic is
/// compared against resampled ones.
bool bootstrap_sig(std::span<const double> xs, std::span<const double> ys, std::uint64_t seed,
                   const BootstrapParams& params = {});

struct ScottKnottParams {
  BootstrapParams bootstrap;
  double a12_threshold = 0.56;
};

struct RankedTreatment {
  std::string name;
  int rank = 1;
  double median = 0.0;
  double iqr = 0.0;
};

/// Sorts treatments by median (ties by name) and recursively bi-partitions them at
/// the cut maximizing the between-group sum of squares; a cut stands only when both
/// the bootstrap test and the A12 effect size agree. Ranks ascend with the median.
std::vector<RankedTreatment> scott_knott(std::vector<TreatmentSamples> treatments, std::uint64_t seed,
                                         const ScottKnottParams& params = {});

std::map<std::string, int> scott_knott_ranks(std::vector<TreatmentSamples> treatments, std::uint64_t seed,
                                             const ScottKnottParams& params = {});

/// Interquartile range (75th - 25th percentile, linear interpolation).
double iqr(std::vector<double> values);
double percentile(std::vector<double> values, double p);

struct RankTableSection {
  std::string criterion;
  bool minimize = false;
  std::vector<RankedTreatment> rows;
};

/// criterion,rank,treatment,median,iqr,better
void write_rank_csv(std::ostream& out, std::span<const RankTableSection> sections);

/// Aligned text table, one block per criterion.
void write_rank_text(std::ostream& out, std::span<const RankTableSection> sections);

}  // namespace general
