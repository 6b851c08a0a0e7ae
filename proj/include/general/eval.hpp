#pragma once

#include <span>
#include <string>
#include <vector>

#include "general/data.hpp"
#include "general/learn.hpp"

namespace general {

/// n objective values with +1 (maximize) / -1 (minimize) weights.
struct GoalVector {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> weights;

  std::size_t size() const noexcept { return values.size(); }

  /// recall, false_alarm, precision, popt20, ifa
  static GoalVector classification(double recall, double false_alarm, double precision, double popt20, double ifa);
  static GoalVector regression(double mre);
};

struct ConfusionMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double false_alarm = 0.0;
};

/// 0/0 ratios are reported as 0.
ConfusionMetrics confusion_metrics(std::span<const int> predicted, std::span<const int> actual);

/// Inspection order: descending score, then ascending LOC, then ascending index.
std::vector<std::size_t> rank_for_inspection(std::span<const double> scores, std::span<const double> effort);

struct InspectionCurve {
  std::vector<std::size_t> ordering;
  std::vector<double> cum_effort;  // cumulative LOC fraction after each inspected change
  std::size_t total_changes = 0;   // M
  std::size_t total_defects = 0;   // N
  std::size_t inspected_at_20 = 0; // m%20
  std::size_t found_at_20 = 0;     // n%20
  std::size_t first_defect_at = 0; // k: changes inspected when the first defect is found
};

InspectionCurve inspection_curve(std::span<const double> scores, std::span<const double> effort,
                                 std::span<const int> actual);

struct EffortMetrics {
  double popt20 = 0.0;        // m%20 / M
  double ifa = 0.0;           // false alarms before the first defect
  double recall_at_20 = 0.0;  // n%20 / N
};

/// The change that crosses 20% of total LOC counts as inspected.
EffortMetrics effort_metrics(std::span<const double> scores, std::span<const double> effort,
                             std::span<const int> actual);

/// |predicted - actual| / max(1, actual)
double mre(double predicted, double actual);

/// Classification: 5-goal vector at the 0.5 threshold (effort metrics use raw
/// probabilities). Regression: median MRE over the rows.
GoalVector score_model(const ForestModel& model, const ProjectTable& test);

}  // namespace general
