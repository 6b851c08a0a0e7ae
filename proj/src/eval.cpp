#include "general/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace general {

GoalVector GoalVector::classification(double recall, double false_alarm, double precision, double popt20,
                                      double ifa) {
  return {{"recall", "false_alarm", "precision", "popt20", "ifa"},
          {recall, false_alarm, precision, popt20, ifa},
          {+1.0, -1.0, +1.0, +1.0, -1.0}};
}

GoalVector GoalVector::regression(double mre) { return {{"mre"}, {mre}, {-1.0}}; }

ConfusionMetrics confusion_metrics(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size() || predicted.empty())
    throw Error(Errc::LengthMismatch, "predictions and labels must have equal, nonzero length");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0, a = actual[i] != 0;
    if (p && a) ++tp;
    else if (p) ++fp;
    else if (a) ++fn;
    else ++tn;
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(tp, tp + fn), ratio(tp, tp + fp), ratio(fp, fp + tn)};
}

std::vector<std::size_t> rank_for_inspection(std::span<const double> scores, std::span<const double> effort) {
  if (scores.size() != effort.size()) throw Error(Errc::LengthMismatch, "scores and effort differ in length");
  for (double e : effort)
    if (!(e >= 0.0)) throw Error(Errc::InvalidEffort, "effort must be nonnegative");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (effort[a] != effort[b]) return effort[a] < effort[b];
    return a < b;
  });
  return order;
}

InspectionCurve inspection_curve(std::span<const double> scores, std::span<const double> effort,
                                 std::span<const int> actual) {
  if (actual.size() != scores.size()) throw Error(Errc::LengthMismatch, "scores and labels differ in length");
  InspectionCurve c;
  c.ordering = rank_for_inspection(scores, effort);
  c.total_changes = scores.size();
  const double total = std::accumulate(effort.begin(), effort.end(), 0.0);
  if (!(total > 0.0)) throw Error(Errc::ZeroEffort, "total effort is zero");
  c.total_defects = static_cast<std::size_t>(std::count_if(actual.begin(), actual.end(), [](int v) { return v != 0; }));

  const double budget = 0.2 * total;
  double cum = 0.0;
  bool reached = false, found = false;
  std::size_t defects_seen = 0;
  for (std::size_t i = 0; i < c.ordering.size(); ++i) {
    const std::size_t idx = c.ordering[i];
    cum += effort[idx];
    c.cum_effort.push_back(cum / total);
    if (actual[idx] != 0) {
      ++defects_seen;
      if (!found) {
        found = true;
        c.first_defect_at = i + 1;
      }
    }
    if (!reached) {
      c.inspected_at_20 = i + 1;
      c.found_at_20 = defects_seen;
      reached = cum >= budget;
    }
  }
  if (!c.cum_effort.empty()) c.cum_effort.back() = 1.0;
  return c;
}

EffortMetrics effort_metrics(std::span<const double> scores, std::span<const double> effort,
                             std::span<const int> actual) {
  const InspectionCurve c = inspection_curve(scores, effort, actual);
  if (c.total_defects == 0) throw Error(Errc::NoDefects, "IFA is undefined without defective changes");
  EffortMetrics m;
  m.popt20 = static_cast<double>(c.inspected_at_20) / static_cast<double>(c.total_changes);
  m.ifa = static_cast<double>(c.first_defect_at - 1);
  m.recall_at_20 = static_cast<double>(c.found_at_20) / static_cast<double>(c.total_defects);
  return m;
}

double mre(double predicted, double actual) { return std::abs(predicted - actual) / std::max(1.0, actual); }

GoalVector score_model(const ForestModel& model, const ProjectTable& test) {
  if (!model.fitted()) throw Error(Errc::UnfittedModel, "scoring an unfitted model");
  if (test.size() == 0) throw Error(Errc::EmptyTable, test.project_id + ": empty test table");
  const std::vector<double> predictions = model.predict_all(test);
  if (test.schema.task == Task::regression) {
    std::vector<double> errors;
    errors.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) errors.push_back(mre(predictions[i], test.labels[i]));
    return GoalVector::regression(median(std::move(errors)));
  }
  if (!test.has_effort())
    throw Error(Errc::InvalidSchema, test.project_id + ": effort-aware metrics need an effort column");
  std::vector<int> predicted, actual;
  for (std::size_t i = 0; i < test.size(); ++i) {
    predicted.push_back(predictions[i] >= 0.5 ? 1 : 0);
    actual.push_back(test.labels[i] != 0.0 ? 1 : 0);
  }
  const ConfusionMetrics cm = confusion_metrics(predicted, actual);
  const EffortMetrics em = effort_metrics(predictions, test.effort, actual);
  return GoalVector::classification(cm.recall, cm.false_alarm, cm.precision, em.popt20, em.ifa);
}

}  // namespace general
