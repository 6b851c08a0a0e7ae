#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "general/data.hpp"
#include "general/learn.hpp"

namespace general {

/// Modeling stack used to train one project's model: CFS, then SMOTE
/// (classification), then the learner, optionally DE-tuned.
struct Pipeline {
  Task task = Task::classification;
  bool use_cfs = true;
  bool use_smote = true;
  bool de_enabled = false;
  ForestParams forest;
  TreeParams tree{8, 2, 1, 1.0};  // regressor params when DE is off
  DeParams de;

  /// Random forest without DE for classification; DE-tuned tree for regression.
  static Pipeline defaults(Task task);

  nlohmann::json to_json() const;
  static Pipeline from_json(const nlohmann::json& j);
};

struct TrainingTrace {
  std::vector<std::string> steps;  // in order, e.g. {"cfs", "smote", "forest"}
  std::size_t synthetic_rows = 0;
  std::vector<double> tuned;       // decoded DE point, when tuning ran
};

/// Trains on every row of `table`; nothing is held out except DE's internal split.
ForestModel train_pipeline(const ProjectTable& table, const Pipeline& pipeline, std::uint64_t seed,
                           TrainingTrace* trace = nullptr);

/// min_samples_split [2,20], max_depth [1,20], max_features [0.1,1.0] for the forest.
const std::vector<HyperParam>& classifier_space();

}  // namespace general
