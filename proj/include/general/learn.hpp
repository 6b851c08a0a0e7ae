#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "general/data.hpp"
#include "general/prep.hpp"

namespace general {

enum class TreeMode { gini_classify, variance_regress };

/// Marker for max_features: consider ceil(sqrt(F)) features per split.
inline constexpr double kSqrtFeatures = -1.0;

struct TreeParams {
  int max_depth = -1;  // < 0: unbounded
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  double max_features = 1.0;  // fraction of features tried per split, or kSqrtFeatures
};

struct ForestParams {
  std::size_t n_trees = 100;
  bool bootstrap = true;
  TreeParams tree{-1, 2, 1, kSqrtFeatures};
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // positive-class probability or mean target
  std::size_t samples = 0;
  double impurity = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

/// Binary CART tree over the columns of its training matrix. Rows go left when
/// x[feature] <= threshold.
class DecisionTree {
 public:
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  std::size_t leaf_index(std::span<const double> x) const;

  /// Impurity decrease weighted by node sample fraction, per column (not normalized).
  std::vector<double> raw_importance(std::size_t n_columns) const;
};

/// Fits one tree on `rows` of (x, y). `rows` may repeat indices (bootstrap samples).
DecisionTree fit_tree(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                      TreeMode mode, const TreeParams& params, std::uint64_t seed);

/// Fits one tree over every schema feature of the table.
DecisionTree fit_tree(const ProjectTable& table, const TreeParams& params, std::uint64_t seed, TreeMode mode);

/// An ensemble of trees over a subset of the schema features; a tuned regressor is a
/// one-tree ensemble. Predictions are the mean of the trees' leaf values.
class ForestModel {
 public:
  Task task = Task::classification;
  FeatureSubset features;
  std::size_t schema_width = 0;
  std::vector<std::string> feature_names;  // schema names, for reports
  std::vector<DecisionTree> trees;

  bool fitted() const noexcept { return !trees.empty(); }

  /// Takes a full schema-width row.
  double predict(std::span<const double> schema_row) const;
  std::vector<double> predict_all(const ProjectTable& table) const;

  /// Projects a schema-width row onto the selected features.
  std::vector<double> project(std::span<const double> schema_row) const;

  nlohmann::json to_json() const;
  static ForestModel from_json(const nlohmann::json& j);
};

/// Training matrix restricted to the subset's columns.
Matrix project_columns(const Matrix& x, std::span<const std::size_t> columns);

/// Random forest on the selected columns; bootstrap rows and random feature subsets
/// per split. Trees are fitted in parallel; see kernels.hpp for the serial reference.
ForestModel fit_forest(const ProjectTable& table, const FeatureSubset& features, const ForestParams& params,
                       std::uint64_t seed);

/// Single regression/classification tree wrapped as a one-tree model.
ForestModel fit_single_tree(const ProjectTable& table, const FeatureSubset& features, const TreeParams& params,
                            TreeMode mode, std::uint64_t seed);

/// Mean positive-class probability over the trees.
double predict_proba(const ForestModel& model, std::span<const double> schema_row);
double predict_value(const ForestModel& model, std::span<const double> schema_row);

/// Importance per schema feature, normalized to sum to 1 (all zero when no split
/// decreases impurity).
std::vector<double> feature_importance(const ForestModel& model);

// ---- differential evolution ----------------------------------------------------

struct DeParams {
  std::size_t population = 20;
  std::size_t generations = 10;
  double f = 0.75;
  double cr = 0.3;
};

using Bounds = std::vector<std::pair<double, double>>;

struct DeResult {
  std::vector<double> best;
  double best_score = 0.0;
  std::vector<double> best_per_generation;  // index 0 is the initial population
  std::size_t evaluations = 0;
};

using Objective = std::function<double(std::span<const double>)>;

/// DE/rand/1/bin minimizer. Trials are clipped to bounds; greedy replacement.
DeResult de_tune(const Objective& objective, const Bounds& bounds, const DeParams& params, std::uint64_t seed);

struct HyperParam {
  std::string name;
  double lo;
  double hi;
  bool integer;
};

/// Named point in a hyperparameter space.
struct HyperParams {
  std::vector<std::string> names;
  std::vector<double> values;

  double get(const std::string& name) const;
};

/// max_depth in [1,12], min_samples_split in [2,20], min_samples_leaf in [1,12].
const std::vector<HyperParam>& regressor_space();

Bounds bounds_of(const std::vector<HyperParam>& space);

/// Rounds integer dimensions and clamps everything into the space.
HyperParams decode(const std::vector<HyperParam>& space, std::span<const double> point);

TreeParams regressor_params(const HyperParams& hp);

}  // namespace general
