#include "general/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "general/kernels.hpp"
#include "general/rng.hpp"

namespace general {

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = std::numeric_limits<double>::infinity();
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> y, TreeMode mode, const TreeParams& params,
              std::uint64_t seed)
      : x_(x), y_(y), mode_(mode), params_(params), rng_(seed) {
    const std::size_t f = x.cols();
    std::size_t m;
    if (params.max_features < 0.0) m = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(f))));
    else m = static_cast<std::size_t>(std::ceil(params.max_features * static_cast<double>(f)));
    n_try_ = std::clamp<std::size_t>(m, 1, std::max<std::size_t>(f, 1));
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    DecisionTree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  double leaf_value(std::span<const std::size_t> rows) const {
    double s = 0.0;
    for (auto r : rows) s += y_[r];
    return s / static_cast<double>(rows.size());
  }

  // Gini for classification, mean squared deviation for regression.
  double impurity(std::span<const std::size_t> rows, double mean) const {
    const double n = static_cast<double>(rows.size());
    if (mode_ == TreeMode::gini_classify) return 2.0 * mean * (1.0 - mean);
    double sse = 0.0;
    for (auto r : rows) sse += (y_[r] - mean) * (y_[r] - mean);
    return sse / n;
  }

  bool pure(double imp, double mean) const {
    if (mode_ == TreeMode::gini_classify) return imp == 0.0;
    return imp <= 1e-14 * std::max(1.0, mean * mean);
  }

  std::vector<std::size_t> candidate_features() {
    const std::size_t f = x_.cols();
    std::vector<std::size_t> all(f);
    std::iota(all.begin(), all.end(), 0);
    if (n_try_ >= f) return all;
    for (std::size_t i = 0; i < n_try_; ++i) std::swap(all[i], all[i + rng_.index(f - i)]);
    all.resize(n_try_);
    std::sort(all.begin(), all.end());
    return all;
  }

  SplitChoice best_split(std::span<const std::size_t> rows) {
    SplitChoice best;
    const std::size_t n = rows.size();
    const std::size_t min_leaf = std::max<std::size_t>(params_.min_samples_leaf, 1);
    std::vector<std::pair<double, double>> xy(n);
    for (std::size_t feature : candidate_features()) {
      for (std::size_t i = 0; i < n; ++i) xy[i] = {x_(rows[i], feature), y_[rows[i]]};
      std::sort(xy.begin(), xy.end());
      double total = 0.0, total_sq = 0.0;
      for (const auto& [xv, yv] : xy) {
        total += yv;
        total_sq += yv * yv;
      }
      double left = 0.0, left_sq = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        left += xy[i - 1].second;
        left_sq += xy[i - 1].second * xy[i - 1].second;
        if (!(xy[i - 1].first < xy[i].first)) continue;
        if (i < min_leaf || n - i < min_leaf) continue;
        const double nl = static_cast<double>(i), nr = static_cast<double>(n - i);
        double score;
        if (mode_ == TreeMode::gini_classify) {
          const double pl = left / nl, pr = (total - left) / nr;
          score = (nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr)) / static_cast<double>(n);
        } else {
          const double right = total - left, right_sq = total_sq - left_sq;
          const double sse_l = std::max(0.0, left_sq - left * left / nl);
          const double sse_r = std::max(0.0, right_sq - right * right / nr);
          score = (sse_l + sse_r) / static_cast<double>(n);
        }
        if (score < best.score) {
          double threshold = 0.5 * (xy[i - 1].first + xy[i].first);
          if (!(threshold < xy[i].first)) threshold = xy[i - 1].first;
          best = {static_cast<int>(feature), threshold, score};
        }
      }
    }
    return best;
  }

  int grow(DecisionTree& tree, std::vector<std::size_t> rows, int depth) {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const double mean = leaf_value(rows);
    const double imp = impurity(rows, mean);
    {
      TreeNode& node = tree.nodes.back();
      node.value = mean;
      node.samples = rows.size();
      node.impurity = imp;
    }
    const bool stop = rows.size() < std::max<std::size_t>(params_.min_samples_split, 2) ||
                      (params_.max_depth >= 0 && depth >= params_.max_depth) || pure(imp, mean);
    if (stop) return idx;

    const SplitChoice split = best_split(rows);
    if (split.feature < 0) return idx;

    std::vector<std::size_t> left, right;
    for (auto r : rows)
      (x_(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = grow(tree, std::move(left), depth + 1);
    const int r = grow(tree, std::move(right), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return idx;
  }

  const Matrix& x_;
  std::span<const double> y_;
  TreeMode mode_;
  TreeParams params_;
  Rng rng_;
  std::size_t n_try_ = 1;
};

TreeMode mode_for(Task task) {
  return task == Task::classification ? TreeMode::gini_classify : TreeMode::variance_regress;
}

void check_trainable(const ProjectTable& table) {
  if (table.size() == 0) throw Error(Errc::EmptyTable, table.project_id + ": cannot fit on an empty table");
  if (table.size() < 2) throw Error(Errc::TooFewRows, table.project_id + ": need at least 2 rows to fit");
}

ForestModel make_model(const ProjectTable& table, const FeatureSubset& features) {
  for (auto i : features.selected)
    if (i >= table.schema.feature_count())
      throw Error(Errc::DimensionMismatch, "feature index " + std::to_string(i) + " outside schema");
  if (features.selected.empty()) throw Error(Errc::InvalidConfig, "empty feature subset");
  ForestModel m;
  m.task = table.schema.task;
  m.features = features;
  m.schema_width = table.schema.feature_count();
  m.feature_names = table.schema.feature_names;
  return m;
}

}  // namespace

double DecisionTree::predict(std::span<const double> x) const { return nodes[leaf_index(x)].value; }

std::size_t DecisionTree::leaf_index(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf())
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                                                      : nodes[i].right);
  return i;
}

std::vector<double> DecisionTree::raw_importance(std::size_t n_columns) const {
  std::vector<double> out(n_columns, 0.0);
  if (nodes.empty()) return out;
  const double total = static_cast<double>(nodes.front().samples);
  for (const auto& node : nodes) {
    if (node.is_leaf()) continue;
    const auto& l = nodes[static_cast<std::size_t>(node.left)];
    const auto& r = nodes[static_cast<std::size_t>(node.right)];
    const double decrease = static_cast<double>(node.samples) * node.impurity -
                            static_cast<double>(l.samples) * l.impurity - static_cast<double>(r.samples) * r.impurity;
    out[static_cast<std::size_t>(node.feature)] += std::max(0.0, decrease) / total;
  }
  return out;
}

DecisionTree fit_tree(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows, TreeMode mode,
                      const TreeParams& params, std::uint64_t seed) {
  if (rows.empty()) throw Error(Errc::EmptyTable, "cannot fit a tree on zero rows");
  TreeBuilder builder(x, y, mode, params, seed);
  return builder.build(std::vector<std::size_t>(rows.begin(), rows.end()));
}

DecisionTree fit_tree(const ProjectTable& table, const TreeParams& params, std::uint64_t seed, TreeMode mode) {
  check_trainable(table);
  std::vector<std::size_t> rows(table.size());
  std::iota(rows.begin(), rows.end(), 0);
  return fit_tree(table.rows, table.labels, rows, mode, params, derive_seed(seed, {0}));
}

Matrix project_columns(const Matrix& x, std::span<const std::size_t> columns) {
  Matrix out(x.rows(), columns.size());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < columns.size(); ++j) out(r, j) = x(r, columns[j]);
  return out;
}

std::vector<double> ForestModel::project(std::span<const double> schema_row) const {
  if (schema_row.size() != schema_width)
    throw Error(Errc::DimensionMismatch, "row has " + std::to_string(schema_row.size()) + " values, model expects " +
                                             std::to_string(schema_width));
  std::vector<double> out;
  out.reserve(features.selected.size());
  for (auto i : features.selected) out.push_back(schema_row[i]);
  return out;
}

double ForestModel::predict(std::span<const double> schema_row) const {
  if (!fitted()) throw Error(Errc::UnfittedModel, "model has no trees");
  const std::vector<double> x = project(schema_row);
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return s / static_cast<double>(trees.size());
}

std::vector<double> ForestModel::predict_all(const ProjectTable& table) const {
  std::vector<double> out;
  out.reserve(table.size());
  for (std::size_t r = 0; r < table.size(); ++r) out.push_back(predict(table.rows.row(r)));
  return out;
}

nlohmann::json ForestModel::to_json() const {
  nlohmann::json j;
  j["task"] = task == Task::classification ? "classification" : "regression";
  j["features"] = features.selected;
  j["merit"] = features.merit;
  j["schema_width"] = schema_width;
  j["feature_names"] = feature_names;
  j["trees"] = nlohmann::json::array();
  for (const auto& t : trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes)
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.samples, n.impurity});
    j["trees"].push_back(std::move(nodes));
  }
  return j;
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  try {
    ForestModel m;
    const std::string task = j.at("task").get<std::string>();
    m.task = task == "classification" ? Task::classification : Task::regression;
    m.features.selected = j.at("features").get<std::vector<std::size_t>>();
    m.features.merit = j.at("merit").get<double>();
    m.schema_width = j.at("schema_width").get<std::size_t>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& jt : j.at("trees")) {
      DecisionTree t;
      for (const auto& jn : jt) {
        TreeNode n;
        n.feature = jn.at(0).get<int>();
        n.threshold = jn.at(1).get<double>();
        n.left = jn.at(2).get<int>();
        n.right = jn.at(3).get<int>();
        n.value = jn.at(4).get<double>();
        n.samples = jn.at(5).get<std::size_t>();
        n.impurity = jn.at(6).get<double>();
        t.nodes.push_back(n);
      }
      m.trees.push_back(std::move(t));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadFormat, std::string("malformed model document: ") + e.what());
  }
}

ForestModel fit_forest(const ProjectTable& table, const FeatureSubset& features, const ForestParams& params,
                       std::uint64_t seed) {
  check_trainable(table);
  if (params.n_trees == 0) throw Error(Errc::InvalidConfig, "forest needs at least one tree");
  ForestModel model = make_model(table, features);
  const Matrix x = project_columns(table.rows, features.selected);
  model.trees = kernels::fit_trees_parallel(x, table.labels, mode_for(table.schema.task), params, seed);
  return model;
}

ForestModel fit_single_tree(const ProjectTable& table, const FeatureSubset& features, const TreeParams& params,
                            TreeMode mode, std::uint64_t seed) {
  check_trainable(table);
  ForestModel model = make_model(table, features);
  const Matrix x = project_columns(table.rows, features.selected);
  std::vector<std::size_t> rows(table.size());
  std::iota(rows.begin(), rows.end(), 0);
  model.trees.push_back(fit_tree(x, table.labels, rows, mode, params, derive_seed(seed, {0})));
  return model;
}

double predict_proba(const ForestModel& model, std::span<const double> schema_row) {
  return model.predict(schema_row);
}

double predict_value(const ForestModel& model, std::span<const double> schema_row) {
  return model.predict(schema_row);
}

std::vector<double> feature_importance(const ForestModel& model) {
  if (!model.fitted()) throw Error(Errc::UnfittedModel, "importance of an unfitted model");
  const std::size_t k = model.features.selected.size();
  std::vector<double> local(k, 0.0);
  for (const auto& t : model.trees) {
    const auto raw = t.raw_importance(k);
    for (std::size_t i = 0; i < k; ++i) local[i] += raw[i] / static_cast<double>(model.trees.size());
  }
  std::vector<double> out(model.schema_width, 0.0);
  const double total = std::accumulate(local.begin(), local.end(), 0.0);
  if (total <= 0.0) return out;
  for (std::size_t i = 0; i < k; ++i) out[model.features.selected[i]] = local[i] / total;
  return out;
}

DeResult de_tune(const Objective& objective, const Bounds& bounds, const DeParams& params, std::uint64_t seed) {
  if (bounds.empty()) throw Error(Errc::InvalidBounds, "no dimensions to search");
  for (const auto& [lo, hi] : bounds)
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
      throw Error(Errc::InvalidBounds, "bad bound [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  if (params.population < 4) throw Error(Errc::InvalidBounds, "DE/rand/1 needs a population of at least 4");
  if (!(params.cr >= 0.0 && params.cr <= 1.0) || !(params.f > 0.0))
    throw Error(Errc::InvalidBounds, "DE needs F > 0 and CR in [0,1]");

  const std::size_t dim = bounds.size(), np = params.population;
  Rng rng(derive_seed(seed, {0xde}));
  DeResult result;
  std::vector<std::vector<double>> pop(np, std::vector<double>(dim));
  std::vector<double> score(np);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t d = 0; d < dim; ++d) pop[i][d] = rng.uniform(bounds[d].first, bounds[d].second);
    score[i] = objective(pop[i]);
    ++result.evaluations;
    if (i == 0 || score[i] < result.best_score) {
      result.best_score = score[i];
      result.best = pop[i];
    }
  }
  result.best_per_generation.push_back(result.best_score);

  std::vector<double> trial(dim);
  for (std::size_t g = 0; g < params.generations; ++g) {
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t a, b, c;
      do a = rng.index(np); while (a == i);
      do b = rng.index(np); while (b == i || b == a);
      do c = rng.index(np); while (c == i || c == a || c == b);
      const std::size_t forced = rng.index(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        if (d == forced || rng.uniform() < params.cr)
          trial[d] = std::clamp(pop[a][d] + params.f * (pop[b][d] - pop[c][d]), bounds[d].first, bounds[d].second);
        else
          trial[d] = pop[i][d];
      }
      const double s = objective(trial);
      ++result.evaluations;
      if (s <= score[i]) {
        pop[i] = trial;
        score[i] = s;
      }
      if (s < result.best_score) {
        result.best_score = s;
        result.best = trial;
      }
    }
    result.best_per_generation.push_back(result.best_score);
  }
  return result;
}

double HyperParams::get(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  throw Error(Errc::InvalidConfig, "unknown hyperparameter '" + name + "'");
}

const std::vector<HyperParam>& regressor_space() {
  static const std::vector<HyperParam> space = {
      {"max_depth", 1, 12, true},
      {"min_samples_split", 2, 20, true},
      {"min_samples_leaf", 1, 12, true},
  };
  return space;
}

Bounds bounds_of(const std::vector<HyperParam>& space) {
  Bounds b;
  for (const auto& p : space) b.emplace_back(p.lo, p.hi);
  return b;
}

HyperParams decode(const std::vector<HyperParam>& space, std::span<const double> point) {
  if (point.size() != space.size()) throw Error(Errc::DimensionMismatch, "point does not match hyperparameter space");
  HyperParams hp;
  for (std::size_t i = 0; i < space.size(); ++i) {
    double v = std::clamp(point[i], space[i].lo, space[i].hi);
    if (space[i].integer) v = std::round(v);
    hp.names.push_back(space[i].name);
    hp.values.push_back(v);
  }
  return hp;
}

TreeParams regressor_params(const HyperParams& hp) {
  TreeParams p;
  p.max_depth = static_cast<int>(hp.get("max_depth"));
  p.min_samples_split = static_cast<std::size_t>(hp.get("min_samples_split"));
  p.min_samples_leaf = static_cast<std::size_t>(hp.get("min_samples_leaf"));
  p.max_features = 1.0;
  return p;
}

}  // namespace general
