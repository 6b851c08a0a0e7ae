#include "general/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "general/eval.hpp"
#include "general/prep.hpp"
#include "general/rng.hpp"

namespace general {

namespace {

ProjectTable project_table(const ProjectTable& table, const FeatureSubset& subset) {
  ProjectTable out;
  out.project_id = table.project_id;
  out.schema = table.schema;
  out.schema.feature_names.clear();
  for (auto i : subset.selected) out.schema.feature_names.push_back(table.schema.feature_names[i]);
  if (out.schema.effort_name && !out.schema.feature_index(*out.schema.effort_name) &&
      table.schema.feature_index(*out.schema.effort_name))
    out.schema.effort_name.reset();
  out.rows = project_columns(table.rows, subset.selected);
  out.labels = table.labels;
  out.effort = table.effort;
  out.row_ids = table.row_ids;
  return out;
}

FeatureSubset all_features(std::size_t n) {
  FeatureSubset s;
  s.selected.resize(n);
  std::iota(s.selected.begin(), s.selected.end(), 0);
  return s;
}

// Remaps a model trained on a projected table back onto full schema rows.
ForestModel widen(ForestModel model, const ProjectTable& full, const FeatureSubset& subset) {
  model.features = subset;
  model.schema_width = full.schema.feature_count();
  model.feature_names = full.schema.feature_names;
  return model;
}

double median_mre(const ForestModel& model, const ProjectTable& test) {
  return score_model(model, test).values.front();
}

// Lower is better: missed defects plus false alarms.
double classifier_fitness(const ForestModel& model, const ProjectTable& test) {
  std::vector<int> predicted, actual;
  for (std::size_t i = 0; i < test.size(); ++i) {
    predicted.push_back(model.predict(test.rows.row(i)) >= 0.5 ? 1 : 0);
    actual.push_back(test.labels[i] != 0.0 ? 1 : 0);
  }
  const auto cm = confusion_metrics(predicted, actual);
  return (1.0 - cm.recall) + cm.false_alarm;
}

}  // namespace

Pipeline Pipeline::defaults(Task task) {
  Pipeline p;
  p.task = task;
  p.use_smote = task == Task::classification;
  p.de_enabled = task == Task::regression;
  return p;
}

nlohmann::json Pipeline::to_json() const {
  return {{"task", task == Task::classification ? "classification" : "regression"},
          {"use_cfs", use_cfs},
          {"use_smote", use_smote},
          {"de_enabled", de_enabled},
          {"forest",
           {{"n_trees", forest.n_trees},
            {"bootstrap", forest.bootstrap},
            {"max_depth", forest.tree.max_depth},
            {"min_samples_split", forest.tree.min_samples_split},
            {"min_samples_leaf", forest.tree.min_samples_leaf},
            {"max_features", forest.tree.max_features}}},
          {"tree",
           {{"max_depth", tree.max_depth},
            {"min_samples_split", tree.min_samples_split},
            {"min_samples_leaf", tree.min_samples_leaf}}},
          {"de", {{"population", de.population}, {"generations", de.generations}, {"f", de.f}, {"cr", de.cr}}}};
}

Pipeline Pipeline::from_json(const nlohmann::json& j) {
  try {
    Pipeline p = defaults(j.value("task", "classification") == "regression" ? Task::regression : Task::classification);
    p.use_cfs = j.value("use_cfs", p.use_cfs);
    p.use_smote = j.value("use_smote", p.use_smote);
    p.de_enabled = j.value("de_enabled", p.de_enabled);
    if (j.contains("forest")) {
      const auto& f = j["forest"];
      p.forest.n_trees = f.value("n_trees", p.forest.n_trees);
      p.forest.bootstrap = f.value("bootstrap", p.forest.bootstrap);
      p.forest.tree.max_depth = f.value("max_depth", p.forest.tree.max_depth);
      p.forest.tree.min_samples_split = f.value("min_samples_split", p.forest.tree.min_samples_split);
      p.forest.tree.min_samples_leaf = f.value("min_samples_leaf", p.forest.tree.min_samples_leaf);
      p.forest.tree.max_features = f.value("max_features", p.forest.tree.max_features);
    }
    if (j.contains("tree")) {
      const auto& t = j["tree"];
      p.tree.max_depth = t.value("max_depth", p.tree.max_depth);
      p.tree.min_samples_split = t.value("min_samples_split", p.tree.min_samples_split);
      p.tree.min_samples_leaf = t.value("min_samples_leaf", p.tree.min_samples_leaf);
    }
    if (j.contains("de")) {
      const auto& d = j["de"];
      p.de.population = d.value("population", p.de.population);
      p.de.generations = d.value("generations", p.de.generations);
      p.de.f = d.value("f", p.de.f);
      p.de.cr = d.value("cr", p.de.cr);
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("bad pipeline config: ") + e.what());
  }
}

const std::vector<HyperParam>& classifier_space() {
  static const std::vector<HyperParam> space = {
      {"min_samples_split", 2, 20, true},
      {"max_depth", 1, 20, true},
      {"max_features", 0.1, 1.0, false},
  };
  return space;
}

ForestModel train_pipeline(const ProjectTable& table, const Pipeline& pipeline, std::uint64_t seed,
                           TrainingTrace* trace) {
  if (table.schema.task != pipeline.task)
    throw Error(Errc::InvalidConfig, table.project_id + ": pipeline task does not match the table");
  TrainingTrace local;
  TrainingTrace& tr = trace ? *trace : local;
  tr = {};

  FeatureSubset subset = all_features(table.schema.feature_count());
  if (pipeline.use_cfs) {
    subset = cfs_select(table);
    tr.steps.emplace_back("cfs");
  }
  ProjectTable train = project_table(table, subset);
  const FeatureSubset identity = all_features(subset.selected.size());

  if (pipeline.task == Task::classification) {
    if (pipeline.use_smote) {
      const std::size_t before = train.size();
      train = smote(train, derive_seed(seed, {0x5}));
      tr.synthetic_rows = train.size() - before;
      tr.steps.emplace_back("smote");
    }
    ForestParams params = pipeline.forest;
    if (pipeline.de_enabled) {
      const Split inner = split_rows(train, derive_seed(seed, {0xd1}));
      const TableSplit parts = apply_split(train, inner);
      const ProjectTable& fit_part = parts.train;
      const ProjectTable& score_part = parts.test;
      const auto& space = classifier_space();
      auto objective = [&](std::span<const double> point) {
        const HyperParams hp = decode(space, point);
        ForestParams candidate = params;
        candidate.tree.min_samples_split = static_cast<std::size_t>(hp.get("min_samples_split"));
        candidate.tree.max_depth = static_cast<int>(hp.get("max_depth"));
        candidate.tree.max_features = hp.get("max_features");
        return classifier_fitness(fit_forest(fit_part, identity, candidate, derive_seed(seed, {0xf0})), score_part);
      };
      const DeResult best = de_tune(objective, bounds_of(space), pipeline.de, derive_seed(seed, {0xde}));
      const HyperParams hp = decode(space, best.best);
      params.tree.min_samples_split = static_cast<std::size_t>(hp.get("min_samples_split"));
      params.tree.max_depth = static_cast<int>(hp.get("max_depth"));
      params.tree.max_features = hp.get("max_features");
      tr.tuned = hp.values;
      tr.steps.emplace_back("de");
    }
    tr.steps.emplace_back("forest");
    return widen(fit_forest(train, identity, params, derive_seed(seed, {0xf0})), table, subset);
  }

  TreeParams params = pipeline.tree;
  if (pipeline.de_enabled) {
    const Split inner = split_rows(train, derive_seed(seed, {0xd1}));
    const TableSplit parts = apply_split(train, inner);
    const ProjectTable& fit_part = parts.train;
    const ProjectTable& score_part = parts.test;
    const auto& space = regressor_space();
    auto objective = [&](std::span<const double> point) {
      const TreeParams candidate = regressor_params(decode(space, point));
      return median_mre(
          fit_single_tree(fit_part, identity, candidate, TreeMode::variance_regress, derive_seed(seed, {0xf1})),
          score_part);
    };
    const DeResult best = de_tune(objective, bounds_of(space), pipeline.de, derive_seed(seed, {0xde}));
    const HyperParams hp = decode(space, best.best);
    params = regressor_params(hp);
    tr.tuned = hp.values;
    tr.steps.emplace_back("de");
  }
  tr.steps.emplace_back("tree");
  return widen(fit_single_tree(train, identity, params, TreeMode::variance_regress, derive_seed(seed, {0xf1})),
               table, subset);
}

}  // namespace general
