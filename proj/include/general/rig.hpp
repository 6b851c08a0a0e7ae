#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "general/bundle.hpp"
#include "general/stats.hpp"

namespace general {

enum class RigTask { defect, health };
enum class HealthSplit { chronological, random };

struct RigConfig {
  std::filesystem::path corpus;
  RigTask task = RigTask::defect;
  std::string goal;  // health only
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
  std::size_t branching = 20;
  double threshold = 0.5;
  std::optional<bool> de_enabled;  // unset: the task's default
  std::vector<std::size_t> levels{0, 1, 2};
  std::filesystem::path out;
  HealthSplit health_split = HealthSplit::chronological;
  std::size_t horizon = 6;
  std::optional<std::size_t> n_trees;  // forest size override

  /// Throws InvalidConfig.
  void validate() const;
  Pipeline pipeline() const;

  nlohmann::json to_json() const;
  static RigConfig from_json(const nlohmann::json& j);
  static RigConfig load(const std::filesystem::path& path);
};

/// One cell of the long-form results table. Failed cells carry the reason.
struct ResultRow {
  std::size_t repeat = 0;
  std::string project;
  std::string treatment;
  std::string criterion;
  double value = 0.0;
  std::string failure;

  bool failed() const noexcept { return !failure.empty(); }
};

struct BudgetRow {
  std::size_t repeat = 0;
  std::string treatment;
  std::size_t projects = 0;
  std::size_t leaf_clusters = 0;
  std::size_t comparisons = 0;  // counted while running
  std::size_t predicted = 0;    // from comparison_budget
  double seconds = 0.0;
};

struct ImportanceRow {
  std::string feature;
  double x = 0.0;  // bellwether model
  double y = 0.0;  // median over self models
  bool globally_important = false;
};

struct RigReport {
  std::vector<std::string> projects;
  std::vector<std::string> excluded;  // failed sanity checks
  std::vector<ResultRow> results;
  std::vector<BudgetRow> budget;
  std::vector<RankTableSection> ranks;
  std::vector<ImportanceRow> importance;
  Bundle bundle;  // from the first repeat
  std::size_t leakage_checks = 0;
  std::size_t tree_depth = 0;  // first repeat
};

/// Criteria in goal-vector order and whether lower is better.
std::vector<std::pair<std::string, bool>> criteria_for(Task task);

/// Value in report units: rates as percentages, IFA as a count, MRE as a percentage.
double report_units(const std::string& criterion, double value);

/// Loads and sanity-filters the corpus described by the config.
std::vector<ProjectTable> load_rig_corpus(const RigConfig& config, std::vector<std::string>* excluded = nullptr);

/// The experiment over in-memory projects. Nothing is written.
RigReport run_rig(const RigConfig& config, std::vector<ProjectTable> projects);

/// Loads the corpus, runs, and writes results.csv, ranks.csv, ranks.txt, budget.csv,
/// timing.csv, importance.csv, and bundle/ under config.out. results.csv is rewritten
/// after every repeat.
RigReport run_rig(const RigConfig& config);

/// Scott-Knott per criterion over the non-failed cells, in report units.
std::vector<RankTableSection> rank_results(std::span<const ResultRow> rows, std::uint64_t seed);

/// x/y feature importance: x from the bellwether model, y the median over self models.
/// A feature is flagged when x exceeds the mean of the nonzero x values.
std::vector<ImportanceRow> importance_report(const ForestModel& bellwether,
                                             std::span<const ForestModel* const> self_models);

void write_results_csv(std::ostream& out, std::span<const ResultRow> rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);
void write_budget_csv(std::ostream& out, std::span<const BudgetRow> rows);
void write_timing_csv(std::ostream& out, std::span<const BudgetRow> rows);
void write_importance_csv(std::ostream& out, std::span<const ImportanceRow> rows);

}  // namespace general
