#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "general/error.hpp"

namespace general {

enum class Task { classification, regression };

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const;

  /// Appends a row; the first row fixes the width of an empty matrix.
  void push_row(std::span<const double> values);

  /// New matrix holding the given rows, in that order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  const std::vector<double>& data() const noexcept { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct FeatureSchema {
  Task task = Task::classification;
  std::vector<std::string> feature_names;
  std::string label_name;
  /// Lines-of-code column used by effort-aware metrics. May name a feature column,
  /// in which case the column is both a feature and the effort measure.
  std::optional<std::string> effort_name;

  std::size_t feature_count() const noexcept { return feature_names.size(); }
  std::optional<std::size_t> feature_index(const std::string& name) const;

  /// Throws InvalidSchema on duplicate names or a label that is also a feature.
  void validate() const;
};

/// Defect-prediction schema: the 21 file-level process metrics, `buggy` label, `loc` effort.
FeatureSchema defect_schema();

/// The 13 monthly project-health metrics, in canonical order.
const std::vector<std::string>& health_metric_names();

/// Metrics that may be used as prediction goals.
const std::vector<std::string>& health_goal_names();

/// Regression schema over the 13 health metrics with a `target` label.
FeatureSchema health_schema();

struct ProjectTable {
  std::string project_id;
  FeatureSchema schema;
  Matrix rows;
  std::vector<double> labels;
  std::vector<double> effort;  // empty when the schema has no effort column
  /// Source-row identity of each row; synthetic rows carry kSyntheticRow.
  std::vector<std::size_t> row_ids;

  static constexpr std::size_t kSyntheticRow = static_cast<std::size_t>(-1);

  std::size_t size() const noexcept { return rows.rows(); }
  bool has_effort() const noexcept { return !effort.empty(); }

  /// Subset of rows (labels, effort, and row ids follow).
  ProjectTable select(std::span<const std::size_t> indices) const;

  /// Checks width, label domain, effort sign, and finiteness.
  void validate() const;
};

/// Concatenates tables that share a schema. The result is named `id`.
ProjectTable concat_tables(std::span<const ProjectTable* const> tables, const std::string& id);

struct SummaryVector {
  std::string project_id;
  std::vector<double> values;
};

struct ProjectMeta {
  std::string project_id;
  std::int64_t pull_requests = 0;
  std::int64_t commits = 0;
  std::int64_t duration_weeks = 0;
  std::int64_t issues = 0;
  std::int64_t contributors = 0;
  std::int64_t defective_commits = 0;
  bool is_fork = false;
  bool is_software = true;
};

struct SanityResult {
  bool passed = true;
  std::vector<std::string> failed_rules;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct TableSplit {
  ProjectTable train;
  ProjectTable test;
};

/// Per-month metric matrix of one project (T months x 13 metrics).
struct HealthSeries {
  std::string project_id;
  Matrix months;
};

/// Loads one project CSV. Columns are matched by name and reordered to schema order;
/// extra columns are ignored.
ProjectTable load_project_table(const std::filesystem::path& path, const FeatureSchema& schema);

/// Writes a table with header `features..., label[, effort]`.
void write_project_table(const std::filesystem::path& path, const ProjectTable& table);

/// Column medians of the feature matrix (mean of the middle pair for even counts).
SummaryVector summarize(const ProjectTable& table);

double median(std::vector<double> values);

/// 90:10 partition of `n` projects; test size is round-half-up of n/10.
Split split_projects(std::size_t n, std::uint64_t seed);

/// 2:1 row partition; train size is floor(2n/3). Classification tables are
/// stratified by label when both classes have at least three rows.
Split split_rows(const ProjectTable& table, std::uint64_t seed);

/// 2:1 partition that keeps row order: earlier rows train, later rows test.
Split split_rows_chronological(const ProjectTable& table);

TableSplit apply_split(const ProjectTable& table, const Split& split);

SanityResult sanity_check(const ProjectMeta& meta);

/// Reads `meta.csv` (one row per project).
std::vector<ProjectMeta> load_meta(const std::filesystem::path& path);
void write_meta(const std::filesystem::path& path, std::span<const ProjectMeta> meta);

HealthSeries load_health_series(const std::filesystem::path& path);
void write_health_series(const std::filesystem::path& path, const HealthSeries& series);

/// Rows t = 0..T-horizon-1: features = all metrics at month t, target = `goal` at t+horizon.
ProjectTable build_health_instances(const HealthSeries& series, const std::string& goal,
                                    std::size_t horizon = 6);

/// Project CSVs in a corpus directory, sorted by id (meta.csv and schema.json skipped).
std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir);

FeatureSchema load_schema_json(const std::filesystem::path& path);
void save_schema_json(const std::filesystem::path& path, const FeatureSchema& schema);

nlohmann::json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& j);

}  // namespace general
