#include "general/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "general/csv.hpp"
#include "general/rng.hpp"

namespace general {

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::push_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_)
    throw Error(Errc::DimensionMismatch, "row of width " + std::to_string(values.size()) +
                                             " pushed to matrix of width " + std::to_string(cols_));
  values_.insert(values_.end(), values.begin(), values.end());
  ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::optional<std::size_t> FeatureSchema::feature_index(const std::string& name) const {
  auto it = std::find(feature_names.begin(), feature_names.end(), name);
  if (it == feature_names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - feature_names.begin());
}

void FeatureSchema::validate() const {
  if (feature_names.empty()) throw Error(Errc::InvalidSchema, "schema has no features");
  std::set<std::string> seen;
  for (const auto& name : feature_names)
    if (!seen.insert(name).second) throw Error(Errc::InvalidSchema, "duplicate feature '" + name + "'");
  if (label_name.empty()) throw Error(Errc::InvalidSchema, "schema has no label");
  if (seen.count(label_name)) throw Error(Errc::InvalidSchema, "label '" + label_name + "' is also a feature");
  if (effort_name && *effort_name == label_name)
    throw Error(Errc::InvalidSchema, "effort column cannot be the label");
}

FeatureSchema defect_schema() {
  FeatureSchema s;
  s.task = Task::classification;
  s.feature_names = {"la",        "ld",        "lt",        "age",  "ddev", "nuc",  "own",
                     "minor",     "ndev",      "ncomm",     "adev", "avg_nddev", "avg_nadev",
                     "avg_ncomm", "ns",        "exp",       "sexp", "rexp", "nd",   "sctr",
                     "nadev"};
  s.label_name = "buggy";
  s.effort_name = "loc";
  return s;
}

const std::vector<std::string>& health_metric_names() {
  static const std::vector<std::string> names = {"MC",  "MAC", "MOP", "MCP", "MMP", "MPM", "MPC",
                                                 "MOI", "MCI", "MIC", "MS",  "MF",  "MW"};
  return names;
}

const std::vector<std::string>& health_goal_names() {
  static const std::vector<std::string> names = {"MC", "MAC", "MOP", "MCP", "MOI", "MCI", "MS"};
  return names;
}

FeatureSchema health_schema() {
  FeatureSchema s;
  s.task = Task::regression;
  s.feature_names = health_metric_names();
  s.label_name = "target";
  return s;
}

ProjectTable ProjectTable::select(std::span<const std::size_t> indices) const {
  ProjectTable out;
  out.project_id = project_id;
  out.schema = schema;
  out.rows = rows.select_rows(indices);
  out.labels.reserve(indices.size());
  out.row_ids.reserve(indices.size());
  for (auto i : indices) {
    out.labels.push_back(labels[i]);
    out.row_ids.push_back(row_ids[i]);
    if (has_effort()) out.effort.push_back(effort[i]);
  }
  return out;
}

void ProjectTable::validate() const {
  const std::size_t n = rows.rows();
  if (rows.cols() != schema.feature_count() && n > 0)
    throw Error(Errc::DimensionMismatch, project_id + ": row width does not match schema");
  if (labels.size() != n || row_ids.size() != n || (has_effort() && effort.size() != n))
    throw Error(Errc::LengthMismatch, project_id + ": column lengths differ");
  for (double v : rows.data())
    if (!std::isfinite(v)) throw Error(Errc::NonNumericCell, project_id + ": non-finite feature value");
  for (std::size_t i = 0; i < n; ++i) {
    if (schema.task == Task::classification && labels[i] != 0.0 && labels[i] != 1.0)
      throw Error(Errc::InvalidLabel, project_id + ": row " + std::to_string(i) + " label not in {0,1}");
    if (schema.task == Task::regression && !(labels[i] >= 0.0 && std::isfinite(labels[i])))
      throw Error(Errc::InvalidLabel, project_id + ": row " + std::to_string(i) + " target must be >= 0");
    if (has_effort() && !(effort[i] >= 0.0))
      throw Error(Errc::InvalidEffort, project_id + ": row " + std::to_string(i) + " has negative effort");
  }
}

ProjectTable concat_tables(std::span<const ProjectTable* const> tables, const std::string& id) {
  if (tables.empty()) throw Error(Errc::EmptyInput, "nothing to concatenate");
  ProjectTable out;
  out.project_id = id;
  out.schema = tables.front()->schema;
  const bool effort = tables.front()->has_effort();
  for (const ProjectTable* t : tables) {
    if (t->schema.feature_names != out.schema.feature_names)
      throw Error(Errc::DimensionMismatch, "cannot pool " + t->project_id + ": schema differs");
    for (std::size_t i = 0; i < t->size(); ++i) {
      out.rows.push_row(t->rows.row(i));
      out.labels.push_back(t->labels[i]);
      out.row_ids.push_back(t->row_ids[i]);
      if (effort) out.effort.push_back(t->has_effort() ? t->effort[i] : 0.0);
    }
  }
  return out;
}

ProjectTable load_project_table(const std::filesystem::path& path, const FeatureSchema& schema) {
  schema.validate();
  const csv::Document doc = csv::read(path);

  auto require = [&](const std::string& name) {
    auto col = doc.column(name);
    if (!col) throw Error(Errc::MissingColumn, path.string() + ": column '" + name + "' not found");
    return *col;
  };
  std::vector<std::size_t> feature_cols;
  for (const auto& name : schema.feature_names) feature_cols.push_back(require(name));
  const std::size_t label_col = require(schema.label_name);
  std::optional<std::size_t> effort_col;
  if (schema.effort_name) effort_col = require(*schema.effort_name);

  if (doc.rows.empty()) throw Error(Errc::EmptyFile, path.string() + " has no data rows");

  ProjectTable table;
  table.project_id = path.stem().string();
  table.schema = schema;
  table.rows = Matrix(doc.rows.size(), schema.feature_count());

  auto cell = [&](std::size_t r, std::size_t c) {
    const auto& row = doc.rows[r];
    std::optional<double> v;
    if (c < row.size()) v = csv::parse_number(row[c]);
    if (!v)
      throw Error(Errc::NonNumericCell, path.string() + ": row " + std::to_string(r + 1) + ", column '" +
                                            doc.header[c] + "'");
    return *v;
  };

  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    for (std::size_t j = 0; j < feature_cols.size(); ++j) table.rows(r, j) = cell(r, feature_cols[j]);
    table.labels.push_back(cell(r, label_col));
    if (effort_col) table.effort.push_back(cell(r, *effort_col));
    table.row_ids.push_back(r);
  }
  table.validate();
  return table;
}

void write_project_table(const std::filesystem::path& path, const ProjectTable& table) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  const auto& s = table.schema;
  const bool separate_effort = table.has_effort() && s.effort_name && !s.feature_index(*s.effort_name);
  for (const auto& name : s.feature_names) out << name << ',';
  out << s.label_name;
  if (separate_effort) out << ',' << *s.effort_name;
  out << '\n';
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (double v : table.rows.row(r)) out << csv::format_number(v) << ',';
    out << csv::format_number(table.labels[r]);
    if (separate_effort) out << ',' << csv::format_number(table.effort[r]);
    out << '\n';
  }
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::EmptyInput, "median of empty sample");
  const std::size_t n = values.size();
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

SummaryVector summarize(const ProjectTable& table) {
  if (table.size() == 0) throw Error(Errc::EmptyTable, table.project_id + " has no rows");
  SummaryVector out;
  out.project_id = table.project_id;
  out.values.reserve(table.rows.cols());
  for (std::size_t c = 0; c < table.rows.cols(); ++c) out.values.push_back(median(table.rows.column(c)));
  return out;
}

Split split_projects(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw Error(Errc::TooFewProjects, "need at least 10 projects, got " + std::to_string(n));
  const std::size_t n_test = (n + 5) / 10;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0x70726f6a}));
  rng.shuffle(order);
  Split out;
  out.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Split split_rows(const ProjectTable& table, std::uint64_t seed) {
  const std::size_t n = table.size();
  if (n < 3) throw Error(Errc::TooFewRows, table.project_id + ": need at least 3 rows to split");
  const std::size_t n_train = 2 * n / 3;
  Rng rng(derive_seed(seed, {0x726f7773}));

  Split out;
  std::vector<std::size_t> pos, neg;
  if (table.schema.task == Task::classification) {
    for (std::size_t i = 0; i < n; ++i) (table.labels[i] == 1.0 ? pos : neg).push_back(i);
  }
  if (pos.size() >= 3 && neg.size() >= 3) {
    auto pos_train = static_cast<std::size_t>(std::floor(
        static_cast<double>(pos.size()) * static_cast<double>(n_train) / static_cast<double>(n) + 0.5));
    pos_train = std::clamp<std::size_t>(pos_train, 1, pos.size() - 1);
    std::size_t neg_train = n_train - pos_train;
    neg_train = std::clamp<std::size_t>(neg_train, 1, neg.size() - 1);
    pos_train = n_train - neg_train;
    rng.shuffle(pos);
    rng.shuffle(neg);
    out.train.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(pos_train));
    out.train.insert(out.train.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(neg_train));
    out.test.assign(pos.begin() + static_cast<std::ptrdiff_t>(pos_train), pos.end());
    out.test.insert(out.test.end(), neg.begin() + static_cast<std::ptrdiff_t>(neg_train), neg.end());
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Split split_rows_chronological(const ProjectTable& table) {
  const std::size_t n = table.size();
  if (n < 3) throw Error(Errc::TooFewRows, table.project_id + ": need at least 3 rows to split");
  Split out;
  for (std::size_t i = 0; i < n; ++i) (i < 2 * n / 3 ? out.train : out.test).push_back(i);
  return out;
}

TableSplit apply_split(const ProjectTable& table, const Split& split) {
  return {table.select(split.train), table.select(split.test)};
}

SanityResult sanity_check(const ProjectMeta& m) {
  SanityResult r;
  auto rule = [&](bool failed, const char* name) {
    if (failed) r.failed_rules.emplace_back(name);
  };
  rule(m.pull_requests < 1, "Collaboration");
  rule(m.commits <= 20, "Commits");
  rule(m.duration_weeks < 50, "Duration");
  rule(m.issues <= 10, "Issues");
  rule(m.contributors < 10, "Personal");
  rule(!m.is_software, "Software Development");
  rule(m.defective_commits < 10, "Defective Commits");
  rule(m.is_fork, "Forked Project");
  r.passed = r.failed_rules.empty();
  return r;
}

std::vector<ProjectMeta> load_meta(const std::filesystem::path& path) {
  const csv::Document doc = csv::read(path);
  auto col = [&](const char* name) {
    auto c = doc.column(name);
    if (!c) throw Error(Errc::MissingColumn, path.string() + ": column '" + std::string(name) + "' not found");
    return *c;
  };
  const std::size_t id = col("project_id"), prs = col("pull_requests"), commits = col("commits"),
                    weeks = col("duration_weeks"), issues = col("issues"), contributors = col("contributors"),
                    defective = col("defective_commits"), fork = col("is_fork"), software = col("is_software");

  std::vector<ProjectMeta> out;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    auto text = [&](std::size_t c) -> const std::string& {
      if (c >= row.size())
        throw Error(Errc::NonNumericCell, path.string() + ": row " + std::to_string(r + 1) + " is short");
      return row[c];
    };
    auto count = [&](std::size_t c) {
      auto v = csv::parse_number(text(c));
      if (!v || *v < 0 || *v != std::floor(*v))
        throw Error(Errc::NonNumericCell,
                    path.string() + ": row " + std::to_string(r + 1) + ", column '" + doc.header[c] + "'");
      return static_cast<std::int64_t>(*v);
    };
    auto flag = [&](std::size_t c) {
      const std::string& s = text(c);
      if (s == "1" || s == "true" || s == "True" || s == "TRUE") return true;
      if (s == "0" || s == "false" || s == "False" || s == "FALSE") return false;
      throw Error(Errc::NonNumericCell,
                  path.string() + ": row " + std::to_string(r + 1) + ", column '" + doc.header[c] + "'");
    };
    ProjectMeta m;
    m.project_id = text(id);
    m.pull_requests = count(prs);
    m.commits = count(commits);
    m.duration_weeks = count(weeks);
    m.issues = count(issues);
    m.contributors = count(contributors);
    m.defective_commits = count(defective);
    m.is_fork = flag(fork);
    m.is_software = flag(software);
    out.push_back(std::move(m));
  }
  return out;
}

void write_meta(const std::filesystem::path& path, std::span<const ProjectMeta> meta) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << "project_id,pull_requests,commits,duration_weeks,issues,contributors,defective_commits,is_fork,"
         "is_software\n";
  for (const auto& m : meta)
    out << m.project_id << ',' << m.pull_requests << ',' << m.commits << ',' << m.duration_weeks << ',' << m.issues
        << ',' << m.contributors << ',' << m.defective_commits << ',' << (m.is_fork ? 1 : 0) << ','
        << (m.is_software ? 1 : 0) << '\n';
}

HealthSeries load_health_series(const std::filesystem::path& path) {
  const csv::Document doc = csv::read(path);
  auto month_col = doc.column("month");
  if (!month_col) throw Error(Errc::MissingColumn, path.string() + ": column 'month' not found");
  std::vector<std::size_t> cols;
  for (const auto& name : health_metric_names()) {
    auto c = doc.column(name);
    if (!c) throw Error(Errc::MissingColumn, path.string() + ": column '" + name + "' not found");
    cols.push_back(*c);
  }
  if (doc.rows.empty()) throw Error(Errc::EmptyFile, path.string() + " has no data rows");

  std::vector<std::pair<double, std::vector<double>>> months;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    auto cell = [&](std::size_t c) {
      std::optional<double> v;
      if (c < doc.rows[r].size()) v = csv::parse_number(doc.rows[r][c]);
      if (!v)
        throw Error(Errc::NonNumericCell, path.string() + ": row " + std::to_string(r + 1) + ", column '" +
                                              doc.header[c] + "'");
      return *v;
    };
    std::vector<double> values;
    for (auto c : cols) values.push_back(cell(c));
    months.emplace_back(cell(*month_col), std::move(values));
  }
  std::stable_sort(months.begin(), months.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  HealthSeries s;
  s.project_id = path.stem().string();
  for (const auto& [month, values] : months) s.months.push_row(values);
  return s;
}

void write_health_series(const std::filesystem::path& path, const HealthSeries& series) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << "month";
  for (const auto& name : health_metric_names()) out << ',' << name;
  out << '\n';
  for (std::size_t t = 0; t < series.months.rows(); ++t) {
    out << t;
    for (double v : series.months.row(t)) out << ',' << csv::format_number(v);
    out << '\n';
  }
}

ProjectTable build_health_instances(const HealthSeries& series, const std::string& goal, std::size_t horizon) {
  const auto& goals = health_goal_names();
  if (std::find(goals.begin(), goals.end(), goal) == goals.end())
    throw Error(Errc::UnknownGoal, "'" + goal + "' is not a health goal");
  const auto& metrics = health_metric_names();
  if (series.months.cols() != metrics.size())
    throw Error(Errc::DimensionMismatch, series.project_id + ": expected 13 metric columns");
  const std::size_t T = series.months.rows();
  if (T <= horizon)
    throw Error(Errc::SeriesTooShort, series.project_id + ": " + std::to_string(T) +
                                          " months is not longer than horizon " + std::to_string(horizon));
  const std::size_t goal_col =
      static_cast<std::size_t>(std::find(metrics.begin(), metrics.end(), goal) - metrics.begin());

  ProjectTable table;
  table.project_id = series.project_id;
  table.schema = health_schema();
  for (std::size_t t = 0; t + horizon < T; ++t) {
    table.rows.push_row(series.months.row(t));
    table.labels.push_back(series.months(t + horizon, goal_col));
    table.row_ids.push_back(t);
  }
  table.validate();
  return table;
}

std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::Io, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    if (entry.path().filename() == "meta.csv") continue;
    out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::json schema_to_json(const FeatureSchema& schema) {
  nlohmann::json j;
  j["task"] = schema.task == Task::classification ? "classification" : "regression";
  j["features"] = schema.feature_names;
  j["label"] = schema.label_name;
  j["effort"] = schema.effort_name ? nlohmann::json(*schema.effort_name) : nlohmann::json(nullptr);
  return j;
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
  try {
    FeatureSchema s;
    const std::string task = j.at("task").get<std::string>();
    if (task == "classification") s.task = Task::classification;
    else if (task == "regression") s.task = Task::regression;
    else throw Error(Errc::InvalidSchema, "unknown task '" + task + "'");
    s.feature_names = j.at("features").get<std::vector<std::string>>();
    s.label_name = j.at("label").get<std::string>();
    if (j.contains("effort") && !j["effort"].is_null()) s.effort_name = j["effort"].get<std::string>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidSchema, e.what());
  }
}

FeatureSchema load_schema_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidSchema, path.string() + ": " + e.what());
  }
  return schema_from_json(j);
}

void save_schema_json(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << schema_to_json(schema).dump(2) << '\n';
}

}  // namespace general
