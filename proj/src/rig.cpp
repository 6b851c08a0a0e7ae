#include "general/rig.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "general/csv.hpp"
#include "general/kernels.hpp"
#include "general/rng.hpp"

namespace general {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string clean_reason(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '"', '\'');
  return s;
}

[[noreturn]] void leak(const std::string& what) { throw Error(Errc::LeakageDetected, what); }

// Guards the one rule the rig must never break: no row of a test2 partition reaches
// a training routine, and oversampled rows never reach scoring.
class LeakageAudit {
 public:
  void projects_disjoint(std::span<const std::string> train1, std::span<const std::string> test1) {
    const std::set<std::string> held_out(test1.begin(), test1.end());
    for (const auto& id : train1)
      if (held_out.count(id)) leak("project " + id + " is in both train1 and test1");
    ++checks_;
  }

  void rows_disjoint(const ProjectTable& train, const ProjectTable& test) {
    const std::set<std::size_t> held_out(test.row_ids.begin(), test.row_ids.end());
    for (auto id : train.row_ids)
      if (id != ProjectTable::kSyntheticRow && held_out.count(id))
        leak(train.project_id + ": test2 row " + std::to_string(id) + " reached training");
    ++checks_;
  }

  void no_synthetic(const ProjectTable& test) {
    for (auto id : test.row_ids)
      if (id == ProjectTable::kSyntheticRow) leak(test.project_id + ": synthetic row in a scored partition");
    ++checks_;
  }

  std::size_t checks() const { return checks_.load(); }

 private:
  std::atomic<std::size_t> checks_{0};
};

struct Treatment {
  std::string name;
  std::shared_ptr<const ForestModel> model;
  std::string failure;
};

std::vector<ResultRow> score_treatments(std::size_t repeat, const std::string& project,
                                        const std::vector<Treatment>& treatments, const ProjectTable& test,
                                        Task task) {
  const auto criteria = criteria_for(task);
  std::vector<ResultRow> rows;
  for (const auto& t : treatments) {
    std::string failure = t.failure;
    GoalVector goals;
    if (failure.empty()) {
      try {
        goals = score_model(*t.model, test);
      } catch (const Error& e) {
        failure = e.what();
      }
    }
    for (std::size_t c = 0; c < criteria.size(); ++c) {
      ResultRow r{repeat, project, t.name, criteria[c].first, 0.0, clean_reason(failure)};
      if (failure.empty()) r.value = goals.values[c];
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
}

template <typename Writer>
std::string render(Writer&& w) {
  std::ostringstream s;
  w(s);
  return s.str();
}

}  // namespace

// ---- config ------------------------------------------------------------------------

void RigConfig::validate() const {
  if (repeats < 1) throw Error(Errc::InvalidConfig, "repeats must be at least 1");
  if (branching < 2) throw Error(Errc::InvalidConfig, "branching factor must be at least 2");
  if (!(threshold > 0.0)) throw Error(Errc::InvalidConfig, "threshold must be positive");
  if (levels.empty()) throw Error(Errc::InvalidConfig, "no levels to evaluate");
  if (n_trees && *n_trees == 0) throw Error(Errc::InvalidConfig, "n_trees must be positive");
  if (task == RigTask::health) {
    const auto& goals = health_goal_names();
    if (std::find(goals.begin(), goals.end(), goal) == goals.end())
      throw Error(Errc::InvalidConfig, "health task needs a goal in MC, MAC, MOP, MCP, MOI, MCI, MS; got '" + goal + "'");
    if (horizon < 1) throw Error(Errc::InvalidConfig, "horizon must be at least 1");
  } else if (!goal.empty()) {
    throw Error(Errc::InvalidConfig, "goal applies to the health task only");
  }
}

Pipeline RigConfig::pipeline() const {
  Pipeline p = Pipeline::defaults(task == RigTask::defect ? Task::classification : Task::regression);
  if (de_enabled) p.de_enabled = *de_enabled;
  if (n_trees) p.forest.n_trees = *n_trees;
  return p;
}

nlohmann::json RigConfig::to_json() const {
  nlohmann::json j{{"corpus", corpus.string()},
                   {"task", task == RigTask::defect ? "defect" : "health"},
                   {"goal", goal},
                   {"repeats", repeats},
                   {"seed", seed},
                   {"branching", branching},
                   {"threshold", threshold},
                   {"levels", levels},
                   {"out", out.string()},
                   {"health_split", health_split == HealthSplit::chronological ? "chronological" : "random"},
                   {"horizon", horizon}};
  j["de_enabled"] = de_enabled ? nlohmann::json(*de_enabled) : nlohmann::json(nullptr);
  j["n_trees"] = n_trees ? nlohmann::json(*n_trees) : nlohmann::json(nullptr);
  return j;
}

RigConfig RigConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"corpus", "task",   "goal",         "repeats", "seed",
                                              "branching", "threshold", "de_enabled", "levels", "out",
                                              "health_split", "horizon", "n_trees"};
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw Error(Errc::InvalidConfig, "unknown config key '" + key + "'");
  RigConfig c;
  try {
    c.corpus = j.value("corpus", std::string());
    const std::string task = j.value("task", std::string("defect"));
    if (task == "defect") c.task = RigTask::defect;
    else if (task == "health") c.task = RigTask::health;
    else throw Error(Errc::InvalidConfig, "task must be defect or health, got '" + task + "'");
    c.goal = j.value("goal", std::string());
    c.repeats = j.value("repeats", c.repeats);
    c.seed = j.value("seed", c.seed);
    c.branching = j.value("branching", c.branching);
    c.threshold = j.value("threshold", c.threshold);
    if (j.contains("de_enabled") && !j["de_enabled"].is_null()) c.de_enabled = j["de_enabled"].get<bool>();
    if (j.contains("levels")) c.levels = j["levels"].get<std::vector<std::size_t>>();
    c.out = j.value("out", std::string());
    const std::string split = j.value("health_split", std::string("chronological"));
    if (split == "chronological") c.health_split = HealthSplit::chronological;
    else if (split == "random") c.health_split = HealthSplit::random;
    else throw Error(Errc::InvalidConfig, "health_split must be chronological or random");
    c.horizon = j.value("horizon", c.horizon);
    if (j.contains("n_trees") && !j["n_trees"].is_null()) c.n_trees = j["n_trees"].get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("bad config value: ") + e.what());
  }
  return c;
}

RigConfig RigConfig::load(const fs::path& path) { return from_json(read_json_file(path)); }

// ---- criteria and units ------------------------------------------------------------

std::vector<std::pair<std::string, bool>> criteria_for(Task task) {
  if (task == Task::regression) return {{"mre", true}};
  return {{"recall", false}, {"false_alarm", true}, {"precision", false}, {"popt20", false}, {"ifa", true}};
}

double report_units(const std::string& criterion, double value) {
  return criterion == "ifa" ? value : 100.0 * value;
}

// ---- corpus ------------------------------------------------------------------------

std::vector<ProjectTable> load_rig_corpus(const RigConfig& config, std::vector<std::string>* excluded) {
  config.validate();
  if (config.corpus.empty()) throw Error(Errc::InvalidConfig, "no corpus given");
  if (!fs::is_directory(config.corpus)) throw Error(Errc::Io, "corpus " + config.corpus.string() + " is not a directory");

  std::set<std::string> failing;
  const fs::path meta_path = config.corpus / "meta.csv";
  if (fs::exists(meta_path))
    for (const auto& m : load_meta(meta_path))
      if (!sanity_check(m).passed) failing.insert(m.project_id);

  FeatureSchema schema = defect_schema();
  if (config.task == RigTask::defect && fs::exists(config.corpus / "schema.json"))
    schema = load_schema_json(config.corpus / "schema.json");

  std::vector<ProjectTable> out;
  for (const auto& path : list_corpus(config.corpus)) {
    const std::string id = path.stem().string();
    if (failing.count(id)) {
      if (excluded) excluded->push_back(id);
      continue;
    }
    if (config.task == RigTask::defect) {
      ProjectTable t = load_project_table(path, schema);
      t.project_id = id;
      out.push_back(std::move(t));
    } else {
      HealthSeries s = load_health_series(path);
      s.project_id = id;
      out.push_back(build_health_instances(s, config.goal, config.horizon));
    }
  }
  return out;
}

// ---- the rig -----------------------------------------------------------------------

namespace {

struct RigContext {
  const RigConfig& config;
  Task task;
  Pipeline pipeline;
  std::vector<ProjectTable> projects;  // sorted by id
};

RigContext prepare(const RigConfig& config, std::vector<ProjectTable> projects) {
  config.validate();
  const Task task = config.task == RigTask::defect ? Task::classification : Task::regression;
  for (const auto& p : projects)
    if (p.schema.task != task) throw Error(Errc::InvalidConfig, p.project_id + ": table task does not match the rig");
  std::sort(projects.begin(), projects.end(),
            [](const ProjectTable& a, const ProjectTable& b) { return a.project_id < b.project_id; });
  for (std::size_t i = 1; i < projects.size(); ++i)
    if (projects[i].project_id == projects[i - 1].project_id)
      throw Error(Errc::InvalidConfig, "duplicate project id " + projects[i].project_id);
  return {config, task, config.pipeline(), std::move(projects)};
}

void run_repeat(const RigContext& ctx, std::size_t repeat, RigReport& report, LeakageAudit& audit) {
  const RigConfig& config = ctx.config;
  const std::vector<ProjectTable>& projects = ctx.projects;
  const Task task = ctx.task;
  const Pipeline& pipeline = ctx.pipeline;
  const std::uint64_t seed_r = derive_seed(config.seed, {repeat});
  const Split split = split_projects(projects.size(), derive_seed(seed_r, {1}));

  std::vector<const ProjectTable*> train1, test1;
  std::vector<std::string> train_ids, test_ids;
  for (auto i : split.train) {
    train1.push_back(&projects[i]);
    train_ids.push_back(projects[i].project_id);
  }
  for (auto i : split.test) {
    test1.push_back(&projects[i]);
    test_ids.push_back(projects[i].project_id);
  }
  audit.projects_disjoint(train_ids, test_ids);

  std::vector<SummaryVector> summaries;
  ProjectIndex index;
  for (const auto* p : train1) {
    summaries.push_back(summarize(*p));
    index[p->project_id] = p;
  }
  const ClusterTree tree = build_tree(summaries, config.branching, config.threshold);
  const ComparisonBudget predicted = comparison_budget(tree);

  // One bank serves GENERAL and Bellwether0, so both see the same per-project models.
  ModelBank bank(pipeline, derive_seed(seed_r, {2}));
  auto start = Clock::now();
  const GeneralResult gen = general(tree, index, bank);
  const double general_seconds = seconds_since(start);

  start = Clock::now();
  const TournamentResult flat = tournament(train1, bank);
  const double flat_seconds = seconds_since(start);

  start = Clock::now();
  Treatment global{"global", nullptr, ""};
  try {
    const ProjectTable pooled = concat_tables(train1, "global");
    global.model = std::make_shared<const ForestModel>(train_pipeline(pooled, pipeline, derive_seed(seed_r, {3})));
  } catch (const Error& e) {
    global.failure = e.what();
  }
  const double global_seconds = seconds_since(start);

  const std::size_t n1 = train1.size();
  report.budget.push_back({repeat, "general", n1, predicted.m, gen.comparisons, predicted.total, general_seconds});
  report.budget.push_back({repeat, "bellwether0", n1, 1, flat.comparisons_made, n1 * (n1 - 1), flat_seconds});
  report.budget.push_back({repeat, "global", n1, 0, 0, 0, global_seconds});

  auto bank_model = [&](const std::string& id) -> std::shared_ptr<const ForestModel> {
    const auto* e = bank.find(id);
    return e ? e->model : nullptr;
  };
  const Treatment b0{"bellwether0", bank_model(flat.winner), ""};

  const std::function<std::vector<ResultRow>(std::size_t)> evaluate = [&](std::size_t k) {
    const ProjectTable& project = *test1[k];
    const std::uint64_t seed_p = derive_seed(seed_r, project.project_id);
    const Split rows = task == Task::regression && config.health_split == HealthSplit::chronological
                           ? split_rows_chronological(project)
                           : split_rows(project, derive_seed(seed_p, {4}));
    const TableSplit parts = apply_split(project, rows);
    audit.rows_disjoint(parts.train, parts.test);
    audit.no_synthetic(parts.test);

    std::vector<Treatment> treatments;
    Treatment self{"self", nullptr, ""};
    try {
      self.model = std::make_shared<const ForestModel>(train_pipeline(parts.train, pipeline, derive_seed(seed_p, {5})));
    } catch (const Error& e) {
      self.failure = e.what();
    }
    treatments.push_back(std::move(self));
    treatments.push_back(global);
    treatments.push_back(b0);
    for (auto level : config.levels) {
      Treatment t{"general" + std::to_string(level), nullptr, ""};
      try {
        // Levels below the leaves resolve to the leaf bellwethers.
        const std::size_t effective = std::min(level, gen.map.depth());
        t.model = apply_index(tree, gen.map, effective, parts.train, bank_model).model;
      } catch (const Error& e) {
        t.failure = e.what();
      }
      treatments.push_back(std::move(t));
    }
    return score_treatments(repeat, project.project_id, treatments, parts.test, task);
  };
  for (auto& rows : kernels::map_parallel<std::vector<ResultRow>>(test1.size(), evaluate))
    report.results.insert(report.results.end(), rows.begin(), rows.end());

  if (repeat != 0) return;
  report.tree_depth = tree.depth();
  Bundle& b = report.bundle;
  b.tree = tree;
  b.map = gen.map;
  b.schema = projects.front().schema;
  b.pipeline = pipeline;
  b.seed = config.seed;
  b.goal = config.goal;
  b.horizon = config.horizon;
  nlohmann::json hashed = config.to_json();
  hashed.erase("out");
  b.config_hash = config_hash(hashed);
  for (const auto& level : gen.map.levels)
    for (const auto& [key, id] : level) b.models[id] = bank_model(id);

  // A training project's bank model is its self model over all of its rows.
  std::vector<const ForestModel*> self_models;
  for (const auto& id : train_ids)
    if (auto m = bank_model(id)) self_models.push_back(m.get());
  if (auto root = bank_model(gen.map.root()); root && !self_models.empty())
    report.importance = importance_report(*root, self_models);
}

}  // namespace

RigReport run_rig(const RigConfig& config, std::vector<ProjectTable> projects) {
  const RigContext ctx = prepare(config, std::move(projects));
  RigReport report;
  for (const auto& p : ctx.projects) report.projects.push_back(p.project_id);
  LeakageAudit audit;
  for (std::size_t r = 0; r < config.repeats; ++r) run_repeat(ctx, r, report, audit);
  report.ranks = rank_results(report.results, config.seed);
  report.leakage_checks = audit.checks();
  return report;
}

RigReport run_rig(const RigConfig& config) {
  config.validate();
  if (config.out.empty()) throw Error(Errc::InvalidConfig, "no output directory given");
  std::vector<std::string> excluded;
  const RigContext ctx = prepare(config, load_rig_corpus(config, &excluded));

  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + config.out.string() + ": " + ec.message());

  RigReport report;
  for (const auto& p : ctx.projects) report.projects.push_back(p.project_id);
  report.excluded = excluded;
  LeakageAudit audit;
  for (std::size_t r = 0; r < config.repeats; ++r) {
    run_repeat(ctx, r, report, audit);
    write_text(config.out / "results.csv", render([&](std::ostream& o) { write_results_csv(o, report.results); }));
  }
  report.ranks = rank_results(report.results, config.seed);
  report.leakage_checks = audit.checks();

  write_text(config.out / "ranks.csv", render([&](std::ostream& o) { write_rank_csv(o, report.ranks); }));
  write_text(config.out / "ranks.txt", render([&](std::ostream& o) { write_rank_text(o, report.ranks); }));
  write_text(config.out / "budget.csv", render([&](std::ostream& o) { write_budget_csv(o, report.budget); }));
  write_text(config.out / "timing.csv", render([&](std::ostream& o) { write_timing_csv(o, report.budget); }));
  write_text(config.out / "importance.csv",
             render([&](std::ostream& o) { write_importance_csv(o, report.importance); }));
  save_bundle(config.out / "bundle", report.bundle);
  return report;
}

// ---- reporting ---------------------------------------------------------------------

std::vector<RankTableSection> rank_results(std::span<const ResultRow> rows, std::uint64_t seed) {
  std::vector<std::string> criteria;  // first-seen order
  std::map<std::string, std::map<std::string, std::vector<double>>> samples;
  for (const auto& r : rows) {
    if (std::find(criteria.begin(), criteria.end(), r.criterion) == criteria.end()) criteria.push_back(r.criterion);
    if (!r.failed()) samples[r.criterion][r.treatment].push_back(report_units(r.criterion, r.value));
  }
  std::vector<RankTableSection> out;
  for (const auto& criterion : criteria) {
    RankTableSection section;
    section.criterion = criterion;
    section.minimize = criterion == "false_alarm" || criterion == "ifa" || criterion == "mre";
    std::vector<TreatmentSamples> treatments;
    for (auto& [name, values] : samples[criterion]) treatments.push_back({name, values});
    if (!treatments.empty()) section.rows = scott_knott(std::move(treatments), derive_seed(seed, criterion));
    out.push_back(std::move(section));
  }
  return out;
}

std::vector<ImportanceRow> importance_report(const ForestModel& bellwether,
                                             std::span<const ForestModel* const> self_models) {
  if (!bellwether.fitted()) throw Error(Errc::UnfittedModel, "bellwether model is not fitted");
  if (self_models.empty()) throw Error(Errc::UnfittedModel, "no self models to compare against");
  const std::vector<double> x = feature_importance(bellwether);
  std::vector<std::vector<double>> per_feature(x.size());
  for (const ForestModel* m : self_models) {
    if (!m || !m->fitted()) throw Error(Errc::UnfittedModel, "a self model is not fitted");
    const std::vector<double> imp = feature_importance(*m);
    if (imp.size() != x.size()) throw Error(Errc::DimensionMismatch, "self model has a different schema");
    for (std::size_t f = 0; f < x.size(); ++f) per_feature[f].push_back(imp[f]);
  }
  double nonzero_sum = 0.0;
  std::size_t nonzero = 0;
  for (double v : x)
    if (v > 0.0) {
      nonzero_sum += v;
      ++nonzero;
    }
  const double cutoff = nonzero ? nonzero_sum / static_cast<double>(nonzero) : 0.0;
  std::vector<ImportanceRow> out;
  for (std::size_t f = 0; f < x.size(); ++f)
    out.push_back({bellwether.feature_names[f], x[f], median(per_feature[f]), nonzero > 0 && x[f] > cutoff});
  return out;
}

void write_results_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << "repeat,project,treatment,criterion,value,status\n";
  for (const auto& r : rows) {
    out << r.repeat << ',' << r.project << ',' << r.treatment << ',' << r.criterion << ',';
    if (r.failed()) out << ",failed: " << r.failure << '\n';
    else out << csv::format_number(r.value) << ",ok\n";
  }
}

std::vector<ResultRow> read_results_csv(const fs::path& path) {
  const csv::Document doc = csv::read(path);
  auto col = [&](const char* name) {
    auto c = doc.column(name);
    if (!c) throw Error(Errc::MissingColumn, path.string() + ": column '" + std::string(name) + "' not found");
    return *c;
  };
  const std::size_t repeat = col("repeat"), project = col("project"), treatment = col("treatment"),
                    criterion = col("criterion"), value = col("value");
  const auto status = doc.column("status");
  std::vector<ResultRow> out;
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    const auto& row = doc.rows[i];
    if (row.size() < doc.header.size())
      throw Error(Errc::NonNumericCell, path.string() + ": row " + std::to_string(i + 1) + " is short");
    ResultRow r;
    const auto rep = csv::parse_number(row[repeat]);
    if (!rep || *rep < 0) throw Error(Errc::NonNumericCell, path.string() + ": row " + std::to_string(i + 1) + ", column 'repeat'");
    r.repeat = static_cast<std::size_t>(*rep);
    r.project = row[project];
    r.treatment = row[treatment];
    r.criterion = row[criterion];
    const std::string st = status ? row[*status] : "ok";
    if (st == "ok") {
      const auto v = csv::parse_number(row[value]);
      if (!v) throw Error(Errc::NonNumericCell, path.string() + ": row " + std::to_string(i + 1) + ", column 'value'");
      r.value = *v;
    } else {
      r.failure = st.rfind("failed: ", 0) == 0 ? st.substr(8) : st;
      if (r.failure.empty()) r.failure = "failed";
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_budget_csv(std::ostream& out, std::span<const BudgetRow> rows) {
  out << "repeat,treatment,projects,leaf_clusters,comparisons,predicted\n";
  for (const auto& r : rows)
    out << r.repeat << ',' << r.treatment << ',' << r.projects << ',' << r.leaf_clusters << ',' << r.comparisons << ','
        << r.predicted << '\n';
}

void write_timing_csv(std::ostream& out, std::span<const BudgetRow> rows) {
  out << "repeat,treatment,seconds\n";
  for (const auto& r : rows) out << r.repeat << ',' << r.treatment << ',' << csv::format_number(r.seconds) << '\n';
}

void write_importance_csv(std::ostream& out, std::span<const ImportanceRow> rows) {
  out << "feature,x,y,cell,globally_important\n";
  char cell[64];
  for (const auto& r : rows) {
    std::snprintf(cell, sizeof cell, "%.2f/%.2f", r.x, r.y);
    out << r.feature << ',' << csv::format_number(r.x) << ',' << csv::format_number(r.y) << ',' << cell << ','
        << (r.globally_important ? 1 : 0) << '\n';
  }
}

}  // namespace general
