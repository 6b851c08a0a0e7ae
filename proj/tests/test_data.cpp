#include <doctest.h>

#include <algorithm>
#include <set>

#include "general/data.hpp"
#include "helpers.hpp"

using namespace general;
using testing::make_table;

namespace {

double sort_and_average_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

FeatureSchema small_schema() {
  FeatureSchema s;
  s.feature_names = {"la", "ld", "nf"};
  s.label_name = "buggy";
  s.effort_name = "loc";
  return s;
}

void check_partition(const Split& s, std::size_t n) {
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  REQUIRE(all.size() == n);
  for (std::size_t i = 0; i < n; ++i) CHECK(all[i] == i);
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("canonical schemas") {
  const FeatureSchema d = defect_schema();
  CHECK(d.feature_count() == 21);
  CHECK(d.label_name == "buggy");
  CHECK(d.effort_name == std::optional<std::string>("loc"));
  CHECK(d.feature_index("rexp").has_value());
  CHECK(d.feature_index("avg_nddev").has_value());
  CHECK_NOTHROW(d.validate());
  const FeatureSchema h = health_schema();
  CHECK(h.task == Task::regression);
  CHECK(h.feature_count() == 13);
  CHECK(health_goal_names().size() == 7);
}

TEST_CASE("schema validation rejects duplicates and label collisions") {
  FeatureSchema s = small_schema();
  s.feature_names.push_back("la");
  CHECK_ERRC(s.validate(), Errc::InvalidSchema);
  s = small_schema();
  s.label_name = "ld";
  CHECK_ERRC(s.validate(), Errc::InvalidSchema);
}

TEST_CASE("load with header equal to schema") {
  testing::TempDir dir("load_identity");
  std::string text = "la,ld,nf,buggy,loc\n";
  for (int i = 0; i < 10; ++i) text += std::to_string(i) + ",1,2," + std::to_string(i % 2) + ",10\n";
  testing::write_file(dir.path() / "alpha.csv", text);
  const ProjectTable t = load_project_table(dir.path() / "alpha.csv", small_schema());
  CHECK(t.project_id == "alpha");
  CHECK(t.size() == 10);
  CHECK(t.rows(3, 0) == 3.0);
  CHECK(t.labels[3] == 1.0);
  CHECK(t.effort.size() == 10);
}

TEST_CASE("permuted columns are reordered; write/read round trip") {
  testing::TempDir dir("load_permuted");
  testing::write_file(dir.path() / "p.csv", "loc,nf,buggy,extra,la,ld\n7,3,1,x,11.5,2\n9,4,0,y,0.25,5\n");
  const ProjectTable t = load_project_table(dir.path() / "p.csv", small_schema());
  CHECK(t.rows(0, 0) == 11.5);  // cell (0, "la")
  CHECK(t.rows(0, 2) == 3.0);
  CHECK(t.effort[1] == 9.0);

  write_project_table(dir.path() / "q.csv", t);
  const ProjectTable back = load_project_table(dir.path() / "q.csv", small_schema());
  CHECK(back.rows.data() == t.rows.data());
  CHECK(back.labels == t.labels);
  CHECK(back.effort == t.effort);
}

TEST_CASE("load errors name the location") {
  testing::TempDir dir("load_errors");
  testing::write_file(dir.path() / "nolabel.csv", "la,ld,nf,loc\n1,2,3,4\n");
  CHECK_ERRC(load_project_table(dir.path() / "nolabel.csv", small_schema()), Errc::MissingColumn);

  testing::write_file(dir.path() / "junk.csv", "la,ld,nf,buggy,loc\n1,2,3,0,4\n1,abc,3,0,4\n");
  try {
    load_project_table(dir.path() / "junk.csv", small_schema());
    FAIL("expected NonNumericCell");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonNumericCell);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    CHECK(std::string(e.what()).find("'ld'") != std::string::npos);
  }

  testing::write_file(dir.path() / "nan.csv", "la,ld,nf,buggy,loc\n1,nan,3,0,4\n");
  CHECK_ERRC(load_project_table(dir.path() / "nan.csv", small_schema()), Errc::NonNumericCell);

  testing::write_file(dir.path() / "empty.csv", "");
  CHECK_ERRC(load_project_table(dir.path() / "empty.csv", small_schema()), Errc::EmptyFile);
  testing::write_file(dir.path() / "header_only.csv", "la,ld,nf,buggy,loc\n");
  CHECK_ERRC(load_project_table(dir.path() / "header_only.csv", small_schema()), Errc::EmptyFile);

  testing::write_file(dir.path() / "label.csv", "la,ld,nf,buggy,loc\n1,2,3,2,4\n");
  CHECK_ERRC(load_project_table(dir.path() / "label.csv", small_schema()), Errc::InvalidLabel);
  testing::write_file(dir.path() / "effort.csv", "la,ld,nf,buggy,loc\n1,2,3,1,-4\n");
  CHECK_ERRC(load_project_table(dir.path() / "effort.csv", small_schema()), Errc::InvalidEffort);
  CHECK_ERRC(load_project_table(dir.path() / "missing.csv", small_schema()), Errc::Io);
}

TEST_CASE("summarize: medians") {
  CHECK(summarize(make_table("one", {{4, 5, 6}}, {1})).values == std::vector<double>{4, 5, 6});
  CHECK(summarize(make_table("odd", {{1}, {3}, {2}}, {0, 1, 0})).values[0] == 2.0);
  CHECK(summarize(make_table("even", {{4}, {1}, {3}, {2}}, {0, 1, 0, 1})).values[0] == 2.5);
  CHECK_ERRC(summarize(ProjectTable{}), Errc::EmptyTable);

  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<std::vector<double>> rows;
    std::vector<double> labels;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back({rng.normal(), std::floor(rng.uniform(0, 5))});
      labels.push_back(static_cast<double>(rng.index(2)));
    }
    const ProjectTable t = make_table("r", rows, labels);
    const SummaryVector s = summarize(t);
    for (std::size_t c = 0; c < 2; ++c) CHECK(s.values[c] == sort_and_average_median(t.rows.column(c)));

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    CHECK(summarize(t.select(perm)).values == s.values);
  }
}

TEST_CASE("split_projects") {
  const Split s = split_projects(100, 3);
  CHECK(s.train.size() == 90);
  CHECK(s.test.size() == 10);
  check_partition(s, 100);

  const Split again = split_projects(100, 3);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK(split_projects(100, 4).test != s.test);

  const Split big = split_projects(756, 1);
  CHECK(big.train.size() == 680);
  CHECK(big.test.size() == 76);
  check_partition(big, 756);

  // round-half-up: 15 -> 1.5 -> 2, 14 -> 1.4 -> 1
  CHECK(split_projects(15, 0).test.size() == 2);
  CHECK(split_projects(14, 0).test.size() == 1);
  CHECK(split_projects(10, 0).test.size() == 1);
  CHECK_ERRC(split_projects(9, 0), Errc::TooFewProjects);
}

TEST_CASE("split_rows") {
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  for (int i = 0; i < 300; ++i) {
    rows.push_back({static_cast<double>(i)});
    labels.push_back(i % 3 == 0 ? 1.0 : 0.0);
  }
  const ProjectTable t = make_table("t", rows, labels);
  const Split s = split_rows(t, 5);
  CHECK(s.train.size() == 200);
  CHECK(s.test.size() == 100);
  check_partition(s, 300);
  CHECK(split_rows(t, 5).train == s.train);

  // 30 rows, 10 defective: the train half holds round(10 * 20 / 30) = 7 defects.
  std::vector<std::vector<double>> r30(rows.begin(), rows.begin() + 30);
  std::vector<double> l30(30, 0.0);
  for (int i = 0; i < 10; ++i) l30[i * 3] = 1.0;
  const ProjectTable small = make_table("s", r30, l30);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Split ss = split_rows(small, seed);
    CHECK(ss.train.size() == 20);
    const auto defects = std::count_if(ss.train.begin(), ss.train.end(), [&](auto i) { return l30[i] == 1.0; });
    CHECK(defects >= 6);
    CHECK(defects <= 7);
    check_partition(ss, 30);
  }

  const ProjectTable two = make_table("two", {{1}, {2}}, {0, 1});
  CHECK_ERRC(split_rows(two, 0), Errc::TooFewRows);

  const Split chrono = split_rows_chronological(t);
  CHECK(chrono.train.front() == 0);
  CHECK(chrono.train.back() == 199);
  CHECK(chrono.test.front() == 200);
}

TEST_CASE("split_rows keeps both classes on both sides when possible") {
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  for (int i = 0; i < 40; ++i) {
    rows.push_back({static_cast<double>(i)});
    labels.push_back(i < 3 ? 1.0 : 0.0);
  }
  const ProjectTable t = make_table("rare", rows, labels);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TableSplit parts = apply_split(t, split_rows(t, seed));
    CHECK(std::count(parts.train.labels.begin(), parts.train.labels.end(), 1.0) >= 1);
    CHECK(std::count(parts.test.labels.begin(), parts.test.labels.end(), 1.0) >= 1);
  }
}

TEST_CASE("sanity checks") {
  ProjectMeta ok;
  ok.pull_requests = 1;
  ok.commits = 21;
  ok.duration_weeks = 50;
  ok.issues = 11;
  ok.contributors = 10;
  ok.defective_commits = 10;
  CHECK(sanity_check(ok).passed);
  CHECK(sanity_check(ok).failed_rules.empty());

  ProjectMeta m = ok;
  m.issues = 5;
  auto r = sanity_check(m);
  CHECK_FALSE(r.passed);
  CHECK(r.failed_rules == std::vector<std::string>{"Issues"});

  m = ok;
  m.is_fork = true;
  CHECK(sanity_check(m).failed_rules == std::vector<std::string>{"Forked Project"});

  struct Case {
    void (*mutate)(ProjectMeta&);
    const char* rule;
  };
  const Case cases[] = {
      {[](ProjectMeta& x) { x.pull_requests = 0; }, "Collaboration"},
      {[](ProjectMeta& x) { x.commits = 20; }, "Commits"},
      {[](ProjectMeta& x) { x.duration_weeks = 49; }, "Duration"},
      {[](ProjectMeta& x) { x.issues = 10; }, "Issues"},
      {[](ProjectMeta& x) { x.contributors = 9; }, "Personal"},
      {[](ProjectMeta& x) { x.is_software = false; }, "Software Development"},
      {[](ProjectMeta& x) { x.defective_commits = 9; }, "Defective Commits"},
      {[](ProjectMeta& x) { x.is_fork = true; }, "Forked Project"},
  };
  ProjectMeta all_bad = ok;
  for (const auto& c : cases) {
    ProjectMeta x = ok;
    c.mutate(x);
    const auto res = sanity_check(x);
    CHECK_FALSE(res.passed);
    CHECK(res.failed_rules == std::vector<std::string>{c.rule});
    c.mutate(all_bad);
  }
  CHECK(sanity_check(all_bad).failed_rules.size() == 8);
}

TEST_CASE("meta round trip") {
  testing::TempDir dir("meta");
  std::vector<ProjectMeta> meta(2);
  meta[0].project_id = "a";
  meta[0].commits = 99;
  meta[1].project_id = "b";
  meta[1].is_fork = true;
  meta[1].is_software = false;
  write_meta(dir.path() / "meta.csv", meta);
  const auto back = load_meta(dir.path() / "meta.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].commits == 99);
  CHECK(back[1].is_fork);
  CHECK_FALSE(back[1].is_software);

  testing::write_file(dir.path() / "bad.csv", "project_id,commits\na,1\n");
  CHECK_ERRC(load_meta(dir.path() / "bad.csv"), Errc::MissingColumn);
}

TEST_CASE("health instances") {
  const std::size_t width = health_metric_names().size();
  HealthSeries s;
  s.project_id = "h";
  s.months = Matrix(20, width);
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t f = 0; f < width; ++f) s.months(t, f) = static_cast<double>(100 * f + t);

  const ProjectTable inst = build_health_instances(s, "MC");
  CHECK(inst.size() == 14);
  CHECK(inst.schema.task == Task::regression);
  const std::size_t mc = *inst.schema.feature_index("MC");
  const std::size_t ms = *health_schema().feature_index("MS");
  // Lag consistency: row t pairs month t features with month t+6 target.
  for (std::size_t t = 0; t < inst.size(); ++t) {
    CHECK(inst.rows(t, mc) == s.months(t, mc));
    CHECK(inst.labels[t] == s.months(t + 6, mc));
    CHECK(inst.row_ids[t] == t);
  }
  const ProjectTable ms_inst = build_health_instances(s, "MS", 3);
  CHECK(ms_inst.size() == 17);
  CHECK(ms_inst.labels[0] == s.months(3, ms));

  HealthSeries flat = s;
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t f = 0; f < width; ++f) flat.months(t, f) = 5.0;
  for (double y : build_health_instances(flat, "MC").labels) CHECK(y == 5.0);

  HealthSeries short_series = s;
  short_series.months = Matrix(6, width, 1.0);
  CHECK_ERRC(build_health_instances(short_series, "MC"), Errc::SeriesTooShort);
  CHECK_ERRC(build_health_instances(s, "MF"), Errc::UnknownGoal);
  CHECK_ERRC(build_health_instances(s, "nonsense"), Errc::UnknownGoal);
}

TEST_CASE("health series file round trip") {
  testing::TempDir dir("health_io");
  HealthSeries s;
  s.project_id = "h";
  s.months = Matrix(9, health_metric_names().size(), 2.5);
  s.months(4, 3) = 7.0;
  write_health_series(dir.path() / "h.csv", s);
  const HealthSeries back = load_health_series(dir.path() / "h.csv");
  CHECK(back.months.data() == s.months.data());
}

TEST_CASE("corpus listing and schema json") {
  testing::TempDir dir("corpus_list");
  testing::write_file(dir.path() / "b.csv", "x\n");
  testing::write_file(dir.path() / "a.csv", "x\n");
  testing::write_file(dir.path() / "meta.csv", "x\n");
  testing::write_file(dir.path() / "notes.txt", "x\n");
  const auto files = list_corpus(dir.path());
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "a.csv");

  save_schema_json(dir.path() / "schema.json", small_schema());
  const FeatureSchema back = load_schema_json(dir.path() / "schema.json");
  CHECK(back.feature_names == small_schema().feature_names);
  CHECK(back.effort_name == small_schema().effort_name);
}

TEST_CASE("concat keeps rows and ids") {
  const ProjectTable a = make_table("a", {{1}, {2}}, {0, 1}, {5, 6});
  const ProjectTable b = make_table("b", {{3}}, {1}, {7});
  const ProjectTable* both[] = {&a, &b};
  const ProjectTable c = concat_tables(both, "ab");
  CHECK(c.size() == 3);
  CHECK(c.rows(2, 0) == 3.0);
  CHECK(c.effort == std::vector<double>{5, 6, 7});
  CHECK(c.row_ids == std::vector<std::size_t>{0, 1, 0});
}

}  // TEST_SUITE
