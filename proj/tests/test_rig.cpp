#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "general/cli.hpp"
#include "general/rig.hpp"
#include "general/synth.hpp"
#include "helpers.hpp"

using namespace general;
using testing::TempDir;

namespace {

synth::Corpus small_corpus(bool single, std::uint64_t seed, std::size_t groups = 4, std::size_t size = 5) {
  synth::DefectCorpusSpec spec;
  spec.groups = groups;
  spec.projects_per_group = size;
  spec.rows = 100;
  spec.single_distribution = single;
  spec.seed = seed;
  return synth::defect_corpus(spec);
}

RigConfig small_config(std::uint64_t seed) {
  RigConfig c;
  c.repeats = 2;
  c.seed = seed;
  c.n_trees = 10;
  return c;
}

struct Cli {
  int code = 0;
  std::string out, err;
};

Cli run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "general_cli");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  Cli r;
  r.code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace

TEST_SUITE("rig") {

TEST_CASE("config json round trip and validation") {
  RigConfig c;
  c.corpus = "data/defects";
  c.repeats = 3;
  c.seed = 42;
  c.levels = {0, 2};
  c.de_enabled = true;
  c.n_trees = 30;
  c.out = "out";
  const RigConfig back = RigConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  CHECK(back.to_json() == c.to_json());
  CHECK(back.levels == c.levels);
  CHECK(back.de_enabled == std::optional<bool>(true));

  CHECK_ERRC(RigConfig::from_json(nlohmann::json{{"repeat", 3}}), Errc::InvalidConfig);
  CHECK_ERRC(RigConfig::from_json(nlohmann::json{{"task", "weather"}}), Errc::InvalidConfig);

  RigConfig bad;
  bad.repeats = 0;
  CHECK_ERRC(bad.validate(), Errc::InvalidConfig);
  RigConfig health;
  health.task = RigTask::health;
  health.goal = "MF";
  CHECK_ERRC(health.validate(), Errc::InvalidConfig);
  health.goal = "MC";
  health.validate();
  RigConfig stray;
  stray.goal = "MC";
  CHECK_ERRC(stray.validate(), Errc::InvalidConfig);

  CHECK(small_config(1).pipeline().forest.n_trees == 10);
  CHECK(RigConfig{}.pipeline().de_enabled == false);
}

TEST_CASE("report units") {
  CHECK(report_units("recall", 0.84) == doctest::Approx(84.0));
  CHECK(report_units("ifa", 3.0) == 3.0);
  CHECK(report_units("mre", 0.25) == doctest::Approx(25.0));
  const auto crit = criteria_for(Task::classification);
  REQUIRE(crit.size() == 5);
  CHECK(crit[1] == std::make_pair(std::string("false_alarm"), true));
  CHECK(criteria_for(Task::regression).front().first == "mre");
}

TEST_CASE("rig fills every cell and collapses general0 onto bellwether0 on a depth-one tree") {
  const synth::Corpus corpus = small_corpus(true, 3);
  const RigConfig config = small_config(5);
  const RigReport report = run_rig(config, corpus.projects);
  CHECK(report.tree_depth == 1);
  CHECK(report.projects.size() == 20);

  // 20 projects: 2 held out per repeat, 6 treatments, 5 criteria.
  CHECK(report.results.size() == 2 * 2 * 6 * 5);
  std::map<std::tuple<std::size_t, std::string, std::string>, double> cells;
  for (const auto& r : report.results) {
    CHECK_MESSAGE(!r.failed(), r.failure);
    cells[{r.repeat, r.project + "/" + r.criterion, r.treatment}] = r.value;
  }
  for (const auto& [key, value] : cells) {
    const auto& [repeat, cell, treatment] = key;
    if (treatment != "general0") continue;
    CHECK(value == cells.at({repeat, cell, "bellwether0"}));
    CHECK(value == cells.at({repeat, cell, "general1"}));
  }
  for (const auto& b : report.budget)
    if (b.treatment == "general") CHECK(b.comparisons == b.predicted);

  REQUIRE(report.ranks.size() == 5);
  for (const auto& section : report.ranks) {
    std::set<std::string> names;
    for (const auto& row : section.rows) names.insert(row.name);
    CHECK(names.count("general0") == 1);
    CHECK(names.count("self") == 1);
  }
  CHECK(report.leakage_checks > 0);
  CHECK(report.importance.size() == corpus.projects.front().schema.feature_count());
}

TEST_CASE("rig runs are byte-identical for a seed") {
  TempDir dir("rig_det");
  synth::write_corpus(dir.path() / "corpus", small_corpus(false, 8, 3, 4));
  RigConfig config = small_config(11);
  config.corpus = dir.path() / "corpus";
  config.out = dir.path() / "a";
  run_rig(config);
  config.out = dir.path() / "b";
  run_rig(config);
  const std::string a = testing::read_file(dir.path() / "a" / "results.csv");
  CHECK(!a.empty());
  CHECK(a == testing::read_file(dir.path() / "b" / "results.csv"));
  CHECK(testing::read_file(dir.path() / "a" / "budget.csv") == testing::read_file(dir.path() / "b" / "budget.csv"));
  for (const char* f : {"ranks.csv", "ranks.txt", "timing.csv", "importance.csv", "bundle/manifest.json"})
    CHECK_MESSAGE(std::filesystem::exists(dir.path() / "a" / f), f);

  const auto rows = read_results_csv(dir.path() / "a" / "results.csv");
  std::ostringstream again;
  write_results_csv(again, rows);
  CHECK(again.str() == a);

  config.seed = 12;
  config.out = dir.path() / "c";
  run_rig(config);
  CHECK(testing::read_file(dir.path() / "c" / "results.csv") != a);
}

TEST_CASE("health rig") {
  TempDir dir("rig_health");
  synth::HealthCorpusSpec spec;
  spec.groups = 2;
  spec.projects_per_group = 5;
  spec.months = 36;
  synth::write_health_corpus(dir.path() / "corpus", synth::health_corpus(spec));
  RigConfig config;
  config.task = RigTask::health;
  config.goal = "MC";
  config.repeats = 1;
  config.corpus = dir.path() / "corpus";
  const RigReport report = run_rig(config, load_rig_corpus(config));
  CHECK(report.results.size() == 1 * 6 * 1);
  for (const auto& r : report.results) {
    CHECK(r.criterion == "mre");
    CHECK_MESSAGE(!r.failed(), r.failure);
    CHECK(r.value >= 0.0);
  }
}

TEST_CASE("importance report") {
  synth::DefectCorpusSpec spec;
  spec.groups = 1;
  spec.projects_per_group = 3;
  spec.rows = 100;
  const synth::Corpus corpus = synth::defect_corpus(spec);
  Pipeline p = Pipeline::defaults(Task::classification);
  p.forest.n_trees = 10;
  const ForestModel a = train_pipeline(corpus.projects[0], p, 1);
  const ForestModel b = train_pipeline(corpus.projects[1], p, 2);
  const std::vector<const ForestModel*> selfs{&a, &b};
  const auto rows = importance_report(a, selfs);
  REQUIRE(rows.size() == a.schema_width);
  const auto imp = feature_importance(a);
  double mean = 0, nonzero = 0;
  for (double v : imp)
    if (v > 0) {
      mean += v;
      ++nonzero;
    }
  mean /= nonzero;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].x == imp[i]);
    CHECK(rows[i].globally_important == (imp[i] > mean));
  }
}

TEST_CASE("bundle round trip") {
  TempDir dir("bundle");
  const synth::Corpus corpus = small_corpus(false, 2, 4, 3);
  const RigReport report = run_rig(small_config(4), corpus.projects);
  save_bundle(dir.path() / "b", report.bundle);
  const Bundle back = load_bundle(dir.path() / "b");
  CHECK(back.map.levels == report.bundle.map.levels);
  CHECK(back.config_hash == report.bundle.config_hash);
  CHECK(back.tree.to_json() == report.bundle.tree.to_json());
  const auto& p = corpus.projects.front();
  CHECK(back.lookup()(back.map.root())->predict_all(p) == report.bundle.models.at(back.map.root())->predict_all(p));

  testing::write_file(dir.path() / "b" / "manifest.json", "{\"format_version\": 99}");
  CHECK_ERRC(load_bundle(dir.path() / "b"), Errc::BadFormat);
  CHECK_ERRC(load_bundle(dir.path() / "missing"), Errc::Io);
}

TEST_CASE("cli") {
  TempDir dir("cli");
  const std::string corpus = (dir.path() / "corpus").string();

  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"check"}).code == 1);

  const Cli synth = run_cli({"synth", "--kind", "planted", "--out", corpus, "--groups", "4", "--size", "3", "--rows",
                             "100", "--seed", "1"});
  REQUIRE(synth.code == 0);
  CHECK(synth.out.find("planted") != std::string::npos);

  const Cli check = run_cli({"check", "--corpus", corpus});
  CHECK(check.code == 0);
  CHECK(check.out.find("12 projects load cleanly") != std::string::npos);

  const Cli summary = run_cli({"summarize", "--corpus", corpus});
  CHECK(summary.code == 0);
  CHECK(summary.out.rfind("project_id,", 0) == 0);

  const std::string tree_json = (dir.path() / "tree.json").string();
  CHECK(run_cli({"cluster", "--corpus", corpus, "--out", tree_json}).code == 0);
  CHECK(std::filesystem::exists(tree_json));
  CHECK(run_cli({"cluster", "--corpus", corpus, "--threshold", "-1"}).code == 1);

  const std::string bundle = (dir.path() / "bundle").string();
  const Cli bw = run_cli({"bellwether", "--corpus", corpus, "--trees", "10", "--out", bundle});
  REQUIRE(bw.code == 0);
  CHECK(bw.out.find("level 0") != std::string::npos);
  CHECK(run_cli({"bellwether", "--corpus", corpus, "--trees", "10", "--flat"}).out.find("comparisons 132") !=
        std::string::npos);

  const auto projects = list_corpus(corpus);
  const Cli predict = run_cli({"predict", "--bundle", bundle, "--project", projects.front().string()});
  CHECK(predict.code == 0);
  CHECK(predict.out.find("row,prediction") != std::string::npos);
  CHECK(run_cli({"predict", "--bundle", bundle, "--project", projects.front().string(), "--level", "9"}).code == 1);
  CHECK(run_cli({"predict", "--bundle", (dir.path() / "nope").string(), "--project", projects.front().string()})
            .code == 2);

  const Cli report = run_cli({"report", "--bundle", bundle, "--corpus", corpus});
  CHECK(report.code == 0);
  CHECK(report.out.find("/") != std::string::npos);

  const std::string out = (dir.path() / "rig").string();
  const Cli rig = run_cli({"rig", "--corpus", corpus, "--repeats", "1", "--trees", "10", "--out", out});
  REQUIRE(rig.code == 0);
  const std::string results = (dir.path() / "rig" / "results.csv").string();
  const Cli ranks = run_cli({"rank", "--results", results, "--format", "csv"});
  CHECK(ranks.code == 0);
  CHECK(ranks.out.rfind("criterion,rank,treatment,median,iqr,better", 0) == 0);
  CHECK(ranks.out == testing::read_file(dir.path() / "rig" / "ranks.csv"));

  CHECK(run_cli({"rig", "--corpus", corpus, "--goal", "MC", "--out", out}).code == 1);
  CHECK(run_cli({"rank", "--results", (dir.path() / "none.csv").string()}).code == 2);
}

}  // TEST_SUITE
