#include "general/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "general/csv.hpp"
#include "general/rig.hpp"
#include "general/synth.hpp"

namespace general {

namespace fs = std::filesystem;

namespace {

struct CorpusArgs {
  std::string corpus;
  std::string task = "defect";
  std::string goal;
  std::size_t horizon = 6;

  void add(CLI::App* app) {
    app->add_option("--corpus", corpus, "Corpus directory (one CSV per project)")->required();
    app->add_option("--task", task, "defect or health")->check(CLI::IsMember({"defect", "health"}));
    app->add_option("--goal", goal, "Health metric to predict (health only)");
    app->add_option("--horizon", horizon, "Months ahead (health only)");
  }

  RigConfig config() const {
    RigConfig c;
    c.corpus = corpus;
    c.task = task == "health" ? RigTask::health : RigTask::defect;
    c.goal = goal;
    c.horizon = horizon;
    return c;
  }
};

struct TreeArgs {
  std::size_t branching = 20;
  double threshold = 0.5;

  void add(CLI::App* app) {
    app->add_option("--branching", branching, "CF-tree branching factor")->check(CLI::Range(2, 100000));
    app->add_option("--threshold", threshold, "Leaf entry radius threshold")->check(CLI::PositiveNumber);
  }
};

std::vector<SummaryVector> summaries_of(const std::vector<ProjectTable>& projects) {
  std::vector<SummaryVector> out;
  for (const auto& p : projects) out.push_back(summarize(p));
  return out;
}

ProjectIndex index_of(const std::vector<ProjectTable>& projects) {
  ProjectIndex index;
  for (const auto& p : projects) index[p.project_id] = &p;
  return index;
}

void print_map(std::ostream& out, const BellwetherMap& map) {
  for (std::size_t level = 0; level < map.levels.size(); ++level)
    for (const auto& [key, id] : map.levels[level]) out << "level " << level << "  " << key << "  " << id << '\n';
}

int cmd_check(const CorpusArgs& args, std::ostream& out) {
  RigConfig c = args.config();
  c.validate();
  int failed = 0;
  const fs::path meta = c.corpus / "meta.csv";
  if (fs::exists(meta)) {
    for (const auto& m : load_meta(meta)) {
      const SanityResult r = sanity_check(m);
      out << m.project_id << (r.passed ? "  pass" : "  FAIL");
      for (const auto& rule : r.failed_rules) out << "  " << rule;
      out << '\n';
      failed += !r.passed;
    }
  } else {
    out << "no meta.csv; sanity checks skipped\n";
  }
  std::vector<std::string> excluded;
  const auto projects = load_rig_corpus(c, &excluded);
  out << projects.size() << " projects load cleanly, " << excluded.size() << " excluded by sanity checks\n";
  return 0;
}

int cmd_summarize(const CorpusArgs& args, std::ostream& out) {
  const auto projects = load_rig_corpus(args.config());
  if (projects.empty()) throw Error(Errc::EmptyInput, "corpus has no projects");
  out << "project_id";
  for (const auto& name : projects.front().schema.feature_names) out << ',' << name;
  out << '\n';
  for (const auto& s : summaries_of(projects)) {
    out << s.project_id;
    for (double v : s.values) out << ',' << csv::format_number(v);
    out << '\n';
  }
  return 0;
}

int cmd_cluster(const CorpusArgs& args, const TreeArgs& tree_args, const std::string& save, std::ostream& out) {
  const auto projects = load_rig_corpus(args.config());
  const ClusterTree tree = build_tree(summaries_of(projects), tree_args.branching, tree_args.threshold);
  out << "projects " << tree.size() << ", depth " << tree.depth() << ", leaf clusters " << leaf_sizes(tree).size()
      << '\n';
  for (std::size_t level = 0; level <= tree.depth(); ++level)
    for (const auto& c : clusters_at_level(tree, level)) {
      out << "level " << level << "  " << path_key(c.path) << "  (" << c.members.size() << ")";
      for (const auto& id : c.members) out << ' ' << id;
      out << '\n';
    }
  if (!save.empty()) {
    std::ofstream f(save);
    if (!f) throw Error(Errc::Io, "cannot write " + save);
    f << tree.to_json().dump(1) << '\n';
  }
  return 0;
}

int cmd_bellwether(const CorpusArgs& args, const TreeArgs& tree_args, std::uint64_t seed, bool flat,
                   std::optional<std::size_t> n_trees, const std::string& bundle_dir, std::ostream& out) {
  RigConfig c = args.config();
  c.seed = seed;
  c.n_trees = n_trees;
  const auto projects = load_rig_corpus(c);
  if (projects.empty()) throw Error(Errc::EmptyInput, "corpus has no projects");
  const Pipeline pipeline = c.pipeline();
  ModelBank bank(pipeline, seed);

  if (flat) {
    std::vector<const ProjectTable*> all;
    for (const auto& p : projects) all.push_back(&p);
    const TournamentResult t = tournament(all, bank);
    out << "bellwether0 " << t.winner << '\n' << "comparisons " << t.comparisons_made << '\n';
    for (const auto& [id, reason] : t.disqualified) out << "disqualified " << id << ": " << reason << '\n';
    return 0;
  }

  const ClusterTree tree = build_tree(summaries_of(projects), tree_args.branching, tree_args.threshold);
  const GeneralResult g = general(tree, index_of(projects), bank);
  print_map(out, g.map);
  out << "comparisons " << g.comparisons << " (bellwether0 would need " << projects.size() * (projects.size() - 1)
      << ")\n";
  if (!bundle_dir.empty()) {
    Bundle b;
    b.tree = tree;
    b.map = g.map;
    b.schema = projects.front().schema;
    b.pipeline = pipeline;
    b.seed = seed;
    b.goal = c.goal;
    b.horizon = c.horizon;
    nlohmann::json hashed = c.to_json();
    hashed.erase("out");
    b.config_hash = config_hash(hashed);
    for (const auto& level : g.map.levels)
      for (const auto& [key, id] : level)
        if (const auto* e = bank.find(id)) b.models[id] = e->model;
    save_bundle(bundle_dir, b);
    out << "bundle written to " << bundle_dir << '\n';
  }
  return 0;
}

int cmd_rank(const std::string& results, std::uint64_t seed, const std::string& format, std::ostream& out) {
  const auto rows = read_results_csv(results);
  const auto sections = rank_results(rows, seed);
  if (format == "csv") write_rank_csv(out, sections);
  else write_rank_text(out, sections);
  return 0;
}

ProjectTable load_for_bundle(const Bundle& b, const fs::path& path) {
  ProjectTable t;
  if (b.schema.task == Task::regression && !b.goal.empty()) {
    HealthSeries s = load_health_series(path);
    s.project_id = path.stem().string();
    t = build_health_instances(s, b.goal, b.horizon);
  } else {
    t = load_project_table(path, b.schema);
    t.project_id = path.stem().string();
  }
  return t;
}

int cmd_report(const std::string& bundle_dir, const std::string& corpus, std::ostream& out) {
  const Bundle b = load_bundle(bundle_dir);
  const auto root = b.lookup()(b.map.root());
  if (!root) throw Error(Errc::UnfittedModel, "bundle has no root model");
  std::vector<ForestModel> selfs;
  for (const auto& path : list_corpus(corpus)) {
    const ProjectTable t = load_for_bundle(b, path);
    try {
      selfs.push_back(train_pipeline(t, b.pipeline, derive_seed(b.seed, t.project_id)));
    } catch (const Error& e) {
      out << "skipped " << t.project_id << ": " << e.what() << '\n';
    }
  }
  std::vector<const ForestModel*> ptrs;
  for (const auto& m : selfs) ptrs.push_back(&m);
  const auto rows = importance_report(*root, ptrs);
  out << "bellwether " << b.map.root() << " vs " << ptrs.size() << " self models\n";
  char cell[64];
  for (const auto& r : rows) {
    std::snprintf(cell, sizeof cell, "%.2f/%.2f", r.x, r.y);
    out << r.feature << "  " << cell << (r.globally_important ? "  *" : "") << '\n';
  }
  return 0;
}

int cmd_predict(const std::string& bundle_dir, const std::string& project, std::optional<std::size_t> level,
                std::ostream& out) {
  const Bundle b = load_bundle(bundle_dir);
  const ProjectTable t = load_for_bundle(b, project);
  const std::size_t l = level.value_or(b.map.depth());
  const IndexResult r = apply_index(b.tree, b.map, l, t, b.lookup());
  out << "cluster_path " << path_key(r.path) << '\n';
  out << "level " << l << "  cluster " << r.cluster_key << '\n';
  out << "bellwether " << r.bellwether << '\n';
  out << "row,prediction\n";
  for (std::size_t i = 0; i < r.predictions.size(); ++i) out << i << ',' << csv::format_number(r.predictions[i]) << '\n';
  return 0;
}

int cmd_synth(const std::string& kind, const std::string& dir, std::uint64_t seed, std::size_t groups,
              std::size_t size, std::size_t rows, std::size_t months, std::ostream& out) {
  if (kind == "health") {
    synth::HealthCorpusSpec spec;
    spec.groups = groups;
    spec.projects_per_group = size;
    spec.months = months;
    spec.seed = seed;
    const auto corpus = synth::health_corpus(spec);
    synth::write_health_corpus(dir, corpus);
    out << corpus.series.size() << " health projects written to " << dir << '\n';
    return 0;
  }
  synth::DefectCorpusSpec spec;
  spec.groups = groups;
  spec.projects_per_group = size;
  spec.rows = rows;
  spec.seed = seed;
  spec.plant = kind == "planted";
  spec.single_distribution = kind == "single";
  const auto corpus = synth::defect_corpus(spec);
  synth::write_corpus(dir, corpus);
  out << corpus.projects.size() << " defect projects written to " << dir << '\n';
  for (const auto& id : corpus.planted)
    if (!id.empty()) out << "planted " << id << '\n';
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical bellwether transfer learning"};
  app.name("general_cli");
  app.require_subcommand(1);

  CorpusArgs corpus_args;
  TreeArgs tree_args;
  std::uint64_t seed = 0;
  std::optional<std::size_t> n_trees;

  auto* check = app.add_subcommand("check", "Validate a corpus and run the sanity checks on meta.csv");
  corpus_args.add(check);

  auto* summarize_cmd = app.add_subcommand("summarize", "Print per-project median feature vectors");
  corpus_args.add(summarize_cmd);

  std::string tree_out;
  auto* cluster = app.add_subcommand("cluster", "Build the CF-tree and list clusters per level");
  corpus_args.add(cluster);
  tree_args.add(cluster);
  cluster->add_option("--out", tree_out, "Write the tree as JSON");

  bool flat = false;
  std::string bundle_out;
  auto* bellwether = app.add_subcommand("bellwether", "Find bellwethers per cluster and level");
  corpus_args.add(bellwether);
  tree_args.add(bellwether);
  bellwether->add_option("--seed", seed, "Random seed");
  bellwether->add_flag("--flat", flat, "Single tournament over every project");
  bellwether->add_option("--trees", n_trees, "Forest size");
  bellwether->add_option("--out", bundle_out, "Write a bundle directory");

  std::string config_path, rig_task, rig_goal, rig_corpus, rig_out;
  std::size_t rig_repeats = 0;
  std::vector<std::size_t> rig_levels;
  auto* rig = app.add_subcommand("rig", "Run the experiment with every treatment");
  rig->add_option("--config", config_path, "JSON config file");
  auto* o_corpus = rig->add_option("--corpus", rig_corpus, "Corpus directory");
  auto* o_task = rig->add_option("--task", rig_task, "defect or health")->check(CLI::IsMember({"defect", "health"}));
  auto* o_goal = rig->add_option("--goal", rig_goal, "Health metric to predict");
  auto* o_repeats = rig->add_option("--repeats", rig_repeats, "Repeats")->check(CLI::PositiveNumber);
  auto* o_seed = rig->add_option("--seed", seed, "Random seed");
  auto* o_levels = rig->add_option("--levels", rig_levels, "Levels to evaluate")->delimiter(',');
  auto* o_out = rig->add_option("--out", rig_out, "Output directory");
  auto* o_trees = rig->add_option("--trees", n_trees, "Forest size");

  std::string results_path, rank_format = "text";
  auto* rank = app.add_subcommand("rank", "Scott-Knott ranks from a results.csv");
  rank->add_option("--results", results_path, "results.csv from the rig")->required();
  rank->add_option("--seed", seed, "Random seed");
  rank->add_option("--format", rank_format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

  std::string bundle_dir, report_corpus;
  auto* report = app.add_subcommand("report", "x/y feature importance of the root bellwether");
  report->add_option("--bundle", bundle_dir, "Bundle directory")->required();
  report->add_option("--corpus", report_corpus, "Projects whose self models give y")->required();

  std::string project_path;
  std::optional<std::size_t> level;
  auto* predict = app.add_subcommand("predict", "Route a new project through a bundle and predict");
  predict->add_option("--bundle", bundle_dir, "Bundle directory")->required();
  predict->add_option("--project", project_path, "Project CSV")->required();
  predict->add_option("--level", level, "Tree level (default: leaves)");

  std::string synth_kind = "defect", synth_out;
  std::size_t groups = 3, size = 5, rows = 200, months = 48;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus");
  synth_cmd->add_option("--kind", synth_kind, "defect, planted, single, or health")
      ->check(CLI::IsMember({"defect", "planted", "single", "health"}));
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", seed, "Random seed");
  synth_cmd->add_option("--groups", groups, "Groups")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--size", size, "Projects per group")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--rows", rows, "Rows per defect project")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--months", months, "Months per health project")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 1;
  }

  try {
    if (check->parsed()) return cmd_check(corpus_args, out);
    if (summarize_cmd->parsed()) return cmd_summarize(corpus_args, out);
    if (cluster->parsed()) return cmd_cluster(corpus_args, tree_args, tree_out, out);
    if (bellwether->parsed()) return cmd_bellwether(corpus_args, tree_args, seed, flat, n_trees, bundle_out, out);
    if (rig->parsed()) {
      RigConfig c = config_path.empty() ? RigConfig{} : RigConfig::load(config_path);
      if (o_corpus->count()) c.corpus = rig_corpus;
      if (o_task->count()) c.task = rig_task == "health" ? RigTask::health : RigTask::defect;
      if (o_goal->count()) c.goal = rig_goal;
      if (o_repeats->count()) c.repeats = rig_repeats;
      if (o_seed->count()) c.seed = seed;
      if (o_levels->count()) c.levels = rig_levels;
      if (o_out->count()) c.out = rig_out;
      if (o_trees->count()) c.n_trees = n_trees;
      const RigReport r = run_rig(c);
      out << r.projects.size() << " projects, " << r.excluded.size() << " excluded, " << c.repeats << " repeats, "
          << r.results.size() << " result cells, " << r.leakage_checks << " leakage checks passed\n";
      write_rank_text(out, r.ranks);
      out << "outputs in " << c.out.string() << '\n';
      return 0;
    }
    if (rank->parsed()) return cmd_rank(results_path, seed, rank_format, out);
    if (report->parsed()) return cmd_report(bundle_dir, report_corpus, out);
    if (predict->parsed()) return cmd_predict(bundle_dir, project_path, level, out);
    if (synth_cmd->parsed()) return cmd_synth(synth_kind, synth_out, seed, groups, size, rows, months, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int cli_main(int argc, char** argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace general
