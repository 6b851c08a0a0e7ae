#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "general/bellwether.hpp"
#include "general/synth.hpp"
#include "helpers.hpp"

using namespace general;

namespace {

// Direct transcription of the domination formula, one term at a time.
double loss_oracle(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
  const double n = static_cast<double>(x.size());
  std::vector<double> terms;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double delta = w[j] * (x[j] - y[j]) / n;
    terms.push_back(-std::exp(delta) / n);
  }
  double s = 0;
  for (double t : terms) s += t;
  return s;
}

GoalVector goals(std::vector<double> values, std::vector<double> weights) {
  GoalVector g;
  for (std::size_t i = 0; i < values.size(); ++i) g.names.push_back("g" + std::to_string(i));
  g.values = std::move(values);
  g.weights = std::move(weights);
  return g;
}

Pipeline light_pipeline() {
  Pipeline p = Pipeline::defaults(Task::classification);
  p.forest.n_trees = 10;
  return p;
}

std::vector<const ProjectTable*> pointers(const std::vector<ProjectTable>& tables) {
  std::vector<const ProjectTable*> out;
  for (const auto& t : tables) out.push_back(&t);
  return out;
}

struct Indexed {
  synth::Corpus corpus;
  ClusterTree tree;
  ProjectIndex index;
};

Indexed indexed_corpus(const synth::DefectCorpusSpec& spec) {
  Indexed x;
  x.corpus = synth::defect_corpus(spec);
  std::vector<SummaryVector> summaries;
  for (const auto& p : x.corpus.projects) summaries.push_back(summarize(p));
  x.tree = build_tree(summaries);
  for (const auto& p : x.corpus.projects) x.index[p.project_id] = &p;
  return x;
}

}  // namespace

TEST_SUITE("bellwether") {

TEST_CASE("loss on worked examples") {
  const GoalVector a = goals({0.3, 0.7}, {1, -1});
  CHECK(loss(a, a) == doctest::Approx(-1.0).epsilon(1e-15));
  const GoalVector x = goals({0}, {1}), y = goals({1}, {1});
  CHECK(loss(x, y) == doctest::Approx(-std::exp(-1.0)).epsilon(1e-15));
  CHECK(loss(y, x) == doctest::Approx(-std::exp(1.0)).epsilon(1e-15));
  CHECK(worse(x, y));
  CHECK_FALSE(worse(y, x));
  CHECK_FALSE(worse(a, a));

  GoalVector other = goals({0.1}, {1});
  other.names = {"other"};
  CHECK_ERRC(loss(x, other), Errc::GoalMismatch);
  CHECK_ERRC(worse(goals({0, 0}, {1, 1}), x), Errc::GoalMismatch);
}

TEST_CASE("loss and worse match the term-by-term oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = std::vector<std::size_t>{1, 2, 5}[rng.index(3)];
    std::vector<double> xv(n), yv(n), w(n);
    for (std::size_t j = 0; j < n; ++j) {
      xv[j] = rng.uniform();
      yv[j] = rng.uniform();
      w[j] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    const GoalVector x = goals(xv, w), y = goals(yv, w);
    const double lxy = loss_oracle(xv, yv, w), lyx = loss_oracle(yv, xv, w);
    CHECK(std::abs(loss(x, y) - lxy) <= 1e-12);
    CHECK(std::abs(loss(y, x) - lyx) <= 1e-12);
    CHECK(worse(x, y) == (lxy > lyx));
    CHECK_FALSE(worse(x, x));
  }
}

TEST_CASE("goal normalization") {
  const std::vector<GoalVector> raw{goals({2, 5}, {1, -1}), goals({4, 5}, {1, -1}), goals({3, 5}, {1, -1})};
  const auto norm = normalize_goals(raw);
  CHECK(norm[0].values == std::vector<double>{0.0, 0.0});
  CHECK(norm[1].values == std::vector<double>{1.0, 0.0});
  CHECK(norm[2].values == std::vector<double>{0.5, 0.0});
}

TEST_CASE("winner survives positive rescaling of one goal") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng.index(8);
    std::vector<std::string> ids;
    std::vector<GoalVector> agg;
    for (std::size_t i = 0; i < c; ++i) {
      ids.push_back("p" + std::to_string(i));
      agg.push_back(GoalVector::classification(rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(),
                                               static_cast<double>(rng.index(10))));
    }
    const std::string before = pick_winner(ids, agg);
    const std::size_t g = rng.index(5);
    const double scale = rng.uniform(0.01, 100.0), shift = rng.uniform(-5, 5);
    for (auto& v : agg) v.values[g] = scale * v.values[g] + shift;
    CHECK(pick_winner(ids, agg) == before);
  }
}

TEST_CASE("pick_winner breaks ties by id") {
  const std::vector<GoalVector> same(3, goals({0.5}, {1}));
  CHECK(pick_winner({"c", "a", "b"}, same) == "a");
  std::vector<std::size_t> losses;
  CHECK(pick_winner({"x", "y"}, {goals({0}, {1}), goals({1}, {1})}, &losses) == "y");
  CHECK(losses == std::vector<std::size_t>{1, 0});
  CHECK_ERRC(pick_winner({}, {}), Errc::EmptyCluster);
}

TEST_CASE("tournament bookkeeping") {
  synth::DefectCorpusSpec spec;
  spec.groups = 2;
  spec.projects_per_group = 5;
  spec.rows = 100;
  spec.seed = 5;
  const synth::Corpus corpus = synth::defect_corpus(spec);
  const auto all = pointers(corpus.projects);

  const std::vector<const ProjectTable*> one{all.front()};
  const TournamentResult solo = tournament(one, light_pipeline(), 1);
  CHECK(solo.winner == all.front()->project_id);
  CHECK(solo.comparisons_made == 0);

  const TournamentResult par = tournament(all, light_pipeline(), 1, Execution::parallel);
  CHECK(par.comparisons_made == 90);
  CHECK(std::find(par.candidates.begin(), par.candidates.end(), par.winner) != par.candidates.end());
  CHECK(par.per_candidate.size() == 10);

  const TournamentResult ser = tournament(all, light_pipeline(), 1, Execution::serial);
  CHECK(ser.winner == par.winner);
  CHECK(ser.pairwise_losses == par.pairwise_losses);
  CHECK(ser.comparisons_made == par.comparisons_made);
  for (const auto& [id, g] : par.per_candidate) CHECK(ser.per_candidate.at(id).values == g.values);

  CHECK_ERRC(tournament(std::vector<const ProjectTable*>{}, light_pipeline(), 1), Errc::EmptyCluster);
}

TEST_CASE("a source that cannot be trained is disqualified") {
  synth::DefectCorpusSpec spec;
  spec.groups = 1;
  spec.projects_per_group = 3;
  spec.rows = 100;
  synth::Corpus corpus = synth::defect_corpus(spec);
  ProjectTable broken = corpus.projects.front();
  broken.project_id = "zz_broken";
  std::fill(broken.labels.begin(), broken.labels.end(), 0.0);
  corpus.projects.push_back(broken);
  const TournamentResult r = tournament(pointers(corpus.projects), light_pipeline(), 2);
  CHECK(r.disqualified.count("zz_broken") == 1);
  CHECK(r.winner != "zz_broken");
  CHECK(r.comparisons_made == 4 * 3 - 3);  // the broken source is never evaluated
}

TEST_CASE("depth-one tree reduces to the flat bellwether") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    synth::DefectCorpusSpec spec;
    spec.groups = 2;
    spec.projects_per_group = 4;
    spec.rows = 100;
    spec.single_distribution = true;
    spec.seed = seed;
    const Indexed x = indexed_corpus(spec);
    REQUIRE(x.tree.depth() == 1);
    REQUIRE(leaf_sizes(x.tree).size() == 1);

    const GeneralResult g = general::general(x.tree, x.index, light_pipeline(), 77);
    const TournamentResult flat = tournament(pointers(x.corpus.projects), light_pipeline(), 77);
    CHECK(g.map.root() == flat.winner);
    CHECK(g.comparisons == flat.comparisons_made);
    const auto& leaf = g.tournaments[1].begin()->second;
    for (const auto& [id, v] : flat.per_candidate) CHECK(leaf.per_candidate.at(id).values == v.values);
  }
}

TEST_CASE("counted evaluations equal the budget and winners stay inside their clusters") {
  synth::DefectCorpusSpec spec;
  spec.groups = 4;
  spec.projects_per_group = 3;
  spec.rows = 100;
  spec.plant = true;
  spec.seed = 12;
  const Indexed x = indexed_corpus(spec);
  ModelBank bank(light_pipeline(), 3);
  const GeneralResult g = general::general(x.tree, x.index, bank);
  const ComparisonBudget b = comparison_budget(x.tree);
  CHECK(g.comparisons == b.total);
  CHECK(b.n == 12);
  CHECK(b.m == leaf_sizes(x.tree).size());
  CHECK(bank.trainings() == 12);
  REQUIRE(g.map.levels.size() == x.tree.depth() + 1);
  CHECK(g.map.levels[0].size() == 1);

  for (std::size_t level = 0; level <= x.tree.depth(); ++level)
    for (const auto& cluster : clusters_at_level(x.tree, level)) {
      const std::string& w = g.map.levels[level].at(path_key(cluster.path));
      CHECK(std::find(cluster.members.begin(), cluster.members.end(), w) != cluster.members.end());
    }

  // Serial and parallel runs agree.
  const GeneralResult s = general::general(x.tree, x.index, light_pipeline(), 3, Execution::serial);
  CHECK(s.map.levels == g.map.levels);
  CHECK(s.comparisons == g.comparisons);
}

TEST_CASE("comparison budget arithmetic") {
  const std::vector<std::size_t> one{100};
  CHECK(comparison_budget(100, one).total == 9900);
  const std::vector<std::size_t> ten(10, 10);
  const ComparisonBudget b = comparison_budget(100, ten);
  CHECK(b.leaf_comparisons == 900);
  CHECK(b.promotion_comparisons == 90);
  CHECK(b.total == 990);
  CHECK(b.m == 10);
  const std::vector<std::size_t> fanouts{2, 3, 2};
  const std::vector<std::size_t> leaves{4, 4, 4, 4, 4};
  CHECK(comparison_budget(20, leaves, fanouts).promotion_comparisons == 2 + 6 + 2);
  CHECK_ERRC(comparison_budget(99, ten), Errc::InconsistentSizes);
  const std::vector<std::size_t> hole{10, 0, 90};
  CHECK_ERRC(comparison_budget(100, hole), Errc::InconsistentSizes);
}

TEST_CASE("apply_index routes new projects") {
  synth::DefectCorpusSpec spec;
  spec.groups = 3;
  spec.projects_per_group = 3;
  spec.rows = 100;
  spec.seed = 4;
  const Indexed x = indexed_corpus(spec);
  ModelBank bank(light_pipeline(), 9);
  const GeneralResult g = general::general(x.tree, x.index, bank);
  const ModelLookup lookup = [&](const std::string& id) -> std::shared_ptr<const ForestModel> {
    const auto* e = bank.find(id);
    return e ? e->model : nullptr;
  };

  for (const auto& original : x.corpus.projects) {
    ProjectTable copy = original;
    copy.project_id = "new_" + original.project_id;
    const IndexResult root = apply_index(x.tree, g.map, 0, copy, lookup);
    CHECK(root.bellwether == g.map.root());
    CHECK(root.cluster_key == path_key(ClusterPath{}));
    CHECK(root.predictions.size() == copy.size());

    const std::size_t d = x.tree.depth();
    const IndexResult leaf = apply_index(x.tree, g.map, d, copy, lookup);
    CHECK(leaf.path == x.tree.member_index.at(original.project_id));
    CHECK(leaf.cluster_key == path_key(leaf.path));
    CHECK(leaf.predictions == leaf.model->predict_all(copy));
  }

  CHECK_ERRC(apply_index(x.tree, g.map, x.tree.depth() + 1, x.corpus.projects.front(), lookup),
             Errc::LevelOutOfRange);
  const ModelLookup none = [](const std::string&) { return std::shared_ptr<const ForestModel>(); };
  CHECK_ERRC(apply_index(x.tree, g.map, 0, x.corpus.projects.front(), none), Errc::UnfittedModel);
}

TEST_CASE("model bank trains each project once") {
  synth::DefectCorpusSpec spec;
  spec.groups = 1;
  spec.projects_per_group = 4;
  spec.rows = 100;
  const synth::Corpus corpus = synth::defect_corpus(spec);
  ModelBank bank(light_pipeline(), 1);
  CHECK(bank.find(corpus.projects[0].project_id) == nullptr);
  const auto& a = bank.get(corpus.projects[0]);
  const auto& b = bank.get(corpus.projects[0]);
  CHECK(a.model == b.model);
  CHECK(bank.trainings() == 1);
  CHECK(bank.seed_for("x") == derive_seed(1, "x"));
  tournament(pointers(corpus.projects), bank);
  CHECK(bank.trainings() == 4);
}

}  // TEST_SUITE
