#include "general/bellwether.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "general/kernels.hpp"

namespace general {

namespace {

void check_comparable(const GoalVector& x, const GoalVector& y) {
  if (x.size() != y.size() || x.names != y.names || x.weights != y.weights || x.size() == 0)
    throw Error(Errc::GoalMismatch, "goal vectors differ in names, weights, or length");
}

GoalVector per_goal_median(const std::vector<GoalVector>& scores) {
  GoalVector out = scores.front();
  for (std::size_t g = 0; g < out.size(); ++g) {
    std::vector<double> column;
    column.reserve(scores.size());
    for (const auto& s : scores) column.push_back(s.values[g]);
    out.values[g] = median(std::move(column));
  }
  return out;
}

struct SourceOutcome {
  bool qualified = false;
  std::string reason;
  GoalVector aggregate;
  std::size_t evaluations = 0;
};

}  // namespace

double loss(const GoalVector& x, const GoalVector& y) {
  check_comparable(x, y);
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double delta = x.weights[j] * (x.values[j] - y.values[j]) / n;
    total += -std::exp(delta) / n;
  }
  return total;
}

bool worse(const GoalVector& x, const GoalVector& y) { return loss(x, y) > loss(y, x); }

std::vector<GoalVector> normalize_goals(std::span<const GoalVector> vectors) {
  std::vector<GoalVector> out(vectors.begin(), vectors.end());
  if (out.empty()) return out;
  for (const auto& v : out) check_comparable(v, out.front());
  for (std::size_t g = 0; g < out.front().size(); ++g) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& v : out) {
      lo = std::min(lo, v.values[g]);
      hi = std::max(hi, v.values[g]);
    }
    for (auto& v : out) v.values[g] = hi > lo ? (v.values[g] - lo) / (hi - lo) : 0.0;
  }
  return out;
}

const ModelBank::Entry& ModelBank::get(const ProjectTable& table) {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(mutex_);
    auto& s = slots_[table.project_id];
    if (!s) s = std::make_shared<Slot>();
    slot = s;
  }
  std::call_once(slot->once, [&] {
    try {
      TrainingTrace trace;
      auto model = std::make_shared<const ForestModel>(
          train_pipeline(table, pipeline_, seed_for(table.project_id), &trace));
      slot->entry.model = std::move(model);
      slot->entry.trace = std::move(trace);
    } catch (const Error& e) {
      slot->entry.failure = e.what();
    }
    std::lock_guard lock(mutex_);
    ++trainings_;
  });
  return slot->entry;
}

const ModelBank::Entry* ModelBank::find(const std::string& project_id) const {
  std::lock_guard lock(mutex_);
  auto it = slots_.find(project_id);
  if (it == slots_.end()) return nullptr;
  // An unfinished slot has neither a model nor a failure yet.
  const Entry& e = it->second->entry;
  if (!e.model && e.failure.empty()) return nullptr;
  return &e;
}

std::size_t ModelBank::trainings() const {
  std::lock_guard lock(mutex_);
  return trainings_;
}

std::string pick_winner(const std::vector<std::string>& ids, const std::vector<GoalVector>& aggregated,
                        std::vector<std::size_t>* losses) {
  if (ids.empty() || ids.size() != aggregated.size())
    throw Error(Errc::EmptyCluster, "no qualified candidates to choose from");
  const std::vector<GoalVector> norm = normalize_goals(aggregated);
  std::vector<std::size_t> lost(ids.size(), 0);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size(); ++j)
      if (i != j && worse(norm[i], norm[j])) ++lost[i];
  std::size_t best = 0;
  for (std::size_t i = 1; i < ids.size(); ++i)
    if (lost[i] < lost[best] || (lost[i] == lost[best] && ids[i] < ids[best])) best = i;
  if (losses) *losses = lost;
  return ids[best];
}

TournamentResult tournament(std::span<const ProjectTable* const> candidates, ModelBank& bank, Execution exec) {
  if (candidates.empty()) throw Error(Errc::EmptyCluster, "tournament without candidates");
  TournamentResult result;
  for (const auto* c : candidates) result.candidates.push_back(c->project_id);

  if (candidates.size() == 1) {
    const auto& entry = bank.get(*candidates.front());
    if (!entry.model)
      throw Error(Errc::EmptyCluster, candidates.front()->project_id + " could not be trained: " + entry.failure);
    result.winner = candidates.front()->project_id;
    result.pairwise_losses[result.winner] = 0;
    return result;
  }

  const std::size_t c = candidates.size();
  const std::function<SourceOutcome(std::size_t)> run_source = [&](std::size_t s) {
    SourceOutcome out;
    const auto& entry = bank.get(*candidates[s]);
    if (!entry.model) {
      out.reason = "training failed: " + entry.failure;
      return out;
    }
    std::vector<GoalVector> scores;
    std::string last_error;
    for (std::size_t t = 0; t < c; ++t) {
      if (t == s) continue;
      ++out.evaluations;
      try {
        scores.push_back(score_model(*entry.model, *candidates[t]));
      } catch (const Error& e) {
        last_error = e.what();
      }
    }
    if (scores.empty()) {
      out.reason = "no target could be scored: " + last_error;
      return out;
    }
    out.aggregate = per_goal_median(scores);
    out.qualified = true;
    return out;
  };

  const std::vector<SourceOutcome> outcomes = exec == Execution::parallel
                                                  ? kernels::map_parallel<SourceOutcome>(c, run_source)
                                                  : kernels::map_serial<SourceOutcome>(c, run_source);

  std::vector<std::string> ids;
  std::vector<GoalVector> aggregates;
  for (std::size_t i = 0; i < c; ++i) {
    result.comparisons_made += outcomes[i].evaluations;
    if (!outcomes[i].qualified) {
      result.disqualified[result.candidates[i]] = outcomes[i].reason;
      continue;
    }
    ids.push_back(result.candidates[i]);
    aggregates.push_back(outcomes[i].aggregate);
    result.per_candidate[result.candidates[i]] = outcomes[i].aggregate;
  }
  if (ids.empty()) throw Error(Errc::EmptyCluster, "every candidate was disqualified");
  std::vector<std::size_t> losses;
  result.winner = pick_winner(ids, aggregates, &losses);
  for (std::size_t i = 0; i < ids.size(); ++i) result.pairwise_losses[ids[i]] = losses[i];
  return result;
}

TournamentResult tournament(std::span<const ProjectTable* const> candidates, const Pipeline& pipeline,
                            std::uint64_t seed, Execution exec) {
  ModelBank bank(pipeline, seed);
  return tournament(candidates, bank, exec);
}

const std::string& BellwetherMap::root() const {
  if (levels.empty() || levels.front().empty()) throw Error(Errc::LevelOutOfRange, "bellwether map is empty");
  return levels.front().begin()->second;
}

GeneralResult general(const ClusterTree& tree, const ProjectIndex& projects, ModelBank& bank, Execution exec) {
  if (projects.size() != tree.size())
    throw Error(Errc::InconsistentSizes, "tree holds " + std::to_string(tree.size()) + " projects, got " +
                                             std::to_string(projects.size()));
  for (const auto& id : tree.project_ids)
    if (!projects.count(id)) throw Error(Errc::InconsistentSizes, "project " + id + " is in the tree but not given");

  const std::size_t depth = tree.depth();
  GeneralResult result;
  result.map.levels.resize(depth + 1);
  result.tournaments.resize(depth + 1);

  std::vector<Cluster> below;  // clusters at level + 1
  for (std::size_t step = 0; step <= depth; ++step) {
    const std::size_t level = depth - step;
    std::vector<Cluster> clusters = clusters_at_level(tree, level);
    for (const auto& cluster : clusters) {
      std::vector<const ProjectTable*> candidates;
      if (level == depth) {
        for (const auto& id : cluster.members) candidates.push_back(projects.at(id));
      } else {
        for (const auto& child : below) {
          if (!std::equal(cluster.path.begin(), cluster.path.end(), child.path.begin())) continue;
          candidates.push_back(projects.at(result.map.levels[level + 1].at(path_key(child.path))));
        }
      }
      TournamentResult t = tournament(candidates, bank, exec);
      const std::string key = path_key(cluster.path);
      result.comparisons += t.comparisons_made;
      result.map.levels[level][key] = t.winner;
      result.tournaments[level][key] = std::move(t);
    }
    below = std::move(clusters);
  }
  return result;
}

GeneralResult general(const ClusterTree& tree, const ProjectIndex& projects, const Pipeline& pipeline,
                      std::uint64_t seed, Execution exec) {
  ModelBank bank(pipeline, seed);
  return general(tree, projects, bank, exec);
}

ComparisonBudget comparison_budget(std::size_t n, std::span<const std::size_t> leaf_sizes,
                                   std::span<const std::size_t> fanouts) {
  ComparisonBudget b;
  b.n = n;
  b.m = leaf_sizes.size();
  std::size_t sum = 0;
  for (auto c : leaf_sizes) {
    if (c == 0) throw Error(Errc::InconsistentSizes, "empty leaf cluster");
    sum += c;
    b.leaf_comparisons += c * (c - 1);
  }
  if (sum != n)
    throw Error(Errc::InconsistentSizes,
                "leaf sizes sum to " + std::to_string(sum) + ", expected " + std::to_string(n));
  for (auto k : fanouts) b.promotion_comparisons += k * (k > 0 ? k - 1 : 0);
  b.total = b.leaf_comparisons + b.promotion_comparisons;
  return b;
}

ComparisonBudget comparison_budget(std::size_t n, std::span<const std::size_t> leaf_sizes) {
  const std::size_t m = leaf_sizes.size();
  return comparison_budget(n, leaf_sizes, std::span<const std::size_t>(&m, 1));
}

ComparisonBudget comparison_budget(const ClusterTree& tree) {
  const auto leaves = leaf_sizes(tree);
  const auto fanouts = internal_fanouts(tree);
  return comparison_budget(tree.size(), leaves, fanouts);
}

IndexResult apply_index(const ClusterTree& tree, const BellwetherMap& map, std::size_t level,
                        const ProjectTable& project, const ModelLookup& models) {
  if (level >= map.levels.size() || map.levels[level].empty())
    throw Error(Errc::LevelOutOfRange, "no bellwethers at level " + std::to_string(level));
  IndexResult r;
  r.path = descend(tree, summarize(project));
  if (level > r.path.size()) throw Error(Errc::LevelOutOfRange, "level deeper than the tree");
  r.cluster_key = path_key(std::span<const std::size_t>(r.path.data(), level));
  auto it = map.levels[level].find(r.cluster_key);
  if (it == map.levels[level].end())
    throw Error(Errc::LevelOutOfRange, "cluster " + r.cluster_key + " has no bellwether at level " +
                                           std::to_string(level));
  r.bellwether = it->second;
  r.model = models(r.bellwether);
  if (!r.model) throw Error(Errc::UnfittedModel, "no model for bellwether " + r.bellwether);
  r.predictions = r.model->predict_all(project);
  return r;
}

}  // namespace general
