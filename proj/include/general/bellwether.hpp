#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "general/cluster.hpp"
#include "general/eval.hpp"
#include "general/pipeline.hpp"
#include "general/rng.hpp"

namespace general {

// ---- domination ----------------------------------------------------------------

/// sum_j -exp(w_j (x_j - y_j) / n) / n, with objectives already scaled to [0, 1].
double loss(const GoalVector& x, const GoalVector& y);

/// x loses to y when moving from x to y costs more than the reverse.
bool worse(const GoalVector& x, const GoalVector& y);

/// Min-max scales each goal across the vectors (constant goals map to 0).
std::vector<GoalVector> normalize_goals(std::span<const GoalVector> vectors);

// ---- trained models --------------------------------------------------------------

enum class Execution { serial, parallel };

/// Per-project trained models. A project's model depends only on (bank seed,
/// project id), so every tournament that fields the project sees the same model.
/// Safe for concurrent use.
class ModelBank {
 public:
  struct Entry {
    std::shared_ptr<const ForestModel> model;  // null when training failed
    std::string failure;
    TrainingTrace trace;
  };

  ModelBank(Pipeline pipeline, std::uint64_t seed) : pipeline_(std::move(pipeline)), seed_(seed) {}

  const Entry& get(const ProjectTable& table);

  /// Already-trained entry, or nullptr.
  const Entry* find(const std::string& project_id) const;

  std::uint64_t seed_for(const std::string& project_id) const { return derive_seed(seed_, project_id); }
  const Pipeline& pipeline() const noexcept { return pipeline_; }
  std::size_t trainings() const;

 private:
  struct Slot {
    std::once_flag once;
    Entry entry;
  };

  Pipeline pipeline_;
  std::uint64_t seed_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::size_t trainings_ = 0;
};

// ---- tournaments -----------------------------------------------------------------

struct TournamentResult {
  std::string winner;
  std::vector<std::string> candidates;
  std::map<std::string, GoalVector> per_candidate;  // per-goal median over targets (raw units)
  std::map<std::string, std::size_t> pairwise_losses;
  std::map<std::string, std::string> disqualified;  // id -> reason
  std::size_t comparisons_made = 0;                 // source->target evaluations
};

/// Every source is trained and scored on every other candidate; the winner has the
/// fewest `worse` losses after per-goal normalization (ties: lexicographic id).
TournamentResult tournament(std::span<const ProjectTable* const> candidates, ModelBank& bank,
                            Execution exec = Execution::parallel);

TournamentResult tournament(std::span<const ProjectTable* const> candidates, const Pipeline& pipeline,
                            std::uint64_t seed, Execution exec = Execution::parallel);

/// Winner selection alone, on precomputed aggregated goal vectors.
std::string pick_winner(const std::vector<std::string>& ids, const std::vector<GoalVector>& aggregated,
                        std::vector<std::size_t>* losses = nullptr);

// ---- hierarchical bellwethers ----------------------------------------------------

struct BellwetherMap {
  /// levels[l] maps a cluster key (see path_key) to its winning project id.
  std::vector<std::map<std::string, std::string>> levels;

  std::size_t depth() const noexcept { return levels.empty() ? 0 : levels.size() - 1; }
  const std::string& root() const;
};

struct GeneralResult {
  BellwetherMap map;
  std::vector<std::map<std::string, TournamentResult>> tournaments;  // per level, per cluster
  std::size_t comparisons = 0;
};

using ProjectIndex = std::map<std::string, const ProjectTable*>;

/// Leaf tournaments, then promotion tournaments among child winners up to the root.
GeneralResult general(const ClusterTree& tree, const ProjectIndex& projects, ModelBank& bank,
                      Execution exec = Execution::parallel);

GeneralResult general(const ClusterTree& tree, const ProjectIndex& projects, const Pipeline& pipeline,
                      std::uint64_t seed, Execution exec = Execution::parallel);

struct ComparisonBudget {
  std::size_t n = 0;
  std::size_t m = 0;  // leaf clusters
  std::size_t leaf_comparisons = 0;
  std::size_t promotion_comparisons = 0;
  std::size_t total = 0;
};

/// Leaves sit directly under one root cluster.
ComparisonBudget comparison_budget(std::size_t n, std::span<const std::size_t> leaf_sizes);

/// `fanouts` lists the child count of every non-leaf cluster.
ComparisonBudget comparison_budget(std::size_t n, std::span<const std::size_t> leaf_sizes,
                                   std::span<const std::size_t> fanouts);

ComparisonBudget comparison_budget(const ClusterTree& tree);

struct IndexResult {
  ClusterPath path;         // full descent path
  std::string cluster_key;  // level-`level` ancestor
  std::string bellwether;
  std::shared_ptr<const ForestModel> model;
  std::vector<double> predictions;
};

using ModelLookup = std::function<std::shared_ptr<const ForestModel>(const std::string&)>;

IndexResult apply_index(const ClusterTree& tree, const BellwetherMap& map, std::size_t level,
                        const ProjectTable& project, const ModelLookup& models);

}  // namespace general
