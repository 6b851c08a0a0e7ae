#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "general/data.hpp"

namespace general {

/// BIRCH clustering feature: count, linear sum, and sum of squared norms.
struct CFEntry {
  std::size_t n = 0;
  std::vector<double> linear_sum;
  double square_sum = 0.0;

  static CFEntry from_point(std::span<const double> x);

  std::size_t dim() const noexcept { return linear_sum.size(); }
  std::vector<double> centroid() const;
};

CFEntry cf_merge(const CFEntry& a, const CFEntry& b);
double cf_radius(const CFEntry& e);

struct CFNode {
  struct Entry {
    CFEntry cf;
    int child = -1;                    // node index; -1 for leaf entries
    std::vector<std::size_t> members;  // project indices (leaf entries only)
  };

  bool is_leaf = true;
  std::vector<Entry> entries;
};

/// Path of entry indices from the root node down to a leaf entry. Its length is the
/// tree depth; the prefix of length L identifies the level-L cluster.
using ClusterPath = std::vector<std::size_t>;

std::string path_key(std::span<const std::size_t> path);
ClusterPath parse_path_key(const std::string& key);

struct Cluster {
  ClusterPath path;                 // empty for the level-0 root cluster
  std::vector<std::string> members; // project ids
};

class ClusterTree {
 public:
  static constexpr int kFormatVersion = 1;

  std::size_t branching_factor = 20;
  double threshold = 0.5;
  std::vector<std::string> project_ids;
  std::vector<std::pair<double, double>> bounds;  // per-dimension (min, max)
  std::vector<CFNode> nodes;
  std::size_t root = 0;
  std::map<std::string, ClusterPath> member_index;

  std::size_t dim() const noexcept { return bounds.size(); }
  std::size_t size() const noexcept { return project_ids.size(); }

  /// Number of node levels between the root and the leaf entries (>= 1).
  std::size_t depth() const;

  /// Min-max scaling with the stored bounds, clamped to [0, 1].
  std::vector<double> normalize(std::span<const double> raw) const;

  void rebuild_member_index();

  nlohmann::json to_json() const;
  static ClusterTree from_json(const nlohmann::json& j);
};

ClusterTree build_tree(std::span<const SummaryVector> vectors, std::size_t branching_factor = 20,
                       double threshold = 0.5);

/// Level 0 is the whole corpus; level depth() yields the leaf clusters.
std::vector<Cluster> clusters_at_level(const ClusterTree& tree, std::size_t level);

/// Nearest-centroid walk from the root; ties go to the lower entry index.
ClusterPath descend(const ClusterTree& tree, const SummaryVector& v);

/// Member counts of the leaf entries, in clusters_at_level(depth) order.
std::vector<std::size_t> leaf_sizes(const ClusterTree& tree);

/// Child counts of every non-leaf cluster (levels 0..depth-1).
std::vector<std::size_t> internal_fanouts(const ClusterTree& tree);

}  // namespace general
