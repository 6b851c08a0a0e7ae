#include "general/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace general {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

std::size_t nearest_entry(const CFNode& node, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < node.entries.size(); ++i) {
    const double d = squared_distance(node.entries[i].cf.centroid(), x);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

CFEntry sum_of(const CFNode& node) {
  CFEntry total = node.entries.front().cf;
  for (std::size_t i = 1; i < node.entries.size(); ++i) total = cf_merge(total, node.entries[i].cf);
  return total;
}

class Builder {
 public:
  explicit Builder(ClusterTree& tree) : tree_(tree) {}

  void insert(std::span<const double> x, std::size_t member) {
    const CFEntry point = CFEntry::from_point(x);
    if (auto sibling = insert_into(tree_.root, point, member)) {
      CFNode new_root;
      new_root.is_leaf = false;
      new_root.entries.push_back({sum_of(tree_.nodes[tree_.root]), static_cast<int>(tree_.root), {}});
      new_root.entries.push_back({sum_of(tree_.nodes[*sibling]), static_cast<int>(*sibling), {}});
      tree_.nodes.push_back(std::move(new_root));
      tree_.root = tree_.nodes.size() - 1;
    }
  }

 private:
  // Returns the index of a new sibling node when `node_idx` had to split.
  std::optional<std::size_t> insert_into(std::size_t node_idx, const CFEntry& point, std::size_t member) {
    CFNode& node = tree_.nodes[node_idx];
    if (node.entries.empty()) {
      node.entries.push_back({point, -1, {member}});
      return std::nullopt;
    }
    const std::size_t k = nearest_entry(node, point.linear_sum);
    if (node.is_leaf) {
      CFEntry merged = cf_merge(node.entries[k].cf, point);
      if (cf_radius(merged) <= tree_.threshold) {
        node.entries[k].cf = std::move(merged);
        node.entries[k].members.push_back(member);
      } else {
        node.entries.push_back({point, -1, {member}});
      }
    } else {
      const auto child = static_cast<std::size_t>(node.entries[k].child);
      auto sibling = insert_into(child, point, member);
      CFNode& self = tree_.nodes[node_idx];  // insert_into may grow `nodes`
      if (sibling) {
        self.entries[k].cf = sum_of(tree_.nodes[child]);
        CFNode::Entry extra{sum_of(tree_.nodes[*sibling]), static_cast<int>(*sibling), {}};
        self.entries.insert(self.entries.begin() + static_cast<std::ptrdiff_t>(k) + 1, std::move(extra));
      } else {
        self.entries[k].cf = cf_merge(self.entries[k].cf, point);
      }
    }
    if (tree_.nodes[node_idx].entries.size() > tree_.branching_factor) return split(node_idx);
    return std::nullopt;
  }

  // Farthest pair of entry centroids seeds the two halves; other entries join the
  // nearer seed (ties to the first seed). Entry order is preserved within each half.
  std::size_t split(std::size_t node_idx) {
    CFNode& node = tree_.nodes[node_idx];
    const std::size_t m = node.entries.size();
    std::vector<std::vector<double>> centroids;
    centroids.reserve(m);
    for (const auto& e : node.entries) centroids.push_back(e.cf.centroid());

    std::size_t s1 = 0, s2 = 1;
    double far = -1.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        const double d = squared_distance(centroids[i], centroids[j]);
        if (d > far) {
          far = d;
          s1 = i;
          s2 = j;
        }
      }

    CFNode left, right;
    left.is_leaf = right.is_leaf = node.is_leaf;
    for (std::size_t i = 0; i < m; ++i) {
      bool to_right;
      if (i == s1) to_right = false;
      else if (i == s2) to_right = true;
      else to_right = squared_distance(centroids[i], centroids[s2]) < squared_distance(centroids[i], centroids[s1]);
      (to_right ? right : left).entries.push_back(std::move(node.entries[i]));
    }
    tree_.nodes[node_idx] = std::move(left);
    tree_.nodes.push_back(std::move(right));
    return tree_.nodes.size() - 1;
  }

  ClusterTree& tree_;
};

void collect_members(const ClusterTree& tree, const CFNode::Entry& entry, std::vector<std::string>& out) {
  if (entry.child < 0) {
    for (auto m : entry.members) out.push_back(tree.project_ids[m]);
    return;
  }
  for (const auto& e : tree.nodes[static_cast<std::size_t>(entry.child)].entries) collect_members(tree, e, out);
}

void collect_level(const ClusterTree& tree, std::size_t node_idx, std::size_t node_depth, std::size_t target,
                   ClusterPath& path, std::vector<Cluster>& out) {
  const CFNode& node = tree.nodes[node_idx];
  for (std::size_t i = 0; i < node.entries.size(); ++i) {
    path.push_back(i);
    const auto& e = node.entries[i];
    if (node_depth == target) {
      Cluster c;
      c.path = path;
      collect_members(tree, e, c.members);
      out.push_back(std::move(c));
    } else if (e.child >= 0) {
      collect_level(tree, static_cast<std::size_t>(e.child), node_depth + 1, target, path, out);
    }
    path.pop_back();
  }
}

}  // namespace

CFEntry CFEntry::from_point(std::span<const double> x) {
  CFEntry e;
  e.n = 1;
  e.linear_sum.assign(x.begin(), x.end());
  for (double v : x) e.square_sum += v * v;
  return e;
}

std::vector<double> CFEntry::centroid() const {
  std::vector<double> c(linear_sum);
  for (double& v : c) v /= static_cast<double>(n);
  return c;
}

CFEntry cf_merge(const CFEntry& a, const CFEntry& b) {
  if (a.dim() != b.dim())
    throw Error(Errc::DimensionMismatch,
                "cannot merge CF entries of dimension " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
  CFEntry out;
  out.n = a.n + b.n;
  out.linear_sum.resize(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out.linear_sum[i] = a.linear_sum[i] + b.linear_sum[i];
  out.square_sum = a.square_sum + b.square_sum;
  return out;
}

double cf_radius(const CFEntry& e) {
  const double n = static_cast<double>(e.n);
  double centroid_sq = 0.0;
  for (double v : e.linear_sum) centroid_sq += (v / n) * (v / n);
  return std::sqrt(std::max(0.0, e.square_sum / n - centroid_sq));
}

std::string path_key(std::span<const std::size_t> path) {
  if (path.empty()) return "root";
  std::string key;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) key += '.';
    key += std::to_string(path[i]);
  }
  return key;
}

ClusterPath parse_path_key(const std::string& key) {
  ClusterPath path;
  if (key == "root") return path;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    try {
      path.push_back(static_cast<std::size_t>(std::stoul(part)));
    } catch (const std::exception&) {
      throw Error(Errc::BadFormat, "bad cluster key '" + key + "'");
    }
  }
  return path;
}

std::size_t ClusterTree::depth() const {
  std::size_t d = 1;
  const CFNode* node = &nodes[root];
  while (!node->is_leaf) {
    node = &nodes[static_cast<std::size_t>(node->entries.front().child)];
    ++d;
  }
  return d;
}

std::vector<double> ClusterTree::normalize(std::span<const double> raw) const {
  if (raw.size() != bounds.size())
    throw Error(Errc::DimensionMismatch, "vector of dimension " + std::to_string(raw.size()) +
                                             " does not match tree dimension " + std::to_string(bounds.size()));
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto [lo, hi] = bounds[i];
    out[i] = hi > lo ? std::clamp((raw[i] - lo) / (hi - lo), 0.0, 1.0) : 0.0;
  }
  return out;
}

void ClusterTree::rebuild_member_index() {
  member_index.clear();
  ClusterPath path;
  auto walk = [&](auto&& self, std::size_t node_idx) -> void {
    const CFNode& node = nodes[node_idx];
    for (std::size_t i = 0; i < node.entries.size(); ++i) {
      path.push_back(i);
      const auto& e = node.entries[i];
      if (e.child >= 0) self(self, static_cast<std::size_t>(e.child));
      else
        for (auto m : e.members) member_index[project_ids[m]] = path;
      path.pop_back();
    }
  };
  walk(walk, root);
}

ClusterTree build_tree(std::span<const SummaryVector> vectors, std::size_t branching_factor, double threshold) {
  if (vectors.empty()) throw Error(Errc::EmptyInput, "no summary vectors to cluster");
  if (branching_factor < 2) throw Error(Errc::InvalidConfig, "branching factor must be at least 2");
  if (!(threshold >= 0.0)) throw Error(Errc::InvalidConfig, "threshold must be nonnegative");
  const std::size_t dim = vectors.front().values.size();
  for (const auto& v : vectors)
    if (v.values.size() != dim)
      throw Error(Errc::DimensionMismatch, v.project_id + " has dimension " + std::to_string(v.values.size()) +
                                               ", expected " + std::to_string(dim));

  ClusterTree tree;
  tree.branching_factor = branching_factor;
  tree.threshold = threshold;
  tree.bounds.assign(dim, {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
  for (const auto& v : vectors) {
    tree.project_ids.push_back(v.project_id);
    for (std::size_t i = 0; i < dim; ++i) {
      tree.bounds[i].first = std::min(tree.bounds[i].first, v.values[i]);
      tree.bounds[i].second = std::max(tree.bounds[i].second, v.values[i]);
    }
  }
  tree.nodes.push_back(CFNode{});
  tree.root = 0;

  Builder builder(tree);
  for (std::size_t i = 0; i < vectors.size(); ++i) builder.insert(tree.normalize(vectors[i].values), i);
  tree.rebuild_member_index();
  return tree;
}

std::vector<Cluster> clusters_at_level(const ClusterTree& tree, std::size_t level) {
  const std::size_t depth = tree.depth();
  if (level > depth)
    throw Error(Errc::LevelOutOfRange,
                "level " + std::to_string(level) + " exceeds tree depth " + std::to_string(depth));
  std::vector<Cluster> out;
  if (level == 0) {
    Cluster all;
    for (const auto& e : tree.nodes[tree.root].entries) collect_members(tree, e, all.members);
    out.push_back(std::move(all));
    return out;
  }
  ClusterPath path;
  collect_level(tree, tree.root, 0, level - 1, path, out);
  return out;
}

ClusterPath descend(const ClusterTree& tree, const SummaryVector& v) {
  const std::vector<double> x = tree.normalize(v.values);
  ClusterPath path;
  std::size_t node_idx = tree.root;
  while (true) {
    const CFNode& node = tree.nodes[node_idx];
    const std::size_t k = nearest_entry(node, x);
    path.push_back(k);
    if (node.is_leaf) return path;
    node_idx = static_cast<std::size_t>(node.entries[k].child);
  }
}

std::vector<std::size_t> leaf_sizes(const ClusterTree& tree) {
  std::vector<std::size_t> out;
  for (const auto& c : clusters_at_level(tree, tree.depth())) out.push_back(c.members.size());
  return out;
}

std::vector<std::size_t> internal_fanouts(const ClusterTree& tree) {
  std::vector<std::size_t> out{tree.nodes[tree.root].entries.size()};
  auto walk = [&](auto&& self, const CFNode& node) -> void {
    for (const auto& e : node.entries) {
      if (e.child < 0) continue;
      const CFNode& child = tree.nodes[static_cast<std::size_t>(e.child)];
      out.push_back(child.entries.size());
      self(self, child);
    }
  };
  walk(walk, tree.nodes[tree.root]);
  return out;
}

nlohmann::json ClusterTree::to_json() const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["branching_factor"] = branching_factor;
  j["threshold"] = threshold;
  j["project_ids"] = project_ids;
  j["bounds"] = nlohmann::json::array();
  for (const auto& [lo, hi] : bounds) j["bounds"].push_back({lo, hi});
  j["root"] = root;
  j["nodes"] = nlohmann::json::array();
  for (const auto& node : nodes) {
    nlohmann::json jn;
    jn["leaf"] = node.is_leaf;
    jn["entries"] = nlohmann::json::array();
    for (const auto& e : node.entries) {
      jn["entries"].push_back({{"n", e.cf.n},
                               {"linear_sum", e.cf.linear_sum},
                               {"square_sum", e.cf.square_sum},
                               {"child", e.child},
                               {"members", e.members}});
    }
    j["nodes"].push_back(std::move(jn));
  }
  nlohmann::json index = nlohmann::json::object();
  for (const auto& [id, path] : member_index) index[id] = path_key(path);
  j["member_index"] = std::move(index);
  return j;
}

ClusterTree ClusterTree::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kFormatVersion)
      throw Error(Errc::BadFormat, "unsupported tree format_version " + j.at("format_version").dump());
    ClusterTree t;
    t.branching_factor = j.at("branching_factor").get<std::size_t>();
    t.threshold = j.at("threshold").get<double>();
    t.project_ids = j.at("project_ids").get<std::vector<std::string>>();
    for (const auto& b : j.at("bounds")) t.bounds.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
    t.root = j.at("root").get<std::size_t>();
    for (const auto& jn : j.at("nodes")) {
      CFNode node;
      node.is_leaf = jn.at("leaf").get<bool>();
      for (const auto& je : jn.at("entries")) {
        CFNode::Entry e;
        e.cf.n = je.at("n").get<std::size_t>();
        e.cf.linear_sum = je.at("linear_sum").get<std::vector<double>>();
        e.cf.square_sum = je.at("square_sum").get<double>();
        e.child = je.at("child").get<int>();
        e.members = je.at("members").get<std::vector<std::size_t>>();
        node.entries.push_back(std::move(e));
      }
      t.nodes.push_back(std::move(node));
    }
    if (t.root >= t.nodes.size()) throw Error(Errc::BadFormat, "tree root index out of range");
    t.rebuild_member_index();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadFormat, std::string("malformed tree document: ") + e.what());
  }
}

}  // namespace general
