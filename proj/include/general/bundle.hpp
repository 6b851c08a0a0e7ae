#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "general/bellwether.hpp"
#include "general/cluster.hpp"
#include "general/pipeline.hpp"

namespace general {

/// Everything `predict` needs: the tree, the per-level winners, and their models.
///
/// On disk:
///   manifest.json       format_version, seed, config_hash, schema, pipeline, levels
///   tree.json           ClusterTree::to_json
///   models/<id>.json    one per distinct bellwether
struct Bundle {
  static constexpr int kFormatVersion = 1;

  ClusterTree tree;
  BellwetherMap map;
  FeatureSchema schema;
  Pipeline pipeline;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string goal;  // health bundles: the predicted metric
  std::size_t horizon = 6;
  std::map<std::string, std::shared_ptr<const ForestModel>> models;

  ModelLookup lookup() const;
};

/// Hex FNV-1a of the compact JSON dump.
std::string config_hash(const nlohmann::json& config);

void save_bundle(const std::filesystem::path& dir, const Bundle& bundle);
Bundle load_bundle(const std::filesystem::path& dir);

}  // namespace general
