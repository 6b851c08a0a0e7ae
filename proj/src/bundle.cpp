#include "general/bundle.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "general/rng.hpp"

namespace general {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadFormat, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace

ModelLookup Bundle::lookup() const {
  return [this](const std::string& id) -> std::shared_ptr<const ForestModel> {
    auto it = models.find(id);
    return it == models.end() ? nullptr : it->second;
  };
}

std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

void save_bundle(const fs::path& dir, const Bundle& bundle) {
  std::error_code ec;
  fs::create_directories(dir / "models", ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json levels = nlohmann::json::array();
  std::set<std::string> winners;
  for (const auto& level : bundle.map.levels) {
    nlohmann::json l = nlohmann::json::object();
    for (const auto& [key, id] : level) {
      l[key] = id;
      winners.insert(id);
    }
    levels.push_back(l);
  }
  for (const auto& id : winners) {
    auto it = bundle.models.find(id);
    if (it == bundle.models.end() || !it->second)
      throw Error(Errc::UnfittedModel, "bundle has no model for bellwether " + id);
    write_json(dir / "models" / (id + ".json"), it->second->to_json());
  }
  write_json(dir / "tree.json", bundle.tree.to_json());
  write_json(dir / "manifest.json", {{"format_version", Bundle::kFormatVersion},
                                     {"tree", "tree.json"},
                                     {"seed", bundle.seed},
                                     {"config_hash", bundle.config_hash},
                                     {"goal", bundle.goal},
                                     {"horizon", bundle.horizon},
                                     {"schema", schema_to_json(bundle.schema)},
                                     {"pipeline", bundle.pipeline.to_json()},
                                     {"levels", levels}});
}

Bundle load_bundle(const fs::path& dir) {
  const nlohmann::json manifest = read_json(dir / "manifest.json");
  Bundle b;
  try {
    if (manifest.at("format_version").get<int>() != Bundle::kFormatVersion)
      throw Error(Errc::BadFormat, "unsupported bundle format_version");
    b.seed = manifest.at("seed").get<std::uint64_t>();
    b.config_hash = manifest.at("config_hash").get<std::string>();
    b.goal = manifest.value("goal", std::string());
    b.horizon = manifest.value("horizon", std::size_t{6});
    b.schema = schema_from_json(manifest.at("schema"));
    b.pipeline = Pipeline::from_json(manifest.at("pipeline"));
    for (const auto& level : manifest.at("levels")) {
      std::map<std::string, std::string> l;
      for (const auto& [key, id] : level.items()) l[key] = id.get<std::string>();
      b.map.levels.push_back(std::move(l));
    }
    b.tree = ClusterTree::from_json(read_json(dir / manifest.at("tree").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadFormat, (dir / "manifest.json").string() + ": " + e.what());
  }
  for (const auto& level : b.map.levels)
    for (const auto& [key, id] : level) {
      if (b.models.count(id)) continue;
      b.models[id] = std::make_shared<const ForestModel>(ForestModel::from_json(read_json(dir / "models" / (id + ".json"))));
    }
  return b;
}

}  // namespace general
