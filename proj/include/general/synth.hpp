#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "general/data.hpp"

namespace general::synth {

// Synthetic corpora for tests, benchmarks, and demos.
//
// Defect projects share one construction: every feature column is a shuffled grid
// 0..rows-1 shifted by a per-group offset, so column medians are exact and all
// projects of a group have the same summary vector. Groups sit on binary codewords
// at least `min_hamming` apart. Each project labels its rows with its own rule,
// buggy = [grid value of its rule feature >= cut], plus a little label noise.

struct DefectCorpusSpec {
  std::size_t groups = 3;
  std::size_t projects_per_group = 5;  // planted project included
  std::size_t rows = 200;
  /// One project per group whose rows are labelled by a random group-mate's rule.
  bool plant = false;
  /// Every project uses the same rule and all groups share one offset.
  bool single_distribution = false;
  double label_noise = 0.05;
  std::size_t min_hamming = 6;
  std::uint64_t seed = 0;
};

struct Corpus {
  std::vector<ProjectTable> projects;
  std::vector<std::size_t> group;    // per project
  std::vector<std::string> planted;  // per group; empty when nothing was planted
  std::vector<ProjectMeta> meta;     // all pass the sanity checks
};

Corpus defect_corpus(const DefectCorpusSpec& spec);

struct HealthCorpusSpec {
  std::size_t groups = 3;
  std::size_t projects_per_group = 10;
  std::size_t months = 48;
  std::uint64_t seed = 0;
};

struct HealthCorpus {
  std::vector<HealthSeries> series;
  std::vector<std::size_t> group;
};

/// Monthly metrics around a per-group level with a shared trend and AR(1) noise.
HealthCorpus health_corpus(const HealthCorpusSpec& spec);

/// `<dir>/<id>.csv` per project, plus meta.csv and schema.json.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
void write_health_corpus(const std::filesystem::path& dir, const HealthCorpus& corpus);

/// Meta that passes every sanity check.
ProjectMeta healthy_meta(const std::string& project_id);

}  // namespace general::synth
