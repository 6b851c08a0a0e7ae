#include "general/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "general/rng.hpp"

namespace general::synth {

namespace fs = std::filesystem;

namespace {

std::size_t hamming(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

// Greedy random code: draw words and keep those far enough from every kept word.
std::vector<std::vector<int>> codewords(std::size_t count, std::size_t bits, std::size_t min_distance, Rng& rng) {
  std::vector<std::vector<int>> words;
  for (std::size_t attempt = 0; words.size() < count; ++attempt) {
    if (attempt > 200000) throw Error(Errc::InvalidConfig, "cannot place that many separated groups");
    std::vector<int> w(bits);
    for (auto& b : w) b = static_cast<int>(rng.index(2));
    if (std::all_of(words.begin(), words.end(), [&](const auto& o) { return hamming(w, o) >= min_distance; }))
      words.push_back(std::move(w));
  }
  return words;
}

struct Rule {
  std::size_t feature;
  double cut;
};

Matrix grid_rows(std::size_t rows, std::size_t features, const std::vector<int>& word, Rng& rng) {
  const double offset = 2.0 * static_cast<double>(rows);
  Matrix m(rows, features);
  std::vector<std::size_t> perm(rows);
  for (std::size_t f = 0; f < features; ++f) {
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    for (std::size_t r = 0; r < rows; ++r) m(r, f) = static_cast<double>(perm[r]) + offset * word[f];
  }
  return m;
}

double grid_value(const Matrix& m, std::size_t r, std::size_t f, std::size_t rows) {
  return std::fmod(m(r, f), 2.0 * static_cast<double>(rows));
}

}  // namespace

ProjectMeta healthy_meta(const std::string& project_id) {
  ProjectMeta m;
  m.project_id = project_id;
  m.pull_requests = 25;
  m.commits = 400;
  m.duration_weeks = 120;
  m.issues = 60;
  m.contributors = 14;
  m.defective_commits = 45;
  return m;
}

Corpus defect_corpus(const DefectCorpusSpec& spec) {
  if (spec.groups == 0 || spec.projects_per_group == 0 || spec.rows < 10)
    throw Error(Errc::InvalidConfig, "synthetic corpus needs groups, projects, and at least 10 rows");
  if (spec.plant && spec.projects_per_group < 3)
    throw Error(Errc::InvalidConfig, "planting needs at least two group-mates");
  const FeatureSchema schema = defect_schema();
  const std::size_t width = schema.feature_count();
  Rng rng(derive_seed(spec.seed, {0x5e}));

  std::vector<std::vector<int>> words;
  if (spec.single_distribution) words.assign(spec.groups, std::vector<int>(width, 0));
  else words = codewords(spec.groups, width, spec.min_hamming, rng);

  Corpus corpus;
  const double rows = static_cast<double>(spec.rows);
  for (std::size_t g = 0; g < spec.groups; ++g) {
    std::vector<std::size_t> features(width);
    std::iota(features.begin(), features.end(), 0);
    rng.shuffle(features);
    const std::size_t mates = spec.plant ? spec.projects_per_group - 1 : spec.projects_per_group;
    std::vector<Rule> rules;
    for (std::size_t p = 0; p < mates; ++p) {
      if (spec.single_distribution) rules.push_back({0, std::floor(0.7 * rows)});
      else rules.push_back({features[p % width], std::floor(rng.uniform(0.65, 0.8) * rows)});
    }
    corpus.planted.emplace_back();

    for (std::size_t p = 0; p < spec.projects_per_group; ++p) {
      const bool planted = spec.plant && p == mates;
      char id[32];
      std::snprintf(id, sizeof id, "p%03zu_%02zu", g, p);
      ProjectTable t;
      t.project_id = id;
      t.schema = schema;
      t.rows = grid_rows(spec.rows, width, words[g], rng);
      for (std::size_t r = 0; r < spec.rows; ++r) {
        const Rule& rule = planted ? rules[rng.index(mates)] : rules[p];
        bool buggy = grid_value(t.rows, r, rule.feature, spec.rows) >= rule.cut;
        if (rng.uniform() < spec.label_noise) buggy = !buggy;
        t.labels.push_back(buggy ? 1.0 : 0.0);
        t.effort.push_back(static_cast<double>(1 + rng.index(400)));
        t.row_ids.push_back(r);
      }
      if (planted) corpus.planted.back() = t.project_id;
      corpus.meta.push_back(healthy_meta(t.project_id));
      corpus.group.push_back(g);
      corpus.projects.push_back(std::move(t));
    }
  }
  return corpus;
}

HealthCorpus health_corpus(const HealthCorpusSpec& spec) {
  if (spec.groups == 0 || spec.projects_per_group == 0 || spec.months < 8)
    throw Error(Errc::InvalidConfig, "health corpus needs groups, projects, and at least 8 months");
  const std::size_t width = health_metric_names().size();
  Rng rng(derive_seed(spec.seed, {0x4ea}));
  HealthCorpus out;
  for (std::size_t g = 0; g < spec.groups; ++g) {
    std::vector<double> level(width), trend(width);
    for (std::size_t f = 0; f < width; ++f) {
      level[f] = std::exp(rng.uniform(std::log(5.0), std::log(400.0)));
      trend[f] = rng.uniform(-0.01, 0.03);
    }
    for (std::size_t p = 0; p < spec.projects_per_group; ++p) {
      char id[32];
      std::snprintf(id, sizeof id, "h%03zu_%02zu", g, p);
      HealthSeries s;
      s.project_id = id;
      s.months = Matrix(spec.months, width);
      std::vector<double> scale(width), noise(width, 0.0);
      for (std::size_t f = 0; f < width; ++f) scale[f] = level[f] * rng.uniform(0.9, 1.1);
      for (std::size_t t = 0; t < spec.months; ++t)
        for (std::size_t f = 0; f < width; ++f) {
          noise[f] = 0.7 * noise[f] + rng.normal(0.0, 0.08);
          const double v = scale[f] * (1.0 + trend[f] * static_cast<double>(t)) * std::exp(noise[f]);
          s.months(t, f) = std::max(0.0, std::round(v));
        }
      out.series.push_back(std::move(s));
      out.group.push_back(g);
    }
  }
  return out;
}

void write_corpus(const fs::path& dir, const Corpus& corpus) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& t : corpus.projects) write_project_table(dir / (t.project_id + ".csv"), t);
  write_meta(dir / "meta.csv", corpus.meta);
  if (!corpus.projects.empty()) save_schema_json(dir / "schema.json", corpus.projects.front().schema);
}

void write_health_corpus(const fs::path& dir, const HealthCorpus& corpus) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<ProjectMeta> meta;
  for (const auto& s : corpus.series) {
    write_health_series(dir / (s.project_id + ".csv"), s);
    meta.push_back(healthy_meta(s.project_id));
  }
  write_meta(dir / "meta.csv", meta);
}

}  // namespace general::synth
