#include "general/prep.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "general/rng.hpp"

namespace general {

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n == 0 || b.size() != n) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrelationTable CorrelationTable::compute(const ProjectTable& table) {
  const std::size_t f = table.rows.cols();
  std::vector<std::vector<double>> cols(f);
  for (std::size_t j = 0; j < f; ++j) cols[j] = table.rows.column(j);

  CorrelationTable c;
  c.feature_label.resize(f);
  c.feature_feature.assign(f, std::vector<double>(f, 1.0));
  for (std::size_t i = 0; i < f; ++i) {
    c.feature_label[i] = std::abs(pearson(cols[i], table.labels));
    for (std::size_t j = i + 1; j < f; ++j) {
      const double r = std::abs(pearson(cols[i], cols[j]));
      c.feature_feature[i][j] = c.feature_feature[j][i] = r;
    }
  }
  return c;
}

double cfs_merit(const CorrelationTable& corr, std::span<const std::size_t> subset) {
  const std::size_t k = subset.size();
  if (k == 0) return 0.0;
  double rcf = 0.0;
  for (auto i : subset) rcf += corr.feature_label[i];
  rcf /= static_cast<double>(k);
  double rff = 0.0;
  if (k > 1) {
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) rff += corr.feature_feature[subset[a]][subset[b]];
    rff /= static_cast<double>(k * (k - 1) / 2);
  }
  const double kd = static_cast<double>(k);
  return kd * rcf / std::sqrt(kd + kd * (kd - 1.0) * rff);
}

FeatureSubset cfs_select(const ProjectTable& table) {
  const std::size_t f = table.rows.cols();
  if (f < 2) throw Error(Errc::TooFewFeatures, table.project_id + ": CFS needs at least 2 features");
  if (table.size() < 10) throw Error(Errc::TooFewRows, table.project_id + ": CFS needs at least 10 rows");
  const auto [lo, hi] = std::minmax_element(table.labels.begin(), table.labels.end());
  if (*lo == *hi) throw Error(Errc::ConstantLabel, table.project_id + ": label is constant");

  const CorrelationTable corr = CorrelationTable::compute(table);

  struct Candidate {
    std::vector<std::size_t> subset;
    double merit;
  };
  // Highest merit first; ties to the smaller, then lexicographically smaller subset.
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.merit != b.merit) return a.merit > b.merit;
    if (a.subset.size() != b.subset.size()) return a.subset.size() < b.subset.size();
    return a.subset < b.subset;
  };

  std::vector<Candidate> open{{{}, 0.0}};
  std::set<std::vector<std::size_t>> visited{{}};
  Candidate best{{}, 0.0};
  int stale = 0;
  constexpr int kMaxStale = 5;
  constexpr double kImprovement = 1e-12;

  while (!open.empty() && stale < kMaxStale) {
    auto head = std::min_element(open.begin(), open.end(), better);
    Candidate current = std::move(*head);
    open.erase(head);

    bool improved = false;
    for (std::size_t j = 0; j < f; ++j) {
      if (std::binary_search(current.subset.begin(), current.subset.end(), j)) continue;
      std::vector<std::size_t> child = current.subset;
      child.insert(std::upper_bound(child.begin(), child.end(), j), j);
      if (!visited.insert(child).second) continue;
      const double m = cfs_merit(corr, child);
      if (m > best.merit + kImprovement) {
        best = {child, m};
        improved = true;
      }
      open.push_back({std::move(child), m});
    }
    stale = improved ? 0 : stale + 1;
  }

  if (best.subset.empty())
    throw Error(Errc::ConstantLabel, table.project_id + ": no feature correlates with the label");
  return {best.subset, best.merit};
}

ProjectTable smote(const ProjectTable& table, std::uint64_t seed, std::size_t k) {
  if (table.schema.task != Task::classification)
    throw Error(Errc::InvalidConfig, table.project_id + ": SMOTE applies to classification tables only");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < table.size(); ++i) (table.labels[i] == 1.0 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw Error(Errc::SingleClass, table.project_id + ": only one class present");

  const bool pos_minority = pos.size() < neg.size();
  const std::vector<std::size_t>& minority = pos_minority ? pos : neg;
  const std::size_t majority_count = pos_minority ? neg.size() : pos.size();
  const double minority_label = pos_minority ? 1.0 : 0.0;
  ProjectTable out = table;
  if (minority.size() == majority_count) return out;
  if (minority.size() < 2)
    throw Error(Errc::MinorityTooSmall, table.project_id + ": minority class has fewer than 2 rows");

  const std::size_t m = minority.size();
  const std::size_t kk = std::min(k, m - 1);
  if (kk == 0) throw Error(Errc::InvalidConfig, "SMOTE needs k >= 1");

  // k nearest minority neighbours of each minority row (ties to the lower index)
  std::vector<std::vector<std::size_t>> neighbours(m);
  for (std::size_t a = 0; a < m; ++a) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(m - 1);
    auto ra = table.rows.row(minority[a]);
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      auto rb = table.rows.row(minority[b]);
      double d = 0.0;
      for (std::size_t j = 0; j < ra.size(); ++j) d += (ra[j] - rb[j]) * (ra[j] - rb[j]);
      dist.emplace_back(d, b);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    for (std::size_t i = 0; i < kk; ++i) neighbours[a].push_back(dist[i].second);
  }

  Rng rng(derive_seed(seed, {0x736d6f7465}));
  std::vector<std::size_t> parents(m);
  std::iota(parents.begin(), parents.end(), 0);
  rng.shuffle(parents);

  const std::size_t needed = majority_count - m;
  std::vector<double> synthetic(table.rows.cols());
  for (std::size_t s = 0; s < needed; ++s) {
    const std::size_t a = parents[s % m];
    const std::size_t b = neighbours[a][rng.index(kk)];
    const double u = rng.uniform();
    auto x = table.rows.row(minority[a]);
    auto nb = table.rows.row(minority[b]);
    for (std::size_t j = 0; j < x.size(); ++j) synthetic[j] = x[j] + u * (nb[j] - x[j]);
    out.rows.push_row(synthetic);
    out.labels.push_back(minority_label);
    out.row_ids.push_back(ProjectTable::kSyntheticRow);
    if (table.has_effort()) {
      const double ex = table.effort[minority[a]], eb = table.effort[minority[b]];
      out.effort.push_back(ex + u * (eb - ex));
    }
  }
  return out;
}

}  // namespace general
