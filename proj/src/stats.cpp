#include "general/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>

#include "general/csv.hpp"
#include "general/data.hpp"
#include "general/error.hpp"
#include "general/rng.hpp"

namespace general {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

double test_statistic(std::span<const double> y, std::span<const double> z) {
  const double my = mean_of(y), mz = mean_of(z);
  const double denom = std::sqrt(variance_of(y, my) / static_cast<double>(y.size()) +
                                 variance_of(z, mz) / static_cast<double>(z.size()));
  const double diff = mz - my;
  if (denom == 0.0) return diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  return diff / denom;
}

std::vector<double> pooled(std::span<const TreatmentSamples> ts) {
  std::vector<double> out;
  for (const auto& t : ts) out.insert(out.end(), t.samples.begin(), t.samples.end());
  return out;
}

class Ranker {
 public:
  Ranker(std::span<const TreatmentSamples> sorted, std::uint64_t seed, const ScottKnottParams& params)
      : sorted_(sorted), seed_(seed), params_(params), ranks_(sorted.size(), 0) {}

  std::vector<int> run() {
    split(0, sorted_.size());
    return ranks_;
  }

 private:
  void split(std::size_t lo, std::size_t hi) {
    if (hi - lo >= 2) {
      if (auto cut = best_cut(lo, hi)) {
        const auto left = pooled(sorted_.subspan(lo, *cut - lo));
        const auto right = pooled(sorted_.subspan(*cut, hi - *cut));
        const double effect = std::max(a12(left, right), a12(right, left));
        if (effect >= params_.a12_threshold &&
            bootstrap_sig(left, right, derive_seed(seed_, {lo, hi}), params_.bootstrap)) {
          split(lo, *cut);
          split(*cut, hi);
          return;
        }
      }
    }
    ++next_rank_;
    for (std::size_t i = lo; i < hi; ++i) ranks_[i] = next_rank_;
  }

  std::optional<std::size_t> best_cut(std::size_t lo, std::size_t hi) const {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      total += std::accumulate(sorted_[i].samples.begin(), sorted_[i].samples.end(), 0.0);
      count += sorted_[i].samples.size();
    }
    const double mu = total / static_cast<double>(count);
    std::optional<std::size_t> best;
    double best_score = -1.0;
    double left_sum = 0.0;
    std::size_t left_n = 0;
    for (std::size_t c = lo + 1; c < hi; ++c) {
      left_sum += std::accumulate(sorted_[c - 1].samples.begin(), sorted_[c - 1].samples.end(), 0.0);
      left_n += sorted_[c - 1].samples.size();
      const double right_sum = total - left_sum;
      const std::size_t right_n = count - left_n;
      const double ml = left_sum / static_cast<double>(left_n), mr = right_sum / static_cast<double>(right_n);
      const double score = static_cast<double>(left_n) * (ml - mu) * (ml - mu) +
                           static_cast<double>(right_n) * (mr - mu) * (mr - mu);
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    return best;
  }

  std::span<const TreatmentSamples> sorted_;
  std::uint64_t seed_;
  ScottKnottParams params_;
  std::vector<int> ranks_;
  int next_rank_ = 0;
};

}  // namespace

double a12(std::span<const double> xs, std::span<const double> ys) {
  if (xs.empty() || ys.empty()) throw Error(Errc::EmptyInput, "A12 needs two nonempty samples");
  // Rank-based count of (x > y) + 0.5 (x == y) over all pairs.
  std::vector<double> sorted_y(ys.begin(), ys.end());
  std::sort(sorted_y.begin(), sorted_y.end());
  double wins = 0.0;
  for (double x : xs) {
    const auto lower = std::lower_bound(sorted_y.begin(), sorted_y.end(), x);
    const auto upper = std::upper_bound(lower, sorted_y.end(), x);
    wins += static_cast<double>(lower - sorted_y.begin()) + 0.5 * static_cast<double>(upper - lower);
  }
  return wins / (static_cast<double>(xs.size()) * static_cast<double>(ys.size()));
}

bool bootstrap_sig(std::span<const double> xs, std::span<const double> ys, std::uint64_t seed,
                   const BootstrapParams& params) {
  if (xs.empty() || ys.empty()) throw Error(Errc::EmptyInput, "bootstrap needs two nonempty samples");
  if (params.iterations == 0) throw Error(Errc::InvalidConfig, "bootstrap needs at least one iteration");
  const double observed = std::abs(test_statistic(xs, ys));
  if (observed == 0.0) return false;

  std::vector<double> all(xs.begin(), xs.end());
  all.insert(all.end(), ys.begin(), ys.end());
  const double grand = mean_of(all), mx = mean_of(xs), my = mean_of(ys);
  std::vector<double> x_hat, y_hat;
  for (double v : xs) x_hat.push_back(v - mx + grand);
  for (double v : ys) y_hat.push_back(v - my + grand);

  Rng rng(derive_seed(seed, {0xb5}));
  std::vector<double> bx(x_hat.size()), by(y_hat.size());
  std::size_t as_extreme = 0;
  for (std::size_t b = 0; b < params.iterations; ++b) {
    for (auto& v : bx) v = x_hat[rng.index(x_hat.size())];
    for (auto& v : by) v = y_hat[rng.index(y_hat.size())];
    if (std::abs(test_statistic(bx, by)) >= observed) ++as_extreme;
  }
  return static_cast<double>(as_extreme) / static_cast<double>(params.iterations) < params.alpha;
}

std::vector<RankedTreatment> scott_knott(std::vector<TreatmentSamples> treatments, std::uint64_t seed,
                                         const ScottKnottParams& params) {
  if (treatments.empty()) throw Error(Errc::EmptyInput, "Scott-Knott needs at least one treatment");
  for (const auto& t : treatments)
    if (t.samples.empty()) throw Error(Errc::EmptyInput, "treatment " + t.name + " has no samples");
  std::sort(treatments.begin(), treatments.end(), [](const TreatmentSamples& a, const TreatmentSamples& b) {
    const double ma = median(a.samples), mb = median(b.samples);
    if (ma != mb) return ma < mb;
    return a.name < b.name;
  });
  const std::vector<int> ranks = Ranker(treatments, seed, params).run();
  std::vector<RankedTreatment> out;
  for (std::size_t i = 0; i < treatments.size(); ++i)
    out.push_back({treatments[i].name, ranks[i], median(treatments[i].samples), iqr(treatments[i].samples)});
  return out;
}

std::map<std::string, int> scott_knott_ranks(std::vector<TreatmentSamples> treatments, std::uint64_t seed,
                                             const ScottKnottParams& params) {
  std::map<std::string, int> out;
  for (const auto& r : scott_knott(std::move(treatments), seed, params)) out[r.name] = r.rank;
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(Errc::EmptyInput, "percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double iqr(std::vector<double> values) { return percentile(values, 0.75) - percentile(values, 0.25); }

void write_rank_csv(std::ostream& out, std::span<const RankTableSection> sections) {
  out << "criterion,rank,treatment,median,iqr,better\n";
  for (const auto& s : sections)
    for (const auto& r : s.rows)
      out << s.criterion << ',' << r.rank << ',' << r.name << ',' << csv::format_number(r.median) << ','
          << csv::format_number(r.iqr) << ',' << (s.minimize ? "lower" : "higher") << '\n';
}

void write_rank_text(std::ostream& out, std::span<const RankTableSection> sections) {
  std::size_t name_width = 9;
  for (const auto& s : sections)
    for (const auto& r : s.rows) name_width = std::max(name_width, r.name.size());
  const auto flags = out.flags();
  for (const auto& s : sections) {
    out << s.criterion << " (" << (s.minimize ? "lower" : "higher") << " is better)\n";
    out << "  " << std::setw(4) << "rank" << "  " << std::left << std::setw(static_cast<int>(name_width))
        << "treatment" << std::right << "  " << std::setw(8) << "median" << "  " << std::setw(8) << "IQR" << '\n';
    for (const auto& r : s.rows)
      out << "  " << std::setw(4) << r.rank << "  " << std::left << std::setw(static_cast<int>(name_width)) << r.name
          << std::right << "  " << std::setw(8) << std::fixed << std::setprecision(1) << r.median << "  "
          << std::setw(8) << r.iqr << '\n';
    out.flags(flags);
    out << '\n';
  }
}

}  // namespace general
