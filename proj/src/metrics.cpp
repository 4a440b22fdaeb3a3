#include "genatk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

#include "genatk/errors.hpp"

namespace genatk {

ScoredSet ScoredSet::lambdas(std::span<const PllrRecord> records) {
  ScoredSet s;
  for (const auto& r : records) {
    s.scores.push_back(r.lambda);
    s.labels.push_back(r.label);
  }
  return s;
}

ScoredSet ScoredSet::sigma_hats(std::span<const PllrRecord> records) {
  ScoredSet s;
  for (const auto& r : records) {
    s.scores.push_back(r.sigma_hat);
    s.labels.push_back(r.label);
  }
  return s;
}

namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts check_set(const ScoredSet& s) {
  if (s.scores.size() != s.labels.size()) {
    throw DataError("scores and labels differ in length (" + std::to_string(s.scores.size()) + " vs " +
                    std::to_string(s.labels.size()) + ")");
  }
  if (s.scores.empty()) throw MetricUndefinedError("metric of an empty set is undefined");
  ClassCounts c;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    if (!std::isfinite(s.scores[i])) throw NumericError("non-finite score at index " + std::to_string(i));
    if (s.labels[i] == 1) ++c.pos;
    else if (s.labels[i] == 0) ++c.neg;
    else throw DataError("label at index " + std::to_string(i) + " is not 0 or 1");
  }
  return c;
}

void require_both(const ClassCounts& c) {
  if (c.pos == 0 || c.neg == 0) throw MetricUndefinedError("ranking metric needs both classes present");
}

// Distinct-score groups in descending score order, with class counts.
struct Group {
  double score;
  std::size_t pos;
  std::size_t neg;
};

std::vector<Group> descending_groups(const ScoredSet& s) {
  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s.scores[a] > s.scores[b]; });
  std::vector<Group> groups;
  for (auto i : order) {
    if (groups.empty() || s.scores[i] != groups.back().score) groups.push_back({s.scores[i], 0, 0});
    (s.labels[i] == 1 ? groups.back().pos : groups.back().neg)++;
  }
  return groups;
}

}  // namespace

double roc_auc(const ScoredSet& s) {
  const ClassCounts c = check_set(s);
  require_both(c);
  // Half-integer pair counts stay exact in double for any realistic n.
  double concordant = 0.0;
  std::size_t neg_below = c.neg;
  for (const Group& g : descending_groups(s)) {
    neg_below -= g.neg;
    concordant += static_cast<double>(g.pos) * static_cast<double>(neg_below) +
                  0.5 * static_cast<double>(g.pos) * static_cast<double>(g.neg);
  }
  return concordant / (static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

double aupr(const ScoredSet& s) {
  const ClassCounts c = check_set(s);
  if (c.pos == 0) throw MetricUndefinedError("AUPR needs at least one positive");
  double area = 0.0;
  std::size_t tp = 0, fp = 0;
  for (const Group& g : descending_groups(s)) {
    if (g.pos == 0) {
      fp += g.neg;
      continue;
    }
    tp += g.pos;
    fp += g.neg;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += static_cast<double>(g.pos) / static_cast<double>(c.pos) * precision;
  }
  return area;
}

std::vector<CurvePoint> curve_points(const ScoredSet& s, CurveKind kind) {
  const ClassCounts c = check_set(s);
  std::vector<CurvePoint> pts;
  std::size_t tp = 0, fp = 0;
  if (kind == CurveKind::kRoc) {
    require_both(c);
    pts.emplace_back(0.0, 0.0);
    for (const Group& g : descending_groups(s)) {
      tp += g.pos;
      fp += g.neg;
      pts.emplace_back(static_cast<double>(fp) / static_cast<double>(c.neg),
                       static_cast<double>(tp) / static_cast<double>(c.pos));
    }
    return pts;
  }
  if (c.pos == 0) throw MetricUndefinedError("PR curve needs at least one positive");
  pts.emplace_back(0.0, 1.0);
  for (const Group& g : descending_groups(s)) {
    tp += g.pos;
    fp += g.neg;
    pts.emplace_back(static_cast<double>(tp) / static_cast<double>(c.pos),
                     static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  return pts;
}

Quantiles quartiles(std::vector<double> values) {
  if (values.empty()) throw MetricUndefinedError("quartiles of an empty list");
  std::sort(values.begin(), values.end());
  auto at = [&](double p) {
    const double h = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

GroupSummary summarize(std::span<const double> values) {
  if (values.empty()) throw MetricUndefinedError("summary of an empty list");
  GroupSummary g;
  g.n = values.size();
  g.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(g.n);
  if (g.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - g.mean) * (v - g.mean);
    g.std = std::sqrt(ss / static_cast<double>(g.n - 1));
  }
  g.quartiles = quartiles({values.begin(), values.end()});
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  g.min = *mn;
  g.max = *mx;
  return g;
}

namespace {

void check_aligned(std::span<const PllrRecord> clean, std::span<const PllrRecord> attacked) {
  if (clean.size() != attacked.size()) {
    throw DataError("clean and attacked record lists differ in length (" + std::to_string(clean.size()) +
                    " vs " + std::to_string(attacked.size()) + ")");
  }
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i].id != attacked[i].id || clean[i].label != attacked[i].label) {
      throw DataError("records misaligned at position " + std::to_string(i) + " (ids " +
                      std::to_string(clean[i].id) + " / " + std::to_string(attacked[i].id) + ")");
    }
  }
}

}  // namespace

DeltaPllr delta_pllr(std::span<const PllrRecord> clean, std::span<const PllrRecord> attacked) {
  check_aligned(clean, attacked);
  DeltaPllr out;
  std::map<int, std::vector<double>> grouped;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double d = attacked[i].lambda - clean[i].lambda;
    out.delta.push_back(d);
    grouped[clean[i].label].push_back(d);
  }
  for (const auto& [label, values] : grouped) out.by_label.emplace(label, summarize(values));
  return out;
}

FlipSummary flips(std::span<const PllrRecord> clean, std::span<const PllrRecord> attacked,
                  double threshold) {
  check_aligned(clean, attacked);
  if (!std::isfinite(threshold)) throw NumericError("flip threshold must be finite");
  FlipSummary out;
  std::size_t count = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    FlipRecord r;
    r.id = clean[i].id;
    r.clean_lambda = clean[i].lambda;
    r.attacked_lambda = attacked[i].lambda;
    r.threshold = threshold;
    r.flipped = (r.clean_lambda >= threshold) != (r.attacked_lambda >= threshold);
    count += r.flipped;
    out.records.push_back(r);
  }
  out.rate = clean.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(clean.size());
  return out;
}

TTestResult paired_t_test(std::span<const double> before, std::span<const double> after) {
  if (before.size() != after.size()) throw ContractError("paired t-test needs equal-length samples");
  if (before.size() < 2) throw ContractError("paired t-test needs n >= 2");
  const std::size_t n = before.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = after[i] - before[i];
    if (!std::isfinite(d[i])) throw NumericError("non-finite value in paired t-test input");
  }
  TTestResult r;
  r.df = n - 1;
  r.mean_diff = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - r.mean_diff) * (v - r.mean_diff);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) return r;
  if (sd == 0.0) {
    r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
    r.p = 1e-300;
    r.degenerate = true;
    return r;
  }
  r.t = r.mean_diff / (sd / std::sqrt(static_cast<double>(n)));
  const double df = static_cast<double>(r.df);
  r.p = boost::math::ibeta(df / 2.0, 0.5, df / (df + r.t * r.t));
  r.p = std::clamp(r.p, 1e-300, 1.0);
  return r;
}

}  // namespace genatk
