#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genatk/attacks.hpp"
#include "genatk/siamese.hpp"

namespace genatk {

struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  static ScoredSet lambdas(std::span<const PllrRecord> records);
  static ScoredSet sigma_hats(std::span<const PllrRecord> records);
};

// Mann–Whitney AUC with midranks; tied positive/negative pairs count 0.5.
double roc_auc(const ScoredSet& s);

// Σ (R_k − R_{k−1})·P_k over descending distinct-score thresholds.
double aupr(const ScoredSet& s);

enum class CurveKind { kRoc, kPr };
using CurvePoint = std::pair<double, double>;

// ROC: (FPR, TPR) from (0,0) to (1,1). PR: (recall, precision) starting at
// (0,1), one point per distinct-score threshold.
std::vector<CurvePoint> curve_points(const ScoredSet& s, CurveKind kind);

struct Quantiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

// Linear interpolation between order statistics (h = (n−1)p).
Quantiles quartiles(std::vector<double> values);

struct GroupSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for n < 2
  Quantiles quartiles;
  double min = 0.0;
  double max = 0.0;
};

GroupSummary summarize(std::span<const double> values);

struct DeltaPllr {
  std::vector<double> delta;               // attacked λ − clean λ, by position
  std::map<int, GroupSummary> by_label;    // only labels that occur
};

DeltaPllr delta_pllr(std::span<const PllrRecord> clean, std::span<const PllrRecord> attacked);

struct FlipRecord {
  std::size_t id = 0;
  double clean_lambda = 0.0;
  double attacked_lambda = 0.0;
  double threshold = kLn3;
  bool flipped = false;
};

struct FlipSummary {
  std::vector<FlipRecord> records;
  double rate = 0.0;
};

FlipSummary flips(std::span<const PllrRecord> clean, std::span<const PllrRecord> attacked,
                  double threshold = kLn3);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
  double mean_diff = 0.0;
  // Zero variance with nonzero mean: t is ±inf and p is clamped to 1e-300.
  bool degenerate = false;
};

// d = after − before; two-tailed Student-t with n−1 degrees of freedom.
TTestResult paired_t_test(std::span<const double> before, std::span<const double> after);

struct SweepConfig {
  std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  TrainConfig train;
  FgsmConfig fgsm;
  std::size_t threads = 1;
};

struct SweepCell {
  double fraction = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  double clean_auc = 0.0;
  double clean_aupr = 0.0;
  double fgsm_auc = 0.0;
  double fgsm_aupr = 0.0;
};

struct SweepRow {
  double fraction = 0.0;
  std::size_t n_train = 0;
  double clean_auc_mean = 0.0, clean_auc_std = 0.0;
  double clean_aupr_mean = 0.0, clean_aupr_std = 0.0;
  double fgsm_auc_mean = 0.0, fgsm_auc_std = 0.0;
  double fgsm_aupr_mean = 0.0, fgsm_aupr_std = 0.0;
  std::size_t n_seeds = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // fraction-major, seeds in input order
  std::vector<SweepRow> rows;    // one per retained fraction
  std::vector<std::string> warnings;
};

// For each (fraction, seed): stratified subsample of `train`, fine-tune from
// `base`, score `eval` clean and under FGSM.
SweepResult sample_size_sweep(const std::vector<VariantPair>& train,
                              const std::vector<VariantPair>& eval, const ModelParams& base,
                              const SweepConfig& config);

// Subsample seed for one sweep cell; independent of scheduling order.
std::uint64_t sweep_cell_seed(std::uint64_t seed, std::size_t fraction_index);

}  // namespace genatk
