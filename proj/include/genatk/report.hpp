#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "genatk/attacks.hpp"
#include "genatk/metrics.hpp"

namespace genatk {

struct ReportRow {
  std::size_t id = 0;
  int label = 0;
  double clean_lambda = 0.0;
  double clean_sigma_hat = 0.0;
  double attacked_lambda = 0.0;
  double attacked_sigma_hat = 0.0;
  double delta_lambda = 0.0;
  bool flipped = false;
  // Per-sample attack objective on the attacked record; 0 when the sample
  // is excluded from the objective (pathogenic rows of sp-targeted).
  double attack_loss = 0.0;
  bool contributes = true;
};

struct ReportAggregates {
  std::size_t n = 0;
  std::size_t n_benign = 0;
  std::size_t n_pathogenic = 0;
  double clean_auc = 0.0;
  double attacked_auc = 0.0;
  double clean_aupr = 0.0;
  double attacked_aupr = 0.0;
  double threshold = kLn3;
  double flip_rate = 0.0;
  double mean_delta_benign = 0.0;
  double mean_delta_pathogenic = 0.0;
  // Benign λ, clean vs attacked; absent with fewer than two benign rows.
  std::optional<TTestResult> benign_ttest;
};

struct EvalReport {
  AttackKind attack = AttackKind::kFgsm;
  std::string model_digest;  // digest of the model that was attacked
  std::string eval_digest;   // digest of the evaluation set
  std::string manifest;
  nlohmann::json attack_config = nlohmann::json::object();
  std::vector<ReportRow> rows;
  ReportAggregates aggregates;
};

EvalReport make_report(AttackKind attack, const std::vector<PllrRecord>& clean,
                       const std::vector<PllrRecord>& attacked, double threshold = kLn3);

// Everything in ReportAggregates is a function of the rows.
ReportAggregates compute_aggregates(const std::vector<ReportRow>& rows, double threshold);

// Columns: id,label,clean_lambda,clean_sigma_hat,attacked_lambda,
// attacked_sigma_hat,delta_lambda,flipped,attack_loss,contributes
std::string samples_csv(const std::vector<ReportRow>& rows);
std::vector<ReportRow> parse_samples_csv(std::string_view text);

nlohmann::json report_json(const EvalReport& report);
// Throws FormatError when stored aggregates disagree with the rows.
EvalReport report_from_json(const nlohmann::json& j);
void check_consistency(const EvalReport& report);

std::string report_file_name(AttackKind attack);   // report_<kind>.json
std::string samples_file_name(AttackKind attack);  // samples_<kind>.csv

// Writes both files into `dir` and returns the JSON path.
std::filesystem::path write_report(const std::filesystem::path& dir, const EvalReport& report);
// Loads the JSON and cross-checks it against the sibling CSV.
EvalReport load_report(const std::filesystem::path& json_path);

}  // namespace genatk
