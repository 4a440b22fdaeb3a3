#pragma once

#include <string>
#include <vector>

#include "genatk/metrics.hpp"
#include "genatk/report.hpp"

namespace genatk {

struct PlotFile {
  std::string name;
  std::string svg;
};

// One report: roc, pr, lambda_hist, delta_lambda, flip_scatter and
// benign_waterfall. Several reports share the roc/pr overlays; the per-report
// plots get a _<attack> suffix and attack_comparison.svg is added.
std::vector<PlotFile> report_plots(const std::vector<EvalReport>& reports);

// Columns: attack,clean_auc,attacked_auc,auc_drop,clean_aupr,attacked_aupr,aupr_drop
std::string attack_comparison_csv(const std::vector<EvalReport>& reports);

// Columns: fraction,n_train,n_seeds,clean_auc_mean,clean_auc_std,
// clean_aupr_mean,clean_aupr_std,fgsm_auc_mean,fgsm_auc_std,fgsm_aupr_mean,fgsm_aupr_std
std::string sweep_csv(const SweepResult& result);
// Columns: fraction,seed,n_train,clean_auc,clean_aupr,fgsm_auc,fgsm_aupr
std::string sweep_cells_csv(const SweepResult& result);
// AUC and AUPR panels, mean lines with ±std bands. Each marker carries
// data-series, data-fraction and data-mean.
std::string sweep_svg(const SweepResult& result);

}  // namespace genatk
