#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "genatk/corpus.hpp"
#include "genatk/errors.hpp"
#include "genatk/metrics.hpp"

namespace genatk {

std::uint64_t sweep_cell_seed(std::uint64_t seed, std::size_t fraction_index) {
  // splitmix64 finalizer over (seed, index).
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + fraction_index + 1;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

struct Job {
  std::size_t fraction_index;
  std::size_t seed_index;
};

SweepCell run_cell(const std::vector<VariantPair>& train, const std::vector<VariantPair>& eval,
                   const ModelParams& base, const SweepConfig& config, const Job& job) {
  const double fraction = config.fractions[job.fraction_index];
  const std::uint64_t seed = config.seeds[job.seed_index];
  const auto subset = stratified_subsample(train, fraction, sweep_cell_seed(seed, job.fraction_index));
  const ModelParams tuned = finetune(subset, config.train, base, seed).params;

  const auto clean = score_pairs(eval, tuned, config.train.mode);
  FgsmConfig fgsm = config.fgsm;
  fgsm.mode = config.train.mode;
  std::vector<PllrRecord> attacked;
  for (auto& r : fgsm_attack_set(eval, tuned, fgsm)) attacked.push_back(r.adversarial);

  SweepCell cell;
  cell.fraction = fraction;
  cell.seed = seed;
  cell.n_train = subset.size();
  cell.clean_auc = roc_auc(ScoredSet::lambdas(clean));
  cell.clean_aupr = aupr(ScoredSet::lambdas(clean));
  cell.fgsm_auc = roc_auc(ScoredSet::lambdas(attacked));
  cell.fgsm_aupr = aupr(ScoredSet::lambdas(attacked));
  return cell;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  const GroupSummary g = summarize(v);
  return {g.mean, g.std};
}

}  // namespace

SweepResult sample_size_sweep(const std::vector<VariantPair>& train,
                              const std::vector<VariantPair>& eval, const ModelParams& base,
                              const SweepConfig& config) {
  if (config.fractions.empty()) throw ConfigError("sweep needs at least one fraction");
  if (config.seeds.empty()) throw ConfigError("sweep needs at least one seed");
  if (train.empty()) throw EmptyDataError("sweep training set is empty");
  if (eval.empty()) throw EmptyDataError("sweep evaluation set is empty");
  config.train.validate();
  config.fgsm.validate();

  SweepResult result;
  std::vector<std::size_t> kept;
  for (std::size_t f = 0; f < config.fractions.size(); ++f) {
    const double fraction = config.fractions[f];
    if (!(fraction > 0.0 && fraction <= 1.0)) {
      throw ConfigError("sweep fraction " + std::to_string(fraction) + " is outside (0, 1]");
    }
    const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(train.size()) - 1e-9));
    if (n < 2) {
      std::ostringstream msg;
      msg << "fraction " << fraction << " yields " << n << " training pair(s); skipped";
      result.warnings.push_back(msg.str());
      continue;
    }
    kept.push_back(f);
  }

  std::vector<Job> jobs;
  for (auto f : kept)
    for (std::size_t s = 0; s < config.seeds.size(); ++s) jobs.push_back({f, s});

  std::vector<std::optional<SweepCell>> cells(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      try {
        cells[j] = run_cell(train, eval, base, config, jobs[j]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(config.threads, 1, std::max<std::size_t>(jobs.size(), 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (auto& c : cells) result.cells.push_back(*c);

  for (auto f : kept) {
    std::vector<double> ca, cp, fa, fp;
    SweepRow row;
    row.fraction = config.fractions[f];
    for (const auto& c : result.cells) {
      if (c.fraction != row.fraction) continue;
      row.n_train = c.n_train;
      ca.push_back(c.clean_auc);
      cp.push_back(c.clean_aupr);
      fa.push_back(c.fgsm_auc);
      fp.push_back(c.fgsm_aupr);
    }
    std::tie(row.clean_auc_mean, row.clean_auc_std) = mean_std(ca);
    std::tie(row.clean_aupr_mean, row.clean_aupr_std) = mean_std(cp);
    std::tie(row.fgsm_auc_mean, row.fgsm_auc_std) = mean_std(fa);
    std::tie(row.fgsm_aupr_mean, row.fgsm_aupr_std) = mean_std(fp);
    row.n_seeds = ca.size();
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace genatk
