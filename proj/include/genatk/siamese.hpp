#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "genatk/encoder.hpp"
#include "genatk/optim.hpp"
#include "genatk/soft_prompt.hpp"
#include "genatk/variant.hpp"

namespace genatk {

enum class PllMode {
  kSinglePass,       // one unmasked forward, read log P(s_i) at every position
  kPerPositionMask,  // L forwards, position i masked in the i-th
};

const char* to_string(PllMode mode);
PllMode pll_mode_from_string(const std::string& s);

// Decision point of the calibration: σ̂(ln 3) = 0.5.
inline const double kLn3 = 1.0986122886681098;

// Probability floor/ceiling applied before logs in every BCE-style loss.
inline constexpr double kProbFloor = 1e-12;

// σ̂(λ) = 2σ(λ) − 1.
double calibrate(double lambda);

struct PllrRecord {
  std::size_t id = 0;
  double pll_wt = 0.0;
  double pll_mut = 0.0;
  double lambda = 0.0;
  double sigma_hat = 0.0;
  int label = 0;
};

// Model input for one branch. `rows` replaces the token embeddings (FGSM);
// `prompt` is prepended in embedding space; `key_mask` restricts attention.
struct BranchInput {
  std::optional<ad::Var> rows;
  std::optional<ad::Var> prompt;
  std::vector<bool> key_mask;
};

// PLL of `seq` as a scalar on the tape. With a prompt of n rows the sum runs
// over the original positions only (rows n .. n+L-1).
ad::Var pll_on_tape(const ParamVars& pv, const TokenSequence& seq, PllMode mode,
                    const BranchInput& input = {});

struct SiameseTerms {
  ad::Var pll_wt;
  ad::Var pll_mut;
  ad::Var lambda;
  ad::Var sigma_hat;
};

// Both branches share `pv`: one parameter registration, two forwards.
SiameseTerms siamese_forward(const ParamVars& pv, const VariantPair& pair, PllMode mode,
                             const BranchInput& wt_input = {}, const BranchInput& mut_input = {});

// −[y·log σ̂ + (1−y)·log(1−σ̂)] with σ̂ clamped to [1e-12, 1−1e-12].
ad::Var bce_loss(ad::Var sigma_hat, int label);
double bce_loss(const PllrRecord& record);

PllrRecord record_from(const SiameseTerms& terms, int label, std::size_t id = 0);

double pll(const TokenSequence& seq, const ModelParams& params, PllMode mode = PllMode::kSinglePass);

PllrRecord pllr(const VariantPair& pair, const ModelParams& params,
                const SoftPrompt* prompt = nullptr, PllMode mode = PllMode::kSinglePass,
                std::size_t id = 0);

// Scores every pair; record ids are the list indices.
std::vector<PllrRecord> score_pairs(const std::vector<VariantPair>& pairs, const ModelParams& params,
                                    PllMode mode = PllMode::kSinglePass,
                                    const SoftPrompt* prompt = nullptr);

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 4;
  std::size_t epochs = 10;
  PllMode mode = PllMode::kSinglePass;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  AdamConfig adam() const { return {lr, beta1, beta2, adam_eps}; }
};

struct FinetuneResult {
  ModelParams params;
  std::vector<double> epoch_losses;  // mean batch loss per epoch
};

using FinetuneCallback = std::function<void(std::size_t epoch, double mean_loss, const ModelParams&)>;

// Minimizes the calibrated BCE over all encoder parameters.
FinetuneResult finetune(const std::vector<VariantPair>& train, const TrainConfig& config,
                        ModelParams params, std::uint64_t seed,
                        const FinetuneCallback& on_epoch = {});

// Two weight-sharing branches over one ModelParams object.
class Siamese {
 public:
  class Branch {
   public:
    explicit Branch(std::shared_ptr<ModelParams> params) : params_(std::move(params)) {}
    ModelParams& params() { return *params_; }
    double pll(const TokenSequence& seq, PllMode mode = PllMode::kSinglePass) const {
      return genatk::pll(seq, *params_, mode);
    }

   private:
    std::shared_ptr<ModelParams> params_;
  };

  explicit Siamese(ModelParams params)
      : params_(std::make_shared<ModelParams>(std::move(params))), wt_(params_), mut_(params_) {}

  Branch& wt_branch() { return wt_; }
  Branch& mut_branch() { return mut_; }
  const ModelParams& params() const { return *params_; }
  PllrRecord score(const VariantPair& pair, PllMode mode = PllMode::kSinglePass) const {
    return pllr(pair, *params_, nullptr, mode);
  }

 private:
  std::shared_ptr<ModelParams> params_;
  Branch wt_;
  Branch mut_;
};

}  // namespace genatk
