#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "genatk/siamese.hpp"
#include "genatk/soft_prompt.hpp"

namespace genatk {

enum class AttackKind { kFgsm, kSpHijack, kSpTargeted };
enum class UpdateScope { kPromptOnly, kPromptAndModel };

const char* to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& s);
const char* to_string(UpdateScope scope);
UpdateScope update_scope_from_string(const std::string& s);

struct FgsmConfig {
  double epsilon = 0.01;
  PllMode mode = PllMode::kSinglePass;

  // Rejects negative or non-finite epsilon; epsilon 0 is the identity attack.
  void validate() const;
};

struct FgsmResult {
  PllrRecord clean;
  PllrRecord adversarial;
  double loss_clean = 0.0;
  double loss_adversarial = 0.0;
  // ε·sign(∇) for each branch's token-embedding rows.
  Tensor delta_wt;
  Tensor delta_mut;
  Tensor grad_wt;
  Tensor grad_mut;
};

// One signed-gradient step on both branches' token embeddings (after lookup,
// before positional addition), ascending the calibrated BCE of the true label.
FgsmResult fgsm_perturb(const VariantPair& pair, const ModelParams& params, const FgsmConfig& cfg,
                        std::size_t id = 0);

// fgsm_perturb over a list; record ids are list indices.
std::vector<FgsmResult> fgsm_attack_set(const std::vector<VariantPair>& pairs,
                                        const ModelParams& params, const FgsmConfig& cfg);

// Root-mean-square of the token-embedding table; the natural unit for ε.
double embedding_rms(const ModelParams& params);

struct AttackConfig {
  AttackKind kind = AttackKind::kSpTargeted;
  double lr = 1e-4;
  std::size_t batch_size = 4;
  std::size_t epochs = 10;
  UpdateScope scope = UpdateScope::kPromptOnly;
  std::size_t prompt_length = 10;
  PllMode mode = PllMode::kSinglePass;

  void validate() const;
};

// Per-sample attack objective on the tape. sp-hijack: BCE against the flipped
// label. sp-targeted: −log σ̂ for benign samples, nothing for pathogenic ones.
std::optional<ad::Var> attack_loss(AttackKind kind, ad::Var sigma_hat, int label);
double attack_loss(AttackKind kind, const PllrRecord& record);

struct AttackGradients {
  double loss = 0.0;             // mean over contributing samples
  std::size_t contributing = 0;  // samples that produced a loss term
  TensorMap grads;               // "prompt" plus model tensors under prompt-and-model
};

AttackGradients attack_gradients(const std::vector<VariantPair>& batch, const ModelParams& params,
                                 const SoftPrompt& prompt, const AttackConfig& cfg);

struct AttackTrainResult {
  SoftPrompt prompt;
  ModelParams params;  // unchanged under prompt-only scope
  std::vector<double> epoch_losses;
};

AttackTrainResult sp_attack_train(const std::vector<VariantPair>& data, const ModelParams& params,
                                  const AttackConfig& cfg, std::uint64_t seed);

struct PromptApplyOptions {
  PllMode mode = PllMode::kSinglePass;
  // Hide the prompt rows from every attention query (ablation).
  bool mask_prompt_from_attention = false;
};

PllrRecord sp_apply(const VariantPair& pair, const SoftPrompt& prompt, const ModelParams& params,
                    const PromptApplyOptions& opts = {}, std::size_t id = 0);

}  // namespace genatk
