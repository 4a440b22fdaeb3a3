#include "genatk/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "genatk/errors.hpp"

namespace genatk {

const char* to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kSpHijack: return "sp-hijack";
    case AttackKind::kSpTargeted: return "sp-targeted";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "fgsm") return AttackKind::kFgsm;
  if (s == "sp-hijack") return AttackKind::kSpHijack;
  if (s == "sp-targeted") return AttackKind::kSpTargeted;
  throw ConfigError("unknown attack kind '" + s + "' (expected fgsm, sp-hijack or sp-targeted)");
}

const char* to_string(UpdateScope scope) {
  return scope == UpdateScope::kPromptOnly ? "prompt-only" : "prompt-and-model";
}

UpdateScope update_scope_from_string(const std::string& s) {
  if (s == "prompt-only") return UpdateScope::kPromptOnly;
  if (s == "prompt-and-model") return UpdateScope::kPromptAndModel;
  throw ConfigError("unknown update scope '" + s + "'");
}

void FgsmConfig::validate() const {
  if (!std::isfinite(epsilon) || epsilon < 0.0) {
    throw ConfigError("epsilon must be finite and non-negative");
  }
}

double embedding_rms(const ModelParams& params) {
  const Tensor& t = params.at("tok_emb");
  double ss = 0.0;
  for (double v : t.data()) ss += v * v;
  return std::sqrt(ss / static_cast<double>(t.size()));
}

namespace {

Tensor signed_step(const Tensor& grad, double epsilon) {
  Tensor out = grad.zeros_like();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (grad[i] > 0) out[i] = epsilon;
    else if (grad[i] < 0) out[i] = -epsilon;
  }
  return out;
}

struct BranchPass {
  PllrRecord record;
  double loss = 0.0;
  Tensor grad_wt;
  Tensor grad_mut;
};

BranchPass run_on_embeddings(const VariantPair& pair, const ModelParams& params, const Tensor& emb_wt,
                             const Tensor& emb_mut, PllMode mode, std::size_t id, bool with_grad) {
  ad::Tape tape;
  ParamVars pv(tape, params, ad::LeafKind::kConstant);
  BranchInput wt_in, mut_in;
  wt_in.rows = tape.perturbable(emb_wt);
  mut_in.rows = tape.perturbable(emb_mut);
  SiameseTerms terms = siamese_forward(pv, pair, mode, wt_in, mut_in);
  ad::Var loss = bce_loss(terms.sigma_hat, pair.label);
  BranchPass out;
  out.record = record_from(terms, pair.label, id);
  out.loss = loss.value().item();
  if (with_grad) {
    const auto grads = tape.backward(loss);
    out.grad_wt = grads.wrt(*wt_in.rows);
    out.grad_mut = grads.wrt(*mut_in.rows);
  }
  return out;
}

}  // namespace

FgsmResult fgsm_perturb(const VariantPair& pair, const ModelParams& params, const FgsmConfig& cfg,
                        std::size_t id) {
  cfg.validate();
  if (!params.all_finite()) throw NumericError("fgsm: model parameters are not finite");
  const Tensor emb_wt = embed_values(params, pair.wt);
  const Tensor emb_mut = embed_values(params, pair.mut);

  BranchPass clean = run_on_embeddings(pair, params, emb_wt, emb_mut, cfg.mode, id, true);

  FgsmResult r;
  r.clean = clean.record;
  r.loss_clean = clean.loss;
  r.grad_wt = std::move(clean.grad_wt);
  r.grad_mut = std::move(clean.grad_mut);
  r.delta_wt = signed_step(r.grad_wt, cfg.epsilon);
  r.delta_mut = signed_step(r.grad_mut, cfg.epsilon);

  Tensor adv_wt = emb_wt;
  adv_wt += r.delta_wt;
  Tensor adv_mut = emb_mut;
  adv_mut += r.delta_mut;
  BranchPass adv = run_on_embeddings(pair, params, adv_wt, adv_mut, cfg.mode, id, false);
  r.adversarial = adv.record;
  r.loss_adversarial = adv.loss;
  return r;
}

std::vector<FgsmResult> fgsm_attack_set(const std::vector<VariantPair>& pairs,
                                        const ModelParams& params, const FgsmConfig& cfg) {
  std::vector<FgsmResult> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out.push_back(fgsm_perturb(pairs[i], params, cfg, i));
  return out;
}

void AttackConfig::validate() const {
  if (kind == AttackKind::kFgsm) {
    throw ContractError("soft-prompt training requires kind sp-hijack or sp-targeted, not fgsm");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("attack learning rate must be positive");
  if (batch_size == 0) throw ConfigError("attack batch size must be positive");
  if (prompt_length == 0) throw ConfigError("prompt length must be at least 1");
}

std::optional<ad::Var> attack_loss(AttackKind kind, ad::Var sigma_hat, int label) {
  switch (kind) {
    case AttackKind::kSpHijack:
      return bce_loss(sigma_hat, 1 - label);
    case AttackKind::kSpTargeted:
      if (label == 0) return bce_loss(sigma_hat, 1);
      return std::nullopt;
    case AttackKind::kFgsm:
      return bce_loss(sigma_hat, label);
  }
  return std::nullopt;
}

double attack_loss(AttackKind kind, const PllrRecord& record) {
  PllrRecord r = record;
  switch (kind) {
    case AttackKind::kSpHijack:
      r.label = 1 - record.label;
      return bce_loss(r);
    case AttackKind::kSpTargeted:
      if (record.label != 0) return 0.0;
      r.label = 1;
      return bce_loss(r);
    case AttackKind::kFgsm:
      return bce_loss(record);
  }
  return 0.0;
}

AttackGradients attack_gradients(const std::vector<VariantPair>& batch, const ModelParams& params,
                                 const SoftPrompt& prompt, const AttackConfig& cfg) {
  if (prompt.dim() != params.config.d_model) {
    throw ContractError("prompt width " + std::to_string(prompt.dim()) + " does not match d_model " +
                        std::to_string(params.config.d_model));
  }
  const bool train_model = cfg.scope == UpdateScope::kPromptAndModel;
  ad::Tape tape;
  ParamVars pv(tape, params, train_model ? ad::LeafKind::kTrainable : ad::LeafKind::kConstant);
  BranchInput in;
  in.prompt = tape.trainable(prompt.embeddings());

  std::vector<ad::Var> terms;
  for (const auto& pair : batch) {
    // Samples without a loss term are not run at all; their gradient is zero.
    if (cfg.kind == AttackKind::kSpTargeted && pair.label != 0) continue;
    SiameseTerms t = siamese_forward(pv, pair, cfg.mode, in, in);
    if (auto loss = attack_loss(cfg.kind, t.sigma_hat, pair.label)) terms.push_back(*loss);
  }

  AttackGradients out;
  out.contributing = terms.size();
  if (terms.empty()) {
    out.grads.emplace("prompt", prompt.embeddings().zeros_like());
    return out;
  }
  ad::Var loss = ad::scale(ad::add_all(terms), 1.0 / static_cast<double>(terms.size()));
  out.loss = loss.value().item();
  const auto grads = tape.backward(loss);
  out.grads.emplace("prompt", grads.wrt(*in.prompt));
  if (train_model) {
    for (auto& [name, g] : pv.gradients(grads)) out.grads.emplace(name, std::move(g));
  }
  return out;
}

AttackTrainResult sp_attack_train(const std::vector<VariantPair>& data, const ModelParams& params,
                                  const AttackConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (data.empty()) throw EmptyDataError("attack training set is empty");
  if (cfg.kind == AttackKind::kSpTargeted &&
      std::none_of(data.begin(), data.end(), [](const VariantPair& p) { return p.label == 0; })) {
    throw DataError("targeted soft-prompt attack needs at least one benign sample");
  }

  AttackTrainResult result;
  result.prompt = SoftPrompt::xavier_uniform(cfg.prompt_length, params.config.d_model, seed);
  result.params = params;
  const bool train_model = cfg.scope == UpdateScope::kPromptAndModel;

  TensorMap trainable;
  trainable.emplace("prompt", result.prompt.embeddings());
  if (train_model) {
    for (const auto& [name, t] : params.tensors) trainable.emplace(name, t);
  }

  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
  AdamState state;
  AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<VariantPair> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      AttackGradients g = attack_gradients(batch, result.params, result.prompt, cfg);
      if (g.contributing == 0) continue;
      adam_step(trainable, g.grads, state, adam);
      result.prompt.embeddings() = trainable.at("prompt");
      if (train_model) {
        for (auto& [name, t] : result.params.tensors) t = trainable.at(name);
      }
      loss_sum += g.loss;
      ++steps;
    }
    result.epoch_losses.push_back(steps ? loss_sum / static_cast<double>(steps) : 0.0);
  }
  if (!result.prompt.embeddings().all_finite()) throw NumericError("soft prompt became non-finite");
  return result;
}

PllrRecord sp_apply(const VariantPair& pair, const SoftPrompt& prompt, const ModelParams& params,
                    const PromptApplyOptions& opts, std::size_t id) {
  if (prompt.embeddings().empty() || prompt.length() == 0) {
    throw ContractError("soft prompt must have at least one row");
  }
  if (prompt.dim() != params.config.d_model) {
    throw ContractError("prompt width " + std::to_string(prompt.dim()) + " does not match d_model " +
                        std::to_string(params.config.d_model));
  }
  ad::Tape tape;
  ParamVars pv(tape, params, ad::LeafKind::kConstant);
  BranchInput in;
  in.prompt = tape.constant(prompt.embeddings());
  BranchInput wt_in = in, mut_in = in;
  if (opts.mask_prompt_from_attention) {
    auto mask_for = [&](std::size_t len) {
      std::vector<bool> m(prompt.length() + len, true);
      std::fill_n(m.begin(), prompt.length(), false);
      return m;
    };
    wt_in.key_mask = mask_for(pair.wt.length());
    mut_in.key_mask = mask_for(pair.mut.length());
  }
  return record_from(siamese_forward(pv, pair, opts.mode, wt_in, mut_in), pair.label, id);
}

}  // namespace genatk
