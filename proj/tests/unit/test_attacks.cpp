#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "genatk/attacks.hpp"
#include "genatk/corpus.hpp"
#include "genatk/digest.hpp"
#include "genatk/errors.hpp"
#include "gradcheck.hpp"
#include "model_check.hpp"

using namespace genatk;

namespace {

TokenSequence seq(const char* s) { return TokenSequence::from_string(s); }

ModelParams tuned_tiny() {
  SyntheticSpec spec;
  spec.n_pairs = 48;
  spec.seq_len = 12;
  spec.motif = "WCH";
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.epochs = 3;
  return finetune(generate(spec, 1), tc, ModelParams::init(modelcheck::tiny_config(), 2), 3).params;
}

std::vector<VariantPair> small_set(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_pairs = 24;
  spec.seq_len = 12;
  spec.motif = "WCH";
  return generate(spec, seed);
}

}  // namespace

TEST_CASE("epsilon zero reproduces the clean record bit for bit") {
  const auto params = tuned_tiny();
  for (const auto& p : small_set(4)) {
    FgsmConfig cfg;
    cfg.epsilon = 0.0;
    const auto r = fgsm_perturb(p, params, cfg);
    CHECK(r.adversarial.lambda == r.clean.lambda);
    CHECK(r.adversarial.sigma_hat == r.clean.sigma_hat);
    CHECK(r.loss_adversarial == r.loss_clean);
  }
}

TEST_CASE("FGSM perturbation is exactly epsilon times the gradient sign") {
  const auto params = tuned_tiny();
  FgsmConfig cfg;
  cfg.epsilon = 0.03;
  for (const auto& p : small_set(5)) {
    const auto r = fgsm_perturb(p, params, cfg);
    for (const auto* pair : {&r.delta_wt, &r.delta_mut}) {
      const Tensor& grad = pair == &r.delta_wt ? r.grad_wt : r.grad_mut;
      for (std::size_t i = 0; i < pair->size(); ++i) {
        const double d = (*pair)[i];
        CHECK((d == cfg.epsilon || d == -cfg.epsilon || d == 0.0));
        if (grad[i] > 0) CHECK(d == cfg.epsilon);
        if (grad[i] < 0) CHECK(d == -cfg.epsilon);
        if (grad[i] == 0) CHECK(d == 0.0);
      }
    }
  }
}

TEST_CASE("FGSM embedding gradient matches finite differences") {
  const auto params = tuned_tiny();
  const auto p = small_set(6)[0];
  const Tensor wt = embed_values(params, p.wt);
  const Tensor mut = embed_values(params, p.mut);
  gradcheck::Fn f = [&](ad::Tape& tape, const std::vector<ad::Var>& v) {
    ParamVars pv(tape, params, ad::LeafKind::kConstant);
    BranchInput a, b;
    a.rows = v[0];
    b.rows = v[1];
    return bce_loss(siamese_forward(pv, p, PllMode::kSinglePass, a, b).sigma_hat, p.label);
  };
  CHECK(gradcheck::check(f, {wt, mut}, 1).max_rel_error < 1e-4);
}

TEST_CASE("loss increase matches epsilon times the gradient L1 norm to first order") {
  const auto params = tuned_tiny();
  FgsmConfig cfg;
  cfg.epsilon = 1e-6;
  for (const auto& p : small_set(7)) {
    const auto r = fgsm_perturb(p, params, cfg);
    double l1 = 0.0;
    for (double g : r.grad_wt.data()) l1 += std::abs(g);
    for (double g : r.grad_mut.data()) l1 += std::abs(g);
    if (l1 < 1e-6) continue;
    const double predicted = cfg.epsilon * l1;
    CHECK(std::abs((r.loss_adversarial - r.loss_clean) - predicted) <= 5e-2 * predicted);
  }
}

TEST_CASE("attack losses per kind") {
  PllrRecord r;
  r.lambda = std::log(3.0);
  r.sigma_hat = calibrate(r.lambda);
  r.label = 0;
  CHECK(std::abs(attack_loss(AttackKind::kSpHijack, r) - std::log(2.0)) < 1e-12);
  CHECK(std::abs(attack_loss(AttackKind::kSpTargeted, r) - std::log(2.0)) < 1e-12);
  r.label = 1;
  CHECK(attack_loss(AttackKind::kSpTargeted, r) == 0.0);
  r.lambda = 2.0;
  r.sigma_hat = calibrate(2.0);
  CHECK(std::abs(attack_loss(AttackKind::kSpHijack, r) + std::log(1.0 - r.sigma_hat)) < 1e-12);
}

TEST_CASE("targeted prompt gradient over a mixed batch equals the benign-only gradient") {
  const auto params = tuned_tiny();
  const auto data = small_set(8);
  std::vector<VariantPair> benign;
  for (const auto& p : data)
    if (p.label == 0) benign.push_back(p);
  REQUIRE(benign.size() < data.size());
  const auto prompt = SoftPrompt::xavier_uniform(3, params.config.d_model, 1);
  AttackConfig cfg;
  cfg.kind = AttackKind::kSpTargeted;
  const auto full = attack_gradients(data, params, prompt, cfg);
  const auto only = attack_gradients(benign, params, prompt, cfg);
  CHECK(full.contributing == benign.size());
  CHECK(full.grads.at("prompt") == only.grads.at("prompt"));

  std::vector<VariantPair> pathogenic;
  for (const auto& p : data)
    if (p.label == 1) pathogenic.push_back(p);
  const auto none = attack_gradients(pathogenic, params, prompt, cfg);
  CHECK(none.contributing == 0);
  for (double g : none.grads.at("prompt").data()) CHECK(g == 0.0);
}

TEST_CASE("prompt gradient matches finite differences for both soft-prompt losses") {
  const auto params = tuned_tiny();
  const auto data = small_set(9);
  std::vector<VariantPair> batch;
  for (int want : {0, 1, 0})
    for (const auto& p : data)
      if (p.label == want && std::find(batch.begin(), batch.end(), p) == batch.end()) {
        batch.push_back(p);
        break;
      }
  REQUIRE(batch.size() == 3);
  for (auto kind : {AttackKind::kSpHijack, AttackKind::kSpTargeted}) {
    AttackConfig cfg;
    cfg.kind = kind;
    gradcheck::Fn f = [&](ad::Tape& tape, const std::vector<ad::Var>& v) {
      ParamVars pv(tape, params, ad::LeafKind::kConstant);
      BranchInput in;
      in.prompt = v[0];
      std::vector<ad::Var> terms;
      for (const auto& p : batch) {
        auto t = siamese_forward(pv, p, PllMode::kSinglePass, in, in);
        if (auto l = attack_loss(kind, t.sigma_hat, p.label)) terms.push_back(*l);
      }
      return ad::add_all(terms);
    };
    const auto prompt = SoftPrompt::xavier_uniform(2, params.config.d_model, 4);
    INFO(to_string(kind));
    CHECK(gradcheck::check(f, {prompt.embeddings()}, 2).max_rel_error < 1e-4);
  }
}

TEST_CASE("soft-prompt training validates its inputs") {
  const auto params = tuned_tiny();
  AttackConfig cfg;
  cfg.kind = AttackKind::kFgsm;
  CHECK_THROWS_AS(sp_attack_train(small_set(1), params, cfg, 0), ContractError);
  cfg.kind = AttackKind::kSpTargeted;
  auto pathogenic = small_set(1);
  for (auto& p : pathogenic) p.label = 1;
  CHECK_THROWS_AS(sp_attack_train(pathogenic, params, cfg, 0), DataError);
  CHECK_THROWS_AS(sp_attack_train({}, params, cfg, 0), EmptyDataError);
}

TEST_CASE("prompt-only training leaves the model untouched and is deterministic") {
  const auto params = tuned_tiny();
  const auto data = small_set(10);
  AttackConfig cfg;
  cfg.kind = AttackKind::kSpHijack;
  cfg.epochs = 2;
  cfg.prompt_length = 3;
  cfg.lr = 1e-2;
  const std::string before = tensor_map_digest(params.tensors);
  const auto a = sp_attack_train(data, params, cfg, 5);
  const auto b = sp_attack_train(data, params, cfg, 5);
  CHECK(tensor_map_digest(params.tensors) == before);
  CHECK(tensor_map_digest(a.params.tensors) == before);
  CHECK(a.prompt.embeddings() == b.prompt.embeddings());
  CHECK(a.prompt.embeddings() != SoftPrompt::xavier_uniform(3, params.config.d_model, 5).embeddings());
}

TEST_CASE("prompt-and-model scope also updates the encoder") {
  const auto params = tuned_tiny();
  AttackConfig cfg;
  cfg.kind = AttackKind::kSpHijack;
  cfg.epochs = 1;
  cfg.prompt_length = 2;
  cfg.scope = UpdateScope::kPromptAndModel;
  const auto r = sp_attack_train(small_set(11), params, cfg, 1);
  CHECK(tensor_map_digest(r.params.tensors) != tensor_map_digest(params.tensors));
}

TEST_CASE("targeted training lowers its own objective") {
  const auto params = tuned_tiny();
  const auto data = small_set(12);
  AttackConfig cfg;
  cfg.kind = AttackKind::kSpTargeted;
  cfg.epochs = 8;
  cfg.prompt_length = 3;
  cfg.lr = 3e-2;
  const auto r = sp_attack_train(data, params, cfg, 2);
  REQUIRE(r.epoch_losses.size() == 8);
  CHECK(r.epoch_losses.back() < r.epoch_losses.front());
}

TEST_CASE("Xavier prompt initialisation stays inside its bound") {
  const double bound = SoftPrompt::xavier_bound(10, 64);
  CHECK(std::abs(bound - std::sqrt(6.0 / 74.0)) < 1e-15);
  const auto p = SoftPrompt::xavier_uniform(10, 64, 3);
  CHECK(p.length() == 10);
  CHECK(p.dim() == 64);
  double max_abs = 0.0;
  for (double v : p.embeddings().data()) {
    CHECK(std::abs(v) <= bound);
    max_abs = std::max(max_abs, std::abs(v));
  }
  CHECK(max_abs > 0.9 * bound);
}

TEST_CASE("sp_apply rejects empty and mismatched prompts and never touches tokens") {
  const auto params = tuned_tiny();
  const auto pair = small_set(13)[0];
  CHECK_THROWS_AS(SoftPrompt(Tensor({0, 8})), DimensionError);
  CHECK_THROWS_AS(SoftPrompt(Tensor::vector({1.0, 2.0})), ContractError);
  CHECK_THROWS_AS(sp_apply(pair, SoftPrompt{}, params), ContractError);
  CHECK_THROWS_AS(sp_apply(pair, SoftPrompt::xavier_uniform(2, 9, 0), params), ContractError);

  const VariantPair copy = pair;
  const auto r = sp_apply(pair, SoftPrompt::xavier_uniform(4, params.config.d_model, 0), params);
  CHECK(pair == copy);
  CHECK(std::abs(r.lambda - std::abs(r.pll_wt - r.pll_mut)) < 1e-12);
}

TEST_CASE("with zero prompt and no positions, masking the prompt from attention restores the clean PLL") {
  auto params = tuned_tiny();
  params.at("pos_emb") = params.at("pos_emb").zeros_like();
  const SoftPrompt zero(Tensor({4, params.config.d_model}, 0.0));
  for (const auto& pair : small_set(14)) {
    const auto clean = pllr(pair, params);
    PromptApplyOptions ablate;
    ablate.mask_prompt_from_attention = true;
    const auto masked = sp_apply(pair, zero, params, ablate);
    CHECK(std::abs(masked.pll_wt - clean.pll_wt) < 1e-9);
    CHECK(std::abs(masked.pll_mut - clean.pll_mut) < 1e-9);
    const auto attended = sp_apply(pair, zero, params);
    CHECK(std::abs(attended.pll_wt - clean.pll_wt) > 1e-9);
  }
}

TEST_CASE("attack kind and scope names round-trip") {
  for (auto k : {AttackKind::kFgsm, AttackKind::kSpHijack, AttackKind::kSpTargeted})
    CHECK(attack_kind_from_string(to_string(k)) == k);
  CHECK(update_scope_from_string("prompt-and-model") == UpdateScope::kPromptAndModel);
  CHECK_THROWS_AS(attack_kind_from_string("pgd"), ConfigError);
  FgsmConfig bad;
  bad.epsilon = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
