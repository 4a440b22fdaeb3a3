#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "genatk/autodiff.hpp"
#include "genatk/tensor.hpp"
#include "genatk/vocab.hpp"

namespace genatk {

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  std::size_t max_len = 128;
  double dropout = 0.0;
  bool tied_head = false;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// All weights of the masked-language model. Tensor names:
//   tok_emb [V×d], pos_emb [max_len×d],
//   layer{i}.{ln1,ln2}.{g,b}, layer{i}.attn.{wq,bq,wk,bk,wv,bv,wo,bo},
//   layer{i}.ff.{w1,b1,w2,b2}, ln_f.{g,b}, head.b and (untied) head.w [d×V].
struct ModelParams {
  EncoderConfig config;
  TensorMap tensors;

  static ModelParams init(const EncoderConfig& config, std::uint64_t seed);

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t parameter_count() const;
  bool all_finite() const;
};

// ModelParams registered on a tape; one registration serves every branch
// built on that tape, so gradients from all branches accumulate.
class ParamVars {
 public:
  ParamVars(ad::Tape& tape, const ModelParams& params, ad::LeafKind kind);

  ad::Var operator[](const std::string& name) const;
  const std::map<std::string, ad::Var>& vars() const { return vars_; }
  const EncoderConfig& config() const { return config_; }
  ad::Tape& tape() const { return *tape_; }
  // Gradient map keyed like ModelParams::tensors.
  TensorMap gradients(const ad::Gradients& grads) const;

 private:
  ad::Tape* tape_;
  EncoderConfig config_;
  std::map<std::string, ad::Var> vars_;
};

struct EncodeOptions {
  // Keys a query may attend to; empty means all rows.
  std::vector<bool> key_mask;
  // Residual-branch dropout, applied only when an rng is supplied.
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

// Token-embedding rows for `seq` (no positional term).
ad::Var embed(const ParamVars& pv, const TokenSequence& seq);
Tensor embed_values(const ModelParams& params, const TokenSequence& seq);

// Positional addition, pre-norm transformer blocks, final norm and output
// head. Returns logits [rows × vocab::kSize].
ad::Var encode(const ParamVars& pv, ad::Var emb, const EncodeOptions& opts = {});

// Convenience forward without gradients.
Tensor logits(const ModelParams& params, const TokenSequence& seq);

struct PretrainConfig {
  double mask_rate = 0.15;
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double lr = 1e-3;

  void validate() const;
};

struct PretrainResult {
  ModelParams params;
  std::vector<double> epoch_losses;
};

// One masking draw: the corrupted input plus the positions to predict.
struct MaskedExample {
  TokenSequence input;
  std::vector<std::size_t> positions;
  std::vector<std::size_t> targets;
};

// Selects each position with probability `mask_rate` (at least one), then
// applies 80% MASK / 10% random residue / 10% unchanged.
template <typename Rng>
MaskedExample make_masked_example(const TokenSequence& seq, double mask_rate, Rng& rng);

struct MlmForward {
  ad::Var logits;
  ad::Var loss;  // mean cross-entropy over the masked positions
};

MlmForward mlm_forward(const ParamVars& pv, const MaskedExample& example);

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

PretrainResult mlm_pretrain(const std::vector<TokenSequence>& corpus, const EncoderConfig& config,
                            const PretrainConfig& train, std::uint64_t seed,
                            const EpochCallback& on_epoch = {});

// Continue MLM training from existing params.
PretrainResult mlm_train(const std::vector<TokenSequence>& corpus, ModelParams params,
                         const PretrainConfig& train, std::uint64_t seed,
                         const EpochCallback& on_epoch = {});

// Mean masked cross-entropy under a seeded masking draw; deterministic.
double mlm_eval_loss(const std::vector<TokenSequence>& corpus, const ModelParams& params,
                     double mask_rate, std::uint64_t seed);

// Masks every position in turn and scores argmax == original residue.
double masked_token_accuracy(const std::vector<TokenSequence>& corpus, const ModelParams& params);

}  // namespace genatk

#include "genatk/encoder_impl.hpp"
