#include "genatk/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "genatk/errors.hpp"

namespace genatk {

const char* to_string(PllMode mode) {
  return mode == PllMode::kSinglePass ? "single-pass" : "per-position-mask";
}

PllMode pll_mode_from_string(const std::string& s) {
  if (s == "single-pass") return PllMode::kSinglePass;
  if (s == "per-position-mask") return PllMode::kPerPositionMask;
  throw ConfigError("unknown PLL mode '" + s + "' (expected single-pass or per-position-mask)");
}

double calibrate(double lambda) {
  const double s = lambda >= 0 ? 1.0 / (1.0 + std::exp(-lambda))
                               : std::exp(lambda) / (1.0 + std::exp(lambda));
  return 2.0 * s - 1.0;
}

ad::Var pll_on_tape(const ParamVars& pv, const TokenSequence& seq, PllMode mode,
                    const BranchInput& input) {
  ad::Var rows = input.rows ? *input.rows : embed(pv, seq);
  const std::size_t len = seq.length();
  if (rows.value().rows() != len) {
    throw DimensionError("branch embedding has " + std::to_string(rows.value().rows()) +
                         " rows for a sequence of length " + std::to_string(len));
  }
  const std::size_t offset = input.prompt ? input.prompt->value().rows() : 0;
  if (input.prompt && input.prompt->value().cols() != pv.config().d_model) {
    throw ContractError("prompt width " + std::to_string(input.prompt->value().cols()) +
                        " does not match d_model " + std::to_string(pv.config().d_model));
  }
  EncodeOptions opts;
  opts.key_mask = input.key_mask;

  auto with_prompt = [&](std::vector<ad::Var> parts) {
    if (input.prompt) parts.insert(parts.begin(), *input.prompt);
    return parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
  };

  if (mode == PllMode::kSinglePass) {
    ad::Var logp = ad::log_softmax_rows(encode(pv, with_prompt({rows}), opts));
    std::vector<std::size_t> r(len);
    std::iota(r.begin(), r.end(), offset);
    return ad::select_sum(logp, r, seq.ids());
  }

  const std::size_t mask_id[] = {vocab::kMask};
  ad::Var mask_row = ad::gather_rows(pv["tok_emb"], mask_id);
  ad::Var total;
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<ad::Var> parts;
    if (i > 0) parts.push_back(ad::slice_rows(rows, 0, i));
    parts.push_back(mask_row);
    if (i + 1 < len) parts.push_back(ad::slice_rows(rows, i + 1, len - i - 1));
    ad::Var logp = ad::log_softmax_rows(encode(pv, with_prompt(std::move(parts)), opts));
    const std::size_t r[] = {offset + i};
    const std::size_t c[] = {seq[i]};
    ad::Var term = ad::select_sum(logp, r, c);
    total = total ? ad::add(total, term) : term;
  }
  return total;
}

SiameseTerms siamese_forward(const ParamVars& pv, const VariantPair& pair, PllMode mode,
                             const BranchInput& wt_input, const BranchInput& mut_input) {
  pair.validate(true);
  SiameseTerms t;
  t.pll_wt = pll_on_tape(pv, pair.wt, mode, wt_input);
  t.pll_mut = pll_on_tape(pv, pair.mut, mode, mut_input);
  t.lambda = ad::abs(ad::sub(t.pll_wt, t.pll_mut));
  t.sigma_hat = ad::add_scalar(ad::scale(ad::sigmoid(t.lambda), 2.0), -1.0);
  return t;
}

ad::Var bce_loss(ad::Var sigma_hat, int label) {
  if (label == 1) return ad::scale(ad::log_floor(sigma_hat, kProbFloor), -1.0);
  if (label == 0) {
    ad::Var complement = ad::add_scalar(ad::scale(sigma_hat, -1.0), 1.0);
    return ad::scale(ad::log_floor(complement, kProbFloor), -1.0);
  }
  throw DataError("label must be 0 or 1");
}

double bce_loss(const PllrRecord& record) {
  const double s = std::clamp(record.sigma_hat, kProbFloor, 1.0 - kProbFloor);
  if (record.label == 1) return -std::log(s);
  if (record.label == 0) return -std::log(std::max(1.0 - record.sigma_hat, kProbFloor));
  throw DataError("label must be 0 or 1");
}

PllrRecord record_from(const SiameseTerms& terms, int label, std::size_t id) {
  PllrRecord r;
  r.id = id;
  r.pll_wt = terms.pll_wt.value().item();
  r.pll_mut = terms.pll_mut.value().item();
  r.lambda = terms.lambda.value().item();
  r.sigma_hat = terms.sigma_hat.value().item();
  r.label = label;
  return r;
}

double pll(const TokenSequence& seq, const ModelParams& params, PllMode mode) {
  ad::Tape tape;
  ParamVars pv(tape, params, ad::LeafKind::kConstant);
  return pll_on_tape(pv, seq, mode).value().item();
}

PllrRecord pllr(const VariantPair& pair, const ModelParams& params, const SoftPrompt* prompt,
                PllMode mode, std::size_t id) {
  ad::Tape tape;
  ParamVars pv(tape, params, ad::LeafKind::kConstant);
  BranchInput in;
  if (prompt) {
    if (prompt->dim() != params.config.d_model) {
      throw ContractError("prompt width " + std::to_string(prompt->dim()) + " does not match d_model " +
                          std::to_string(params.config.d_model));
    }
    in.prompt = tape.constant(prompt->embeddings());
  }
  return record_from(siamese_forward(pv, pair, mode, in, in), pair.label, id);
}

std::vector<PllrRecord> score_pairs(const std::vector<VariantPair>& pairs, const ModelParams& params,
                                    PllMode mode, const SoftPrompt* prompt) {
  std::vector<PllrRecord> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out.push_back(pllr(pairs[i], params, prompt, mode, i));
  return out;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

FinetuneResult finetune(const std::vector<VariantPair>& train, const TrainConfig& config,
                        ModelParams params, std::uint64_t seed, const FinetuneCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw EmptyDataError("fine-tuning set is empty");
  for (const auto& p : train) p.validate(true);

  std::mt19937_64 rng(seed);
  AdamState state;
  FinetuneResult result;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      ad::Tape tape;
      ParamVars pv(tape, params, ad::LeafKind::kTrainable);
      std::vector<ad::Var> losses;
      for (std::size_t i = start; i < end; ++i) {
        const VariantPair& pair = train[order[i]];
        losses.push_back(bce_loss(siamese_forward(pv, pair, config.mode).sigma_hat, pair.label));
      }
      ad::Var loss = ad::scale(ad::add_all(losses), 1.0 / static_cast<double>(losses.size()));
      adam_step(params.tensors, pv.gradients(tape.backward(loss)), state, config.adam());
      loss_sum += loss.value().item();
      ++batches;
    }
    const double mean = loss_sum / static_cast<double>(batches);
    result.epoch_losses.push_back(mean);
    if (!params.all_finite()) throw NumericError("fine-tuning produced non-finite parameters");
    if (on_epoch) on_epoch(epoch, mean, params);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace genatk
