#include "genatk/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "genatk/errors.hpp"
#include "genatk/optim.hpp"

namespace genatk {

namespace {

std::string layer_name(std::size_t layer, const char* suffix) {
  return "layer" + std::to_string(layer) + "." + suffix;
}

Tensor normal_tensor(std::vector<std::size_t> shape, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.raw()) v = dist(rng);
  return t;
}

ad::Var linear(ad::Var x, ad::Var w, ad::Var b) { return ad::add_row_bias(ad::matmul(x, w), b); }

ad::Var maybe_dropout(ad::Var x, const EncodeOptions& opts) {
  if (opts.dropout <= 0.0 || opts.rng == nullptr) return x;
  std::bernoulli_distribution keep(1.0 - opts.dropout);
  Tensor mask(x.value().shape());
  const double scale = 1.0 / (1.0 - opts.dropout);
  for (auto& v : mask.raw()) v = keep(*opts.rng) ? scale : 0.0;
  return ad::mul(x, x.tape()->constant(std::move(mask)));
}

}  // namespace

void EncoderConfig::validate() const {
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 || max_len == 0) {
    throw ConfigError("encoder dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

ModelParams ModelParams::init(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config.d_model;
  const std::size_t v = vocab::kSize;
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(d));
  const double out_std = proj_std / std::sqrt(2.0 * static_cast<double>(config.n_layers));

  ModelParams p;
  p.config = config;
  auto& t = p.tensors;
  t["tok_emb"] = normal_tensor({v, d}, 1.0, rng);
  t["pos_emb"] = normal_tensor({config.max_len, d}, 0.1, rng);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    t[layer_name(l, "ln1.g")] = Tensor({d}, 1.0);
    t[layer_name(l, "ln1.b")] = Tensor({d}, 0.0);
    t[layer_name(l, "attn.wq")] = normal_tensor({d, d}, proj_std, rng);
    t[layer_name(l, "attn.bq")] = Tensor({d}, 0.0);
    t[layer_name(l, "attn.wk")] = normal_tensor({d, d}, proj_std, rng);
    t[layer_name(l, "attn.bk")] = Tensor({d}, 0.0);
    t[layer_name(l, "attn.wv")] = normal_tensor({d, d}, proj_std, rng);
    t[layer_name(l, "attn.bv")] = Tensor({d}, 0.0);
    t[layer_name(l, "attn.wo")] = normal_tensor({d, d}, out_std, rng);
    t[layer_name(l, "attn.bo")] = Tensor({d}, 0.0);
    t[layer_name(l, "ln2.g")] = Tensor({d}, 1.0);
    t[layer_name(l, "ln2.b")] = Tensor({d}, 0.0);
    t[layer_name(l, "ff.w1")] = normal_tensor({d, config.d_ff}, proj_std, rng);
    t[layer_name(l, "ff.b1")] = Tensor({config.d_ff}, 0.0);
    t[layer_name(l, "ff.w2")] =
        normal_tensor({config.d_ff, d},
                      1.0 / std::sqrt(static_cast<double>(config.d_ff) * 2.0 * config.n_layers), rng);
    t[layer_name(l, "ff.b2")] = Tensor({d}, 0.0);
  }
  t["ln_f.g"] = Tensor({d}, 1.0);
  t["ln_f.b"] = Tensor({d}, 0.0);
  if (!config.tied_head) t["head.w"] = normal_tensor({d, v}, 0.02, rng);
  t["head.b"] = Tensor({v}, 0.0);
  return p;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ContractError("model has no tensor named " + name);
  return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ContractError("model has no tensor named " + name);
  return it->second;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors) n += t.size();
  return n;
}

bool ModelParams::all_finite() const {
  return std::all_of(tensors.begin(), tensors.end(),
                     [](const auto& kv) { return kv.second.all_finite(); });
}

ParamVars::ParamVars(ad::Tape& tape, const ModelParams& params, ad::LeafKind kind)
    : tape_(&tape), config_(params.config) {
  for (const auto& [name, t] : params.tensors) vars_.emplace(name, tape.leaf(t, kind));
}

ad::Var ParamVars::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("no registered parameter " + name);
  return it->second;
}

TensorMap ParamVars::gradients(const ad::Gradients& grads) const {
  TensorMap out;
  for (const auto& [name, v] : vars_) out.emplace(name, grads.wrt(v));
  return out;
}

ad::Var embed(const ParamVars& pv, const TokenSequence& seq) {
  return ad::gather_rows(pv["tok_emb"], seq.ids());
}

Tensor embed_values(const ModelParams& params, const TokenSequence& seq) {
  const Tensor& table = params.at("tok_emb");
  const std::size_t d = table.cols();
  Tensor out({seq.length(), d});
  for (std::size_t i = 0; i < seq.length(); ++i) {
    if (seq[i] >= table.rows()) throw VocabError("token id outside embedding table");
    for (std::size_t j = 0; j < d; ++j) out(i, j) = table(seq[i], j);
  }
  return out;
}

ad::Var encode(const ParamVars& pv, ad::Var emb, const EncodeOptions& opts) {
  const EncoderConfig& cfg = pv.config();
  const std::size_t rows = emb.value().rows();
  if (emb.value().rank() != 2 || emb.value().cols() != cfg.d_model) {
    throw DimensionError("encode: embedding " + emb.value().shape_str() + " does not have width " +
                         std::to_string(cfg.d_model));
  }
  if (rows > cfg.max_len) {
    throw ContractError("encode: " + std::to_string(rows) + " rows exceed max_len " +
                        std::to_string(cfg.max_len));
  }
  if (!opts.key_mask.empty() && opts.key_mask.size() != rows) {
    throw DimensionError("encode: key mask length does not match sequence rows");
  }

  const std::size_t heads = cfg.n_heads;
  const std::size_t dh = cfg.d_model / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  ad::Var x = ad::add(emb, ad::slice_rows(pv["pos_emb"], 0, rows));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    auto p = [&](const char* s) { return pv[layer_name(l, s)]; };

    ad::Var h = ad::layer_norm(x, p("ln1.g"), p("ln1.b"));
    ad::Var q = linear(h, p("attn.wq"), p("attn.bq"));
    ad::Var k = linear(h, p("attn.wk"), p("attn.bk"));
    ad::Var v = linear(h, p("attn.wv"), p("attn.bv"));
    std::vector<ad::Var> outs;
    outs.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      ad::Var qh = ad::slice_cols(q, hd * dh, dh);
      ad::Var kh = ad::slice_cols(k, hd * dh, dh);
      ad::Var vh = ad::slice_cols(v, hd * dh, dh);
      ad::Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt_dh);
      ad::Var attn = ad::softmax_rows(scores, opts.key_mask);
      outs.push_back(ad::matmul(attn, vh));
    }
    ad::Var merged = heads == 1 ? outs[0] : ad::concat_cols(outs);
    x = ad::add(x, maybe_dropout(linear(merged, p("attn.wo"), p("attn.bo")), opts));

    ad::Var h2 = ad::layer_norm(x, p("ln2.g"), p("ln2.b"));
    ad::Var f = linear(ad::gelu(linear(h2, p("ff.w1"), p("ff.b1"))), p("ff.w2"), p("ff.b2"));
    x = ad::add(x, maybe_dropout(f, opts));
  }
  x = ad::layer_norm(x, pv["ln_f.g"], pv["ln_f.b"]);
  ad::Var w = cfg.tied_head ? ad::transpose(pv["tok_emb"]) : pv["head.w"];
  return linear(x, w, pv["head.b"]);
}

Tensor logits(const ModelParams& params, const TokenSequence& seq) {
  ad::Tape tape;
  ParamVars pv(tape, params, ad::LeafKind::kConstant);
  return encode(pv, embed(pv, seq)).value();
}

void PretrainConfig::validate() const {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) {
    throw ConfigError("mask_rate must lie strictly between 0 and 1 (got " +
                      std::to_string(mask_rate) + ")");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
}

MlmForward mlm_forward(const ParamVars& pv, const MaskedExample& example) {
  ad::Var lg = encode(pv, embed(pv, example.input));
  ad::Var logp = ad::log_softmax_rows(lg);
  ad::Var total = ad::select_sum(logp, example.positions, example.targets);
  ad::Var loss = ad::scale(total, -1.0 / static_cast<double>(example.positions.size()));
  return {lg, loss};
}

PretrainResult mlm_pretrain(const std::vector<TokenSequence>& corpus, const EncoderConfig& config,
                            const PretrainConfig& train, std::uint64_t seed,
                            const EpochCallback& on_epoch) {
  train.validate();
  if (corpus.empty()) throw EmptyDataError("pretraining corpus is empty");
  return mlm_train(corpus, ModelParams::init(config, seed), train, seed, on_epoch);
}

PretrainResult mlm_train(const std::vector<TokenSequence>& corpus, ModelParams params,
                         const PretrainConfig& train, std::uint64_t seed,
                         const EpochCallback& on_epoch) {
  train.validate();
  if (corpus.empty()) throw EmptyDataError("pretraining corpus is empty");
  for (const auto& s : corpus) {
    if (s.length() > params.config.max_len) {
      throw DataError("corpus sequence of length " + std::to_string(s.length()) +
                      " exceeds max_len");
    }
  }

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  AdamConfig adam{train.lr, 0.9, 0.999, 1e-8};
  AdamState state;
  PretrainResult result;
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
      const std::size_t end = std::min(order.size(), start + train.batch_size);
      ad::Tape tape;
      ParamVars pv(tape, params, ad::LeafKind::kTrainable);
      EncodeOptions opts;
      opts.dropout = params.config.dropout;
      opts.rng = &rng;
      std::vector<ad::Var> losses;
      for (std::size_t i = start; i < end; ++i) {
        MaskedExample ex = make_masked_example(corpus[order[i]], train.mask_rate, rng);
        ad::Var lg = encode(pv, embed(pv, ex.input), opts);
        ad::Var total = ad::select_sum(ad::log_softmax_rows(lg), ex.positions, ex.targets);
        losses.push_back(ad::scale(total, -1.0 / static_cast<double>(ex.positions.size())));
      }
      ad::Var batch_loss = ad::scale(ad::add_all(losses),
                                     1.0 / static_cast<double>(losses.size()));
      const auto grads = tape.backward(batch_loss);
      adam_step(params.tensors, pv.gradients(grads), state, adam);
      loss_sum += batch_loss.value().item();
      ++batches;
    }
    const double mean = loss_sum / static_cast<double>(batches);
    result.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  if (!params.all_finite()) throw NumericError("pretraining produced non-finite parameters");
  result.params = std::move(params);
  return result;
}

double mlm_eval_loss(const std::vector<TokenSequence>& corpus, const ModelParams& params,
                     double mask_rate, std::uint64_t seed) {
  if (corpus.empty()) throw EmptyDataError("evaluation corpus is empty");
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw ConfigError("mask_rate must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& seq : corpus) {
    MaskedExample ex = make_masked_example(seq, mask_rate, rng);
    ad::Tape tape;
    ParamVars pv(tape, params, ad::LeafKind::kConstant);
    MlmForward fw = mlm_forward(pv, ex);
    total += fw.loss.value().item() * static_cast<double>(ex.positions.size());
    count += ex.positions.size();
  }
  return total / static_cast<double>(count);
}

double masked_token_accuracy(const std::vector<TokenSequence>& corpus, const ModelParams& params) {
  if (corpus.empty()) throw EmptyDataError("evaluation corpus is empty");
  std::size_t hits = 0, total = 0;
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i < seq.length(); ++i) {
      std::vector<std::size_t> ids = seq.ids();
      ids[i] = vocab::kMask;
      const Tensor lg = logits(params, TokenSequence(ids));
      std::size_t best = 0;
      for (std::size_t c = 1; c < lg.cols(); ++c)
        if (lg(i, c) > lg(i, best)) best = c;
      hits += best == seq[i] ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace genatk
