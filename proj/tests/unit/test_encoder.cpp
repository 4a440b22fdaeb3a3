#include <cmath>
#include <random>

#include "doctest.h"
#include "genatk/corpus.hpp"
#include "genatk/encoder.hpp"
#include "genatk/encoder_impl.hpp"
#include "genatk/errors.hpp"
#include "genatk/siamese.hpp"
#include "model_check.hpp"

using namespace genatk;

namespace {

TokenSequence seq(const char* s) { return TokenSequence::from_string(s); }

}  // namespace

TEST_CASE("embedding has one row per token and equals table lookup") {
  const auto params = ModelParams::init({}, 1);
  const auto s = seq("MKW");
  const Tensor e = embed_values(params, s);
  CHECK(e.rows() == 3);
  CHECK(e.cols() == params.config.d_model);
  const Tensor& table = params.at("tok_emb");
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < e.cols(); ++j) CHECK(e(i, j) == table(s[i], j));
  CHECK(embed_values(params, seq("MKW")) == e);

  ad::Tape tape;
  ParamVars pv(tape, params, ad::LeafKind::kConstant);
  CHECK(embed(pv, s).value() == e);
}

TEST_CASE("encode returns vocabulary logits per row and rejects overflow") {
  EncoderConfig cfg;
  cfg.max_len = 10;
  const auto params = ModelParams::init(cfg, 2);
  for (const char* s : {"A", "ACDE", "ACDEFGHIKL"}) {
    const Tensor lg = logits(params, seq(s));
    CHECK(lg.rows() == std::string(s).size());
    CHECK(lg.cols() == vocab::kSize);
  }
  CHECK_THROWS_AS(logits(params, seq("ACDEFGHIKLM")), ContractError);
}

TEST_CASE("without positions, swapping two inputs swaps their logit rows") {
  auto params = ModelParams::init({}, 3);
  params.at("pos_emb") = params.at("pos_emb").zeros_like();
  const auto a = seq("MKWVTFISLL");
  auto ids = a.ids();
  std::swap(ids[2], ids[7]);
  const Tensor la = logits(params, a);
  const Tensor lb = logits(params, TokenSequence(ids));
  for (std::size_t r = 0; r < la.rows(); ++r) {
    const std::size_t src = r == 2 ? 7 : r == 7 ? 2 : r;
    for (std::size_t c = 0; c < la.cols(); ++c) CHECK(lb(r, c) == doctest::Approx(la(src, c)).epsilon(1e-12));
  }
}

TEST_CASE("encode is a pure function of embeddings and params") {
  const auto params = ModelParams::init({}, 4);
  CHECK(logits(params, seq("ACDEFG")) == logits(params, seq("ACDEFG")));
}

TEST_CASE("gradients reach every tensor and match finite differences") {
  const auto params = ModelParams::init(modelcheck::tiny_config(), 5);
  const auto s = seq("MKWCHKYA");
  const std::size_t rows[] = {0, 3, 5, 7};
  const std::size_t cols[] = {7, 9, 12, 20};
  auto objective = [&](const ParamVars& pv) {
    return ad::select_sum(ad::log_softmax_rows(encode(pv, embed(pv, s))), rows, cols);
  };
  for (const auto& e : modelcheck::check_params(params, objective)) {
    INFO(e.name);
    CHECK(e.rel_error < 1e-4);
    // Positional rows past the sequence are unused.
    if (e.name != "pos_emb") CHECK(e.grad_norm > 0.0);
  }
}

TEST_CASE("masked objective ignores unmasked positions") {
  const auto params = ModelParams::init({}, 6);
  std::mt19937_64 rng(1);
  const MaskedExample ex = make_masked_example(seq("MKWVTFISLLAC"), 0.3, rng);
  ad::Tape tape;
  ParamVars pv(tape, params, ad::LeafKind::kConstant);
  const MlmForward fw = mlm_forward(pv, ex);
  const Tensor g = tape.backward(fw.loss).wrt(fw.logits);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const bool masked = std::find(ex.positions.begin(), ex.positions.end(), r) != ex.positions.end();
    double norm = 0.0;
    for (std::size_t c = 0; c < g.cols(); ++c) norm += std::abs(g(r, c));
    if (masked) CHECK(norm > 0.0);
    else CHECK(norm == 0.0);
  }
}

TEST_CASE("masking recipe selects at least one position and keeps targets") {
  std::mt19937_64 rng(2);
  const auto s = seq("MKWVTFISLLACDEFGHIKL");
  std::size_t masked = 0, total = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto ex = make_masked_example(s, 0.15, rng);
    CHECK_FALSE(ex.positions.empty());
    for (std::size_t k = 0; k < ex.positions.size(); ++k) {
      CHECK(ex.targets[k] == s[ex.positions[k]]);
      masked += ex.input[ex.positions[k]] == vocab::kMask;
      ++total;
    }
  }
  const double share = static_cast<double>(masked) / static_cast<double>(total);
  CHECK(share > 0.76);
  CHECK(share < 0.84);
}

TEST_CASE("initial masked loss is close to ln 25") {
  SyntheticSpec spec;
  spec.n_pairs = 64;
  const auto corpus = generate_wild_types(spec, 1);
  const double loss = mlm_eval_loss(corpus, ModelParams::init({}, 7), 0.15, 3);
  CHECK(std::abs(loss - std::log(25.0)) < 0.3);
}

TEST_CASE("pretraining config rejects a zero mask rate and an empty corpus") {
  PretrainConfig pc;
  pc.mask_rate = 0.0;
  CHECK_THROWS_AS(pc.validate(), ConfigError);
  CHECK_THROWS_AS(mlm_pretrain({}, {}, PretrainConfig{}, 0), EmptyDataError);
}

TEST_CASE("a repeated sequence is memorized within 50 epochs") {
  const std::vector<TokenSequence> corpus(64, seq("MKWVTFISLLACDEFG"));
  PretrainConfig pc;
  pc.epochs = 50;
  const auto result = mlm_pretrain(corpus, modelcheck::tiny_config(), pc, 1);
  CHECK(masked_token_accuracy({corpus[0]}, result.params) == 1.0);
}

TEST_CASE("pretraining loss is non-increasing over 3-epoch windows") {
  SyntheticSpec spec;
  spec.n_pairs = 96;
  const auto corpus = generate_wild_types(spec, 4);
  PretrainConfig pc;
  pc.epochs = 8;
  const auto r = mlm_pretrain(corpus, {}, pc, 2);
  REQUIRE(r.epoch_losses.size() == 8);
  for (std::size_t e = 0; e + 3 < r.epoch_losses.size(); ++e) {
    const double w0 = r.epoch_losses[e] + r.epoch_losses[e + 1] + r.epoch_losses[e + 2];
    const double w1 = r.epoch_losses[e + 1] + r.epoch_losses[e + 2] + r.epoch_losses[e + 3];
    CHECK(w1 <= w0);
  }
}

TEST_CASE("both Siamese branches observe one parameter object") {
  Siamese model(ModelParams::init({}, 8));
  const auto s = seq("MKWVTFISLL");
  const double before = model.mut_branch().pll(s);
  model.wt_branch().params().at("head.b")[s[0]] += 1.0;
  CHECK(model.mut_branch().pll(s) != before);
  CHECK(&model.wt_branch().params() == &model.mut_branch().params());
}

TEST_CASE("encoder config validation") {
  EncoderConfig c;
  c.n_heads = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
