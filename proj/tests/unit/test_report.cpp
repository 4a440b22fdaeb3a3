#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "genatk/checkpoint.hpp"
#include "genatk/errors.hpp"
#include "genatk/io.hpp"
#include "genatk/plots.hpp"
#include "genatk/report.hpp"
#include "model_check.hpp"
#include "svg_scan.hpp"
#include "temp_dir.hpp"

using namespace genatk;

namespace {

std::vector<PllrRecord> records(std::uint64_t seed, std::size_t n, double shift) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e(1.0);
  std::vector<PllrRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    PllrRecord r;
    r.id = i;
    r.label = static_cast<int>(i % 3 == 0);
    r.lambda = e(rng) + r.label * 0.8 + shift;
    r.lambda = std::abs(r.lambda);
    r.sigma_hat = calibrate(r.lambda);
    out.push_back(r);
  }
  return out;
}

EvalReport sample_report(AttackKind kind, std::uint64_t seed = 1) {
  auto clean = records(seed, 40, 0.0);
  auto attacked = clean;
  std::mt19937_64 rng(seed + 100);
  std::normal_distribution<double> n(0.0, 0.7);
  for (auto& r : attacked) {
    r.lambda = std::abs(r.lambda + n(rng));
    r.sigma_hat = calibrate(r.lambda);
  }
  EvalReport rep = make_report(kind, clean, attacked);
  rep.model_digest = "m";
  rep.eval_digest = "e";
  return rep;
}

std::vector<std::string> csv_column(const std::string& csv, const std::string& name) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string f; std::getline(hs, f, ',');) header.push_back(f);
  const auto col = std::find(header.begin(), header.end(), name) - header.begin();
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string f;
    for (long i = 0; i <= col; ++i) std::getline(ls, f, ',');
    out.push_back(f);
  }
  return out;
}

}  // namespace

TEST_CASE("checkpoint round trip stays within f32 precision") {
  const auto params = ModelParams::init(modelcheck::tiny_config(), 3);
  const auto bytes = serialize_checkpoint(model_checkpoint(params, "manifest_x.json"));
  const auto back = parse_checkpoint(bytes);
  CHECK(back.kind == CheckpointKind::kModel);
  CHECK(back.config == params.config);
  CHECK(back.manifest == "manifest_x.json");
  REQUIRE(back.tensors.size() == params.tensors.size());
  for (const auto& [name, t] : params.tensors) {
    const Tensor& u = back.tensors.at(name);
    REQUIRE(u.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(std::abs(u[i] - t[i]) <= 1e-6 * std::max(1.0, std::abs(t[i])));
      CHECK(u[i] == static_cast<double>(static_cast<float>(t[i])));
    }
  }
  // f32 values survive a second round trip unchanged
  CHECK(serialize_checkpoint(back) == bytes);
}

TEST_CASE("checkpoint directory tiles the payload") {
  const auto params = ModelParams::init(modelcheck::tiny_config(), 4);
  const std::string bytes = serialize_checkpoint(model_checkpoint(params));
  std::uint64_t header_len = 0;
  for (int i = 0; i < 8; ++i) header_len |= std::uint64_t(static_cast<unsigned char>(bytes[12 + i])) << (8 * i);
  const auto header = nlohmann::json::parse(bytes.substr(20, header_len));
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const auto& e : header["tensors"]) spans.emplace_back(e["offset"], 4 * e["count"].get<std::size_t>());
  std::sort(spans.begin(), spans.end());
  std::size_t cursor = 0;
  for (auto [off, len] : spans) {
    CHECK(off == cursor);
    cursor += len;
  }
  CHECK(cursor == bytes.size() - 20 - header_len);
  CHECK(header["format_version"] == kCheckpointVersion);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto params = ModelParams::init(modelcheck::tiny_config(), 5);
  const std::string good = serialize_checkpoint(model_checkpoint(params));
  CHECK_THROWS_AS(parse_checkpoint("nonsense"), FormatError);
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(bad_magic), FormatError);
  std::string bad_version = good;
  bad_version[8] = 9;
  CHECK_THROWS_AS(parse_checkpoint(bad_version), FormatError);
  CHECK_THROWS_AS(parse_checkpoint(good.substr(0, good.size() - 4)), FormatError);
  CHECK_THROWS_AS(parse_checkpoint(good + "xxxx"), FormatError);

  std::string nan_payload = good;
  const float nan = NAN;
  std::memcpy(nan_payload.data() + nan_payload.size() - 4, &nan, 4);
  CHECK_THROWS_AS(parse_checkpoint(nan_payload), NumericError);

  TempDir dir("ckpt");
  auto prompt = SoftPrompt::xavier_uniform(3, params.config.d_model, 1);
  save_checkpoint(dir / "p.ckpt", prompt_checkpoint(prompt, params.config));
  CHECK_THROWS_AS(load_model(dir / "p.ckpt"), FormatError);
  CHECK(load_prompt(dir / "p.ckpt").length() == 3);
  save_checkpoint(dir / "m.ckpt", model_checkpoint(params));
  CHECK_THROWS_AS(load_prompt(dir / "m.ckpt"), FormatError);
  auto missing = params;
  missing.tensors.erase("ln_f.g");
  save_checkpoint(dir / "short.ckpt", model_checkpoint(missing));
  CHECK_THROWS_AS(load_model(dir / "short.ckpt"), FormatError);
  CHECK_THROWS_AS(load_model(dir / "absent.ckpt"), FileMissingError);
}

TEST_CASE("reloaded model reproduces the MLM eval loss") {
  const auto params = ModelParams::init(modelcheck::tiny_config(), 6);
  TempDir dir("reload");
  save_checkpoint(dir / "m.ckpt", model_checkpoint(params));
  const auto back = load_model(dir / "m.ckpt");
  std::vector<TokenSequence> corpus{TokenSequence::from_string("ACDEFGHIKLMN"),
                                    TokenSequence::from_string("WWCHKYAAAPLL")};
  CHECK(std::abs(mlm_eval_loss(corpus, back, 0.3, 2) - mlm_eval_loss(corpus, params, 0.3, 2)) < 1e-5);
}

TEST_CASE("report rows carry the attack bookkeeping") {
  const auto rep = sample_report(AttackKind::kSpTargeted);
  for (const auto& r : rep.rows) {
    CHECK(r.delta_lambda == r.attacked_lambda - r.clean_lambda);
    CHECK(r.flipped == ((r.clean_lambda >= kLn3) != (r.attacked_lambda >= kLn3)));
    if (r.label == 1) {
      CHECK_FALSE(r.contributes);
      CHECK(r.attack_loss == 0.0);
    } else {
      CHECK(r.contributes);
      CHECK(r.attack_loss > 0.0);
    }
  }
  for (const auto& r : sample_report(AttackKind::kSpHijack).rows) CHECK(r.contributes);
}

TEST_CASE("report aggregates recompute exactly from the CSV rows") {
  const auto rep = sample_report(AttackKind::kFgsm);
  const auto rows = parse_samples_csv(samples_csv(rep.rows));
  REQUIRE(rows.size() == rep.rows.size());
  ScoredSet clean, attacked;
  std::size_t flipped = 0;
  for (const auto& r : rows) {
    clean.scores.push_back(r.clean_lambda);
    clean.labels.push_back(r.label);
    attacked.scores.push_back(r.attacked_lambda);
    attacked.labels.push_back(r.label);
    flipped += r.flipped;
  }
  CHECK(roc_auc(clean) == rep.aggregates.clean_auc);
  CHECK(roc_auc(attacked) == rep.aggregates.attacked_auc);
  CHECK(aupr(attacked) == rep.aggregates.attacked_aupr);
  CHECK(static_cast<double>(flipped) / rows.size() == rep.aggregates.flip_rate);
}

TEST_CASE("report JSON round trip and tamper detection") {
  const auto rep = sample_report(AttackKind::kSpHijack);
  auto j = report_json(rep);
  const auto back = report_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.aggregates.clean_auc == rep.aggregates.clean_auc);
  CHECK(back.rows.size() == rep.rows.size());
  REQUIRE(back.aggregates.benign_ttest.has_value());
  CHECK(back.aggregates.benign_ttest->p == rep.aggregates.benign_ttest->p);

  auto tampered = j;
  tampered["aggregates"]["attacked_auc"] = rep.aggregates.attacked_auc + 1e-6;
  CHECK_THROWS_AS(report_from_json(tampered), FormatError);
  tampered = j;
  tampered["rows"][0]["attacked_lambda"] = rep.rows[0].attacked_lambda + 0.25;
  CHECK_THROWS_AS(report_from_json(tampered), FormatError);

  TempDir dir("report");
  const auto path = write_report(dir.path(), rep);
  CHECK(load_report(path).rows.size() == rep.rows.size());
  auto csv = read_file(dir / samples_file_name(rep.attack));
  const auto label_at = csv.find("\n0,") + 3;
  csv[label_at] = csv[label_at] == '0' ? '1' : '0';
  write_file_atomic(dir / samples_file_name(rep.attack), csv);
  CHECK_THROWS_AS(load_report(path), FormatError);
}

TEST_CASE("identical clean and attacked records give identical aggregates") {
  const auto clean = records(3, 30, 0.0);
  const auto rep = make_report(AttackKind::kFgsm, clean, clean);
  CHECK(rep.aggregates.clean_auc == rep.aggregates.attacked_auc);
  CHECK(rep.aggregates.clean_aupr == rep.aggregates.attacked_aupr);
  CHECK(rep.aggregates.flip_rate == 0.0);
  CHECK(rep.aggregates.benign_ttest->p == 1.0);
}

TEST_CASE("single report yields the six declared plots") {
  const auto rep = sample_report(AttackKind::kFgsm);
  const auto files = report_plots({rep});
  std::vector<std::string> names;
  for (const auto& f : files) names.push_back(f.name);
  CHECK(names == std::vector<std::string>{"roc.svg", "pr.svg", "lambda_hist.svg", "delta_lambda.svg",
                                          "flip_scatter.svg", "benign_waterfall.svg"});

  ScoredSet clean, attacked;
  for (const auto& r : rep.rows) {
    clean.scores.push_back(r.clean_lambda);
    clean.labels.push_back(r.label);
    attacked.scores.push_back(r.attacked_lambda);
    attacked.labels.push_back(r.label);
  }
  const std::string& roc = files[0].svg;
  CHECK(svgscan::vertex_count(svgscan::attribute(svgscan::element_with_id(roc, "roc-clean"), "points")) ==
        curve_points(clean, CurveKind::kRoc).size());
  CHECK(svgscan::vertex_count(svgscan::attribute(svgscan::element_with_id(roc, "roc-fgsm"), "points")) ==
        curve_points(attacked, CurveKind::kRoc).size());
  CHECK(svgscan::vertex_count(svgscan::attribute(svgscan::element_with_id(files[1].svg, "pr-clean"), "points")) ==
        curve_points(clean, CurveKind::kPr).size());

  const std::string& waterfall = files[5].svg;
  CHECK(svgscan::attribute(svgscan::element_with_id(waterfall, "waterfall"), "data-count") ==
        std::to_string(rep.aggregates.n_benign));
  CHECK(svgscan::tags(waterfall, "class=\"bar\"").size() == rep.aggregates.n_benign);

  CHECK(svgscan::tags(files[4].svg, "class=\"flipped\"").size() ==
        static_cast<std::size_t>(std::llround(rep.aggregates.flip_rate * rep.aggregates.n)));

  // deterministic
  const auto again = report_plots({rep});
  for (std::size_t i = 0; i < files.size(); ++i) CHECK(files[i].svg == again[i].svg);
}

TEST_CASE("several reports add the comparison chart with every attack") {
  const std::vector<EvalReport> reps{sample_report(AttackKind::kFgsm), sample_report(AttackKind::kSpHijack, 2),
                                     sample_report(AttackKind::kSpTargeted, 3)};
  const auto files = report_plots(reps);
  CHECK(files.size() == 2 + 4 * 3 + 1);
  CHECK(files.back().name == "attack_comparison.svg");
  for (const char* k : {"fgsm", "sp-hijack", "sp-targeted"}) {
    CHECK(files.back().svg.find(std::string("data-attack=\"") + k + "\"") != std::string::npos);
    CHECK(files[0].svg.find(std::string("id=\"roc-") + k + "\"") != std::string::npos);
  }
  const auto csv = attack_comparison_csv(reps);
  CHECK(csv_column(csv, "attack") == std::vector<std::string>{"fgsm", "sp-hijack", "sp-targeted"});
}

TEST_CASE("sweep CSV schema and plotted means") {
  SweepResult res;
  for (double f : {0.25, 0.5, 1.0}) {
    SweepRow r;
    r.fraction = f;
    r.n_train = static_cast<std::size_t>(f * 100);
    r.n_seeds = 3;
    r.clean_auc_mean = 0.5 + f / 3;
    r.clean_auc_std = 0.01;
    r.fgsm_auc_mean = 0.4 + f / 5;
    r.clean_aupr_mean = 0.45 + f / 4;
    r.fgsm_aupr_mean = 0.3 + f / 7;
    res.rows.push_back(r);
  }
  const std::string csv = sweep_csv(res);
  CHECK(csv.substr(0, csv.find('\n')) ==
        "fraction,n_train,n_seeds,clean_auc_mean,clean_auc_std,clean_aupr_mean,clean_aupr_std,"
        "fgsm_auc_mean,fgsm_auc_std,fgsm_aupr_mean,fgsm_aupr_std");
  const std::string svg = sweep_svg(res);
  for (const char* series : {"clean_auc", "fgsm_auc", "clean_aupr", "fgsm_aupr"}) {
    const auto means = csv_column(csv, std::string(series) + "_mean");
    std::vector<std::string> plotted;
    for (const auto& tag : svgscan::tags(svg, "data-mean"))
      if (svgscan::attribute(tag, "data-series") == series) plotted.push_back(svgscan::attribute(tag, "data-mean"));
    CHECK(plotted == means);
  }
  CHECK(sweep_cells_csv(res).rfind("fraction,seed,n_train,clean_auc,clean_aupr,fgsm_auc,fgsm_aupr\n", 0) == 0);
}
