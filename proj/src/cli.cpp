#include "genatk/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "genatk/attacks.hpp"
#include "genatk/checkpoint.hpp"
#include "genatk/corpus.hpp"
#include "genatk/digest.hpp"
#include "genatk/errors.hpp"
#include "genatk/io.hpp"
#include "genatk/manifest.hpp"
#include "genatk/metrics.hpp"
#include "genatk/plots.hpp"
#include "genatk/report.hpp"

namespace genatk {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

struct EncoderFlags {
  EncoderConfig config;
  void add(CLI::App* app) {
    app->add_option("--d-model", config.d_model, "Embedding width")->capture_default_str();
    app->add_option("--layers", config.n_layers, "Transformer blocks")->capture_default_str();
    app->add_option("--heads", config.n_heads, "Attention heads")->capture_default_str();
    app->add_option("--d-ff", config.d_ff, "Feed-forward width")->capture_default_str();
    app->add_option("--max-len", config.max_len, "Longest input, prompt rows included")->capture_default_str();
    app->add_option("--dropout", config.dropout, "Residual dropout during pretraining")->capture_default_str();
    app->add_flag("--tied-head", config.tied_head, "Reuse the token embedding as the output head");
  }
};

struct TrainFlags {
  TrainConfig config;
  std::string mode = "single-pass";
  void add(CLI::App* app) {
    app->add_option("--epochs", config.epochs, "Fine-tuning epochs")->capture_default_str();
    app->add_option("--batch-size", config.batch_size, "Pairs per optimizer step")->capture_default_str();
    app->add_option("--lr", config.lr, "Adam learning rate")->capture_default_str();
    app->add_option("--pll-mode", mode, "single-pass or per-position-mask")->capture_default_str();
  }
  TrainConfig resolve() const {
    TrainConfig c = config;
    c.mode = pll_mode_from_string(mode);
    c.validate();
    return c;
  }
};

struct EpsilonFlags {
  double epsilon = 0.01;
  std::string scale = "absolute";
  void add(CLI::App* app) {
    app->add_option("--epsilon", epsilon, "FGSM step size")->capture_default_str();
    app->add_option("--epsilon-scale", scale, "absolute, or embedding-rms to multiply by the token-embedding RMS")
        ->check(CLI::IsMember({"absolute", "embedding-rms"}))
        ->capture_default_str();
  }
  double resolve(const ModelParams& params) const {
    return scale == "embedding-rms" ? epsilon * embedding_rms(params) : epsilon;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app->add_option("--out-dir", c.out_dir, "Directory for every output")->capture_default_str();
  app->fallthrough();
}

std::vector<VariantPair> load_pairs(const fs::path& path, std::ostream& err) {
  LoadResult r = load_tsv(path);
  for (const auto& bad : r.rejected)
    err << "warning: " << path.string() << " line " << bad.line << " rejected: " << bad.reason << '\n';
  if (r.unknown_residues > 0)
    err << "warning: " << path.string() << ": " << r.unknown_residues << " unknown residue(s) mapped to UNK\n";
  if (r.pairs.empty()) throw EmptyDataError(path.string() + " holds no usable pairs");
  return std::move(r.pairs);
}

// Plain sequences, one per line, or the wild-type column of a pair TSV.
std::vector<TokenSequence> load_corpus(const fs::path& path) {
  const std::string text = read_file(path);
  if (text.rfind(kTsvHeader, 0) == 0) {
    std::vector<TokenSequence> out;
    std::set<TokenSequence> seen;
    for (auto& p : load_tsv(path).pairs)
      if (seen.insert(p.wt).second) out.push_back(p.wt);
    if (out.empty()) throw EmptyDataError(path.string() + " holds no sequences");
    return out;
  }
  std::vector<TokenSequence> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(TokenSequence::from_string(line));
    } catch (const VocabError& e) {
      throw VocabError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  if (out.empty()) throw EmptyDataError(path.string() + " holds no sequences");
  return out;
}

std::string add_manifest_tag(std::string svg, const std::string& manifest) {
  const auto at = svg.find(">\n");
  svg.insert(at + 2, "<metadata data-manifest=\"" + manifest + "\"/>\n");
  return svg;
}

// Shared plumbing: captures the effective configuration at start and writes
// the manifest with output digests at the end.
class Run {
 public:
  Run(std::string command, const CLI::App& root, const CLI::App& sub, const Common& common)
      : dir_(common.out_dir) {
    manifest_.command = std::move(command);
    manifest_.seed = common.seed;
    manifest_.git_describe = git_describe();
    manifest_.started_utc = utc_now();
    manifest_.config = "[" + sub.get_name() + "]\n" + sub.config_to_str(true, false);
    (void)root;
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }
  std::string manifest_name() const { return "manifest_" + tag() + ".json"; }
  void input(const fs::path& p) { manifest_.add_input(p); }

  fs::path write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    write_file_atomic(p, content);
    manifest_.add_output(p);
    return p;
  }

  void checkpoint(const std::string& name, Checkpoint ckpt) {
    ckpt.manifest = manifest_name();
    write(name, serialize_checkpoint(ckpt));
  }

  void finish() {
    manifest_.finished_utc = utc_now();
    write_file_atomic(dir_ / manifest_name(), manifest_.to_json().dump(2) + "\n");
  }

  void set_tag(std::string t) { tag_ = std::move(t); }

 private:
  std::string tag() const { return tag_.empty() ? manifest_.command : tag_; }

  fs::path dir_;
  RunManifest manifest_;
  std::string tag_;
};

std::string curve_csv(const std::vector<double>& losses) {
  std::string s = "epoch,mean_loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) s += std::to_string(i + 1) + "," + format_double(losses[i]) + "\n";
  return s;
}

std::size_t thread_budget(std::size_t requested) {
  std::size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GENATK_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap < 1) throw ConfigError("GENATK_THREADS must be a positive integer");
      n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
    } catch (const std::logic_error&) {
      throw ConfigError("GENATK_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
  }
  return n;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial robustness experiments for PLLR variant scoring", "genatk"};
  app.set_config("--config", "", "TOML configuration; command-line flags take precedence");
  app.set_version_flag("--version", git_describe());
  app.require_subcommand(1);

  Common common;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic planted-motif corpus");
  SyntheticSpec spec;
  double split_ratio = 0.8;
  std::size_t n_wild_types = 2000;
  std::optional<std::uint64_t> wild_type_seed;
  std::optional<std::size_t> motif_offset;
  add_common(gen, common);
  gen->add_option("--n-pairs", spec.n_pairs, "Variant pairs")->capture_default_str();
  gen->add_option("--seq-len", spec.seq_len, "Sequence length")->capture_default_str();
  gen->add_option("--motif", spec.motif, "Planted motif")->capture_default_str();
  gen->add_option("--label-noise", spec.label_noise, "Label flip probability")->capture_default_str();
  gen->add_option("--inside-rate", spec.inside_rate, "Share of mutations inside the motif")->capture_default_str();
  gen->add_option("--motif-offset", motif_offset, "Fixed motif start (default: centred)");
  gen->add_flag("--random-offset", spec.random_offset, "Draw the motif start per sequence");
  gen->add_option("--split-ratio", split_ratio, "Training share of the split")->capture_default_str();
  gen->add_option("--n-wild-types", n_wild_types, "Wild types in the pretraining corpus")->capture_default_str();
  gen->add_option("--wild-type-seed", wild_type_seed, "Seed for the pretraining corpus (default: seed + 1)");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Masked-language-model pretraining");
  std::string corpus_path;
  PretrainConfig pre_cfg;
  EncoderFlags pre_enc;
  add_common(pre, common);
  pre->add_option("--corpus", corpus_path, "Sequences, one per line, or a pair TSV")
      ->required()
      ->check(CLI::ExistingFile);
  pre->add_option("--epochs", pre_cfg.epochs, "Pretraining epochs")->capture_default_str();
  pre->add_option("--batch-size", pre_cfg.batch_size, "Sequences per step")->capture_default_str();
  pre->add_option("--lr", pre_cfg.lr, "Adam learning rate")->capture_default_str();
  pre->add_option("--mask-rate", pre_cfg.mask_rate, "Share of positions selected for prediction")
      ->capture_default_str();
  pre_enc.add(pre);

  // finetune
  auto* ft = app.add_subcommand("finetune", "Siamese PLLR fine-tuning");
  std::string base_path, train_path;
  TrainFlags ft_train;
  EncoderFlags ft_enc;
  add_common(ft, common);
  ft->add_option("--base", base_path, "Starting model checkpoint (default: fresh init)")->check(CLI::ExistingFile);
  ft->add_option("--train", train_path, "Training pairs (TSV)")->required()->check(CLI::ExistingFile);
  ft_train.add(ft);
  ft_enc.add(ft);

  // attack
  auto* atk = app.add_subcommand("attack", "Run one attack and write an EvalReport");
  std::string model_path, eval_path, kind_name, scope_name = "prompt-only";
  EpsilonFlags atk_eps;
  AttackConfig atk_cfg;
  add_common(atk, common);
  atk->add_option("--model", model_path, "Fine-tuned model checkpoint")->required()->check(CLI::ExistingFile);
  atk->add_option("--eval", eval_path, "Evaluation pairs (TSV)")->required()->check(CLI::ExistingFile);
  atk->add_option("--kind", kind_name, "fgsm, sp-hijack or sp-targeted")
      ->required()
      ->check(CLI::IsMember({"fgsm", "sp-hijack", "sp-targeted"}));
  atk_eps.add(atk);
  atk->add_option("--lr", atk_cfg.lr, "Soft-prompt learning rate")->capture_default_str();
  atk->add_option("--epochs", atk_cfg.epochs, "Soft-prompt epochs")->capture_default_str();
  atk->add_option("--batch-size", atk_cfg.batch_size, "Soft-prompt batch size")->capture_default_str();
  atk->add_option("--prompt-length", atk_cfg.prompt_length, "Soft-prompt rows")->capture_default_str();
  atk->add_option("--scope", scope_name, "prompt-only or prompt-and-model")
      ->check(CLI::IsMember({"prompt-only", "prompt-and-model"}))
      ->capture_default_str();
  std::string atk_mode = "single-pass";
  atk->add_option("--pll-mode", atk_mode, "single-pass or per-position-mask")->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "Plots and summary from one or more EvalReports");
  std::vector<std::string> report_paths;
  bool force = false;
  add_common(rep, common);
  rep->add_option("reports", report_paths, "report_*.json files or directories holding them")
      ->required()
      ->check(CLI::ExistingPath);
  rep->add_flag("--force", force, "Plot reports from different models or eval sets together");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Training-set size sweep, clean and under FGSM");
  std::string sw_train, sw_eval, sw_base;
  TrainFlags sw_tf;
  EpsilonFlags sw_eps;
  EncoderFlags sw_enc;
  std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t threads = 0;
  add_common(sw, common);
  sw->add_option("--train", sw_train, "Training pairs (TSV)")->required()->check(CLI::ExistingFile);
  sw->add_option("--eval", sw_eval, "Evaluation pairs (TSV)")->required()->check(CLI::ExistingFile);
  sw->add_option("--base", sw_base, "Starting model checkpoint (default: fresh init)")->check(CLI::ExistingFile);
  sw->add_option("--fractions", fractions, "Training fractions in (0, 1]")->delimiter(',')->capture_default_str();
  sw->add_option("--seeds", seeds, "Fine-tuning seeds")->delimiter(',')->capture_default_str();
  sw->add_option("--threads", threads, "Worker threads, 0 = all cores (capped by GENATK_THREADS)")
      ->capture_default_str();
  sw_tf.add(sw);
  sw_eps.add(sw);
  sw_enc.add(sw);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      Run run("gen-data", app, *gen, common);
      spec.motif_offset = motif_offset;
      spec.validate();
      const auto pairs = generate(spec, common.seed);
      const auto parts = split(pairs, split_ratio, common.seed);
      SyntheticSpec wt_spec = spec;
      wt_spec.n_pairs = n_wild_types;
      std::string wts;
      for (const auto& s : generate_wild_types(wt_spec, wild_type_seed.value_or(common.seed + 1)))
        wts += s.to_string() + "\n";
      run.write("pairs.tsv", to_tsv(pairs));
      run.write("train.tsv", to_tsv(parts.train));
      run.write("eval.tsv", to_tsv(parts.test));
      run.write("wild_types.txt", wts);
      run.finish();
      out << "wrote " << pairs.size() << " pairs (" << parts.train.size() << " train, " << parts.test.size()
          << " eval) and " << n_wild_types << " wild types to " << run.dir().string() << '\n';
    } else if (pre->parsed()) {
      Run run("pretrain", app, *pre, common);
      run.input(corpus_path);
      pre_cfg.validate();
      pre_enc.config.validate();
      const auto corpus = load_corpus(corpus_path);
      const auto result = mlm_pretrain(corpus, pre_enc.config, pre_cfg, common.seed, [&](std::size_t e, double loss) {
        out << "epoch " << e + 1 << " loss " << format_double(loss) << std::endl;
      });
      run.checkpoint("model.ckpt", model_checkpoint(result.params));
      run.write("pretrain_loss.csv", curve_csv(result.epoch_losses));
      run.finish();
    } else if (ft->parsed()) {
      Run run("finetune", app, *ft, common);
      run.input(train_path);
      const TrainConfig tc = ft_train.resolve();
      ModelParams base;
      if (!base_path.empty()) {
        run.input(base_path);
        base = load_model(base_path);
      } else {
        ft_enc.config.validate();
        base = ModelParams::init(ft_enc.config, common.seed);
      }
      const auto train = load_pairs(train_path, err);
      const auto result = finetune(train, tc, std::move(base), common.seed,
                                   [&](std::size_t e, double loss, const ModelParams&) {
                                     out << "epoch " << e + 1 << " loss " << format_double(loss) << std::endl;
                                   });
      run.checkpoint("model.ckpt", model_checkpoint(result.params));
      run.write("training_curve.csv", curve_csv(result.epoch_losses));
      run.finish();
    } else if (atk->parsed()) {
      const AttackKind kind = attack_kind_from_string(kind_name);
      Run run("attack", app, *atk, common);
      run.set_tag(std::string("attack_") + to_string(kind));
      run.input(model_path);
      run.input(eval_path);
      const ModelParams params = load_model(model_path);
      const auto eval = load_pairs(eval_path, err);
      const PllMode mode = pll_mode_from_string(atk_mode);
      const auto clean = score_pairs(eval, params, mode);

      nlohmann::json cfg_json = {{"kind", to_string(kind)}, {"pll_mode", to_string(mode)}, {"seed", common.seed}};
      std::vector<PllrRecord> attacked;
      if (kind == AttackKind::kFgsm) {
        FgsmConfig fc;
        fc.epsilon = atk_eps.resolve(params);
        fc.mode = mode;
        fc.validate();
        for (auto& r : fgsm_attack_set(eval, params, fc)) attacked.push_back(r.adversarial);
        cfg_json["epsilon"] = atk_eps.epsilon;
        cfg_json["epsilon_scale"] = atk_eps.scale;
        cfg_json["effective_epsilon"] = fc.epsilon;
      } else {
        atk_cfg.kind = kind;
        atk_cfg.scope = update_scope_from_string(scope_name);
        atk_cfg.mode = mode;
        atk_cfg.validate();
        const auto trained = sp_attack_train(eval, params, atk_cfg, common.seed);
        for (std::size_t e = 0; e < trained.epoch_losses.size(); ++e)
          out << "epoch " << e + 1 << " attack loss " << format_double(trained.epoch_losses[e]) << std::endl;
        attacked = score_pairs(eval, trained.params, mode, &trained.prompt);
        run.checkpoint(std::string("prompt_") + to_string(kind) + ".ckpt",
                       prompt_checkpoint(trained.prompt, params.config));
        if (atk_cfg.scope == UpdateScope::kPromptAndModel)
          run.checkpoint(std::string("model_") + to_string(kind) + ".ckpt", model_checkpoint(trained.params));
        run.write(std::string("attack_curve_") + to_string(kind) + ".csv", curve_csv(trained.epoch_losses));
        cfg_json.update({{"lr", atk_cfg.lr},
                         {"epochs", atk_cfg.epochs},
                         {"batch_size", atk_cfg.batch_size},
                         {"prompt_length", atk_cfg.prompt_length},
                         {"scope", to_string(atk_cfg.scope)}});
      }
      EvalReport report = make_report(kind, clean, attacked);
      report.model_digest = tensor_map_digest(params.tensors);
      report.eval_digest = sha256_file(eval_path);
      report.manifest = run.manifest_name();
      report.attack_config = cfg_json;
      run.write(samples_file_name(kind), samples_csv(report.rows));
      run.write(report_file_name(kind), report_json(report).dump(2) + "\n");
      run.finish();
      const auto& a = report.aggregates;
      out << to_string(kind) << ": AUC " << format_double(a.clean_auc) << " -> " << format_double(a.attacked_auc)
          << ", AUPR " << format_double(a.clean_aupr) << " -> " << format_double(a.attacked_aupr) << ", flip rate "
          << format_double(a.flip_rate) << '\n';
    } else if (rep->parsed()) {
      Run run("report", app, *rep, common);
      std::vector<fs::path> files;
      for (const auto& p : report_paths) {
        if (fs::is_directory(p)) {
          std::vector<fs::path> found;
          for (const auto& e : fs::directory_iterator(p)) {
            const std::string n = e.path().filename().string();
            if (n.rfind("report_", 0) == 0 && e.path().extension() == ".json") found.push_back(e.path());
          }
          std::sort(found.begin(), found.end());
          files.insert(files.end(), found.begin(), found.end());
        } else {
          files.emplace_back(p);
        }
      }
      if (files.empty()) throw UsageError("no report_*.json files found");
      std::vector<EvalReport> reports;
      for (const auto& f : files) {
        run.input(f);
        reports.push_back(load_report(f));
      }
      for (const auto& r : reports) {
        if (r.model_digest != reports.front().model_digest || r.eval_digest != reports.front().eval_digest) {
          if (!force)
            throw UsageError("reports come from different models or evaluation sets; curves would not be "
                             "comparable (pass --force to plot anyway)");
          err << "warning: plotting reports from different models or evaluation sets\n";
          break;
        }
      }
      const std::string manifest = run.manifest_name();
      for (const auto& plot : report_plots(reports)) run.write(plot.name, add_manifest_tag(plot.svg, manifest));

      nlohmann::json summary = {{"manifest", manifest}, {"reports", nlohmann::json::array()}};
      std::map<AttackKind, double> aupr_drop;
      for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& a = reports[i].aggregates;
        summary["reports"].push_back({{"file", files[i].filename().string()},
                                      {"attack", to_string(reports[i].attack)},
                                      {"auc_drop", a.clean_auc - a.attacked_auc},
                                      {"aupr_drop", a.clean_aupr - a.attacked_aupr},
                                      {"flip_rate", a.flip_rate}});
        aupr_drop.emplace(reports[i].attack, a.clean_aupr - a.attacked_aupr);
      }
      if (reports.size() >= 2) {
        run.write("attack_comparison.csv", attack_comparison_csv(reports));
        if (aupr_drop.size() == 3) {
          const double t = aupr_drop.at(AttackKind::kSpTargeted);
          const bool holds = t >= aupr_drop.at(AttackKind::kSpHijack) && t >= aupr_drop.at(AttackKind::kFgsm);
          summary["ordering"] = {{"targeted_strongest", holds},
                                 {"flag", holds ? "" : "AUPR degradation of sp-targeted is not the largest"}};
          if (!holds) err << "flag: AUPR degradation of sp-targeted is not the largest of the three attacks\n";
        }
      }
      run.write("summary.json", summary.dump(2) + "\n");
      run.finish();
      out << "plotted " << reports.size() << " report(s) into " << run.dir().string() << '\n';
    } else if (sw->parsed()) {
      Run run("sweep", app, *sw, common);
      run.input(sw_train);
      run.input(sw_eval);
      ModelParams base;
      if (!sw_base.empty()) {
        run.input(sw_base);
        base = load_model(sw_base);
      } else {
        sw_enc.config.validate();
        base = ModelParams::init(sw_enc.config, common.seed);
      }
      SweepConfig cfg;
      cfg.fractions = fractions;
      cfg.seeds = seeds;
      cfg.train = sw_tf.resolve();
      cfg.fgsm.epsilon = sw_eps.resolve(base);
      cfg.threads = thread_budget(threads);
      const auto train = load_pairs(sw_train, err);
      const auto eval = load_pairs(sw_eval, err);
      const auto result = sample_size_sweep(train, eval, base, cfg);
      for (const auto& w : result.warnings) err << "warning: " << w << '\n';
      run.write("sweep.csv", sweep_csv(result));
      run.write("sweep_cells.csv", sweep_cells_csv(result));
      run.write("sweep.svg", add_manifest_tag(sweep_svg(result), run.manifest_name()));
      run.finish();
      out << sweep_csv(result);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ContractError& e) {
    err << "numeric/contract error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace genatk
