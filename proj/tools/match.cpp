// match - command-line driver for statement/proof matching experiments.
//
//   match ingest raw.txt            -> corpus.tsv
//   match split corpus.tsv          -> train.tsv dev.tsv test.tsv
//   match replace train.tsv         -> train.<level>.tsv
//   match vocab train.tsv           -> vocab.tsv
//   match train --train T --dev D   -> model.pmm checkpoint.pmc history.log dev.log
//   match eval --model M --test T   -> report.txt report.tsv
//   match grid --train T --dev D --test T -> grid.txt grid.tsv
//
// Every command also writes <command>.manifest.json and <command>.config
// into the output directory; `match <command> --config <command>.config`
// reruns it.
#include <chrono>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmatch/config.hpp"
#include "pmatch/corpus.hpp"
#include "pmatch/decoding.hpp"
#include "pmatch/error.hpp"
#include "pmatch/eval.hpp"
#include "pmatch/ingest.hpp"
#include "pmatch/kernels.hpp"
#include "pmatch/model_io.hpp"
#include "pmatch/rng.hpp"
#include "pmatch/symbols.hpp"
#include "pmatch/tfidf.hpp"
#include "pmatch/training.hpp"
#include "pmatch/vocab.hpp"

#ifndef PMATCH_VERSION
#define PMATCH_VERSION "0.1.0-unknown"
#endif

namespace fs = std::filesystem;
using namespace pmatch;

namespace {

constexpr int kExitError = 1;
constexpr int kExitRejected = 2;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
  return buf;
}

// Records the files a command touched, then writes the manifest.
class Run {
 public:
  Run(std::string command, const RunConfig& cfg)
      : command_(std::move(command)), cfg_(cfg), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(cfg_.out_dir);
  }

  fs::path out(const std::string& name) const { return fs::path(cfg_.out_dir) / name; }

  void input(const std::string& path) { inputs_.push_back(path); }

  void write(const fs::path& path, const std::string& bytes) {
    write_file_bytes(path, bytes);
    output(path);
  }

  void output(const fs::path& path) { outputs_.push_back(path.string()); }

  void finish(int exit_code) const {
    nlohmann::ordered_json m;
    m["command"] = command_;
    m["version"] = PMATCH_VERSION;
    nlohmann::ordered_json config;
    for (const auto& [k, v] : cfg_.entries()) config[k] = v;
    m["config"] = config;
    m["inputs"] = checksums(inputs_);
    m["outputs"] = checksums(outputs_);
    m["threads"] = kernels::max_threads();
    m["exit_code"] = exit_code;
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_file_bytes(out(command_ + ".manifest.json"), m.dump(2) + "\n");

    std::string text = "# " + command_ + " " + PMATCH_VERSION + "\n";
    for (const auto& [k, v] : cfg_.entries()) {
      if (!v.empty()) text += k + " = " + v + "\n";
    }
    write_file_bytes(out(command_ + ".config"), text);
  }

 private:
  static nlohmann::ordered_json checksums(const std::vector<std::string>& paths) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& p : paths) j[p] = "fnv1a64:" + hex64(fnv1a64(read_file_bytes(p)));
    return j;
  }

  std::string command_;
  const RunConfig& cfg_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
};

std::string corpus_bytes(const Corpus& corpus) {
  std::ostringstream os;
  write_corpus(corpus, os);
  return os.str();
}

Corpus load(Run& run, const std::string& path, Channel channel) {
  run.input(path);
  return apply_channel(read_corpus(path), channel);
}

void say(const RunConfig& cfg, const std::string& line) {
  if (!cfg.quiet) std::cout << line << '\n';
}

int cmd_ingest(const RunConfig& cfg, bool strict) {
  RunConfig::require_existing({{"corpus", cfg.corpus_path}});
  Run run("ingest", cfg);
  run.input(cfg.corpus_path);
  std::ifstream in(cfg.corpus_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + cfg.corpus_path + "'");
  const auto report = ingest_raw(in);
  if (report.kept.empty()) throw Error(ErrorCode::EmptyCorpus, "every record was rejected");
  run.write(run.out("corpus.tsv"), corpus_bytes(report.kept));
  std::cout << report.summary() << '\n';
  const int code = strict && report.rejected() > 0 ? kExitRejected : 0;
  run.finish(code);
  return code;
}

int cmd_split(const RunConfig& cfg) {
  RunConfig::require_existing({{"corpus", cfg.corpus_path}});
  Run run("split", cfg);
  const auto corpus = load(run, cfg.corpus_path, Channel::Both);
  SplitSpec spec{cfg.split_mode, cfg.ratios[0], cfg.ratios[1], cfg.ratios[2], cfg.seed};
  const auto splits = split_corpus(corpus, spec);
  run.write(run.out("train.tsv"), corpus_bytes(splits.train));
  run.write(run.out("dev.tsv"), corpus_bytes(splits.dev));
  run.write(run.out("test.tsv"), corpus_bytes(splits.test));
  say(cfg, "train " + std::to_string(splits.train.size()) + ", dev " + std::to_string(splits.dev.size()) +
               ", test " + std::to_string(splits.test.size()));
  run.finish(0);
  return 0;
}

int cmd_replace(const RunConfig& cfg) {
  RunConfig::require_existing({{"corpus", cfg.corpus_path}});
  if (!cfg.protected_path.empty()) RunConfig::require_existing({{"protected", cfg.protected_path}});
  Run run("replace", cfg);
  const auto corpus = load(run, cfg.corpus_path, Channel::Both);
  if (!cfg.protected_path.empty()) run.input(cfg.protected_path);
  const auto replaced = replace_corpus(corpus, cfg.replacement_level(), cfg.protected_set(), cfg.seed);
  const auto name = fs::path(cfg.corpus_path).stem().string() + "." + replacement_kind_name(cfg.level) + ".tsv";
  run.write(run.out(name), corpus_bytes(replaced));
  say(cfg, "wrote " + run.out(name).string());
  run.finish(0);
  return 0;
}

int cmd_vocab(const RunConfig& cfg) {
  RunConfig::require_existing({{"corpus", cfg.corpus_path}});
  Run run("vocab", cfg);
  const auto corpus = load(run, cfg.corpus_path, cfg.channel);
  const auto vocab = build_vocab(corpus, cfg.min_freq);
  std::string text = "# min_freq=" + std::to_string(vocab.min_freq()) + " size=" + std::to_string(vocab.size()) + "\n";
  text += "0\t<unk>\n";
  for (std::size_t i = 0; i < vocab.tokens().size(); ++i) {
    text += std::to_string(i + 1) + "\t" + format_token(vocab.tokens()[i]) + "\n";
  }
  run.write(run.out("vocab.tsv"), text);
  say(cfg, "vocabulary size " + std::to_string(vocab.size()));
  run.finish(0);
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  RunConfig::require_existing({{"train", cfg.train_path}, {"dev", cfg.dev_path}});
  if (cfg.encoder.kind == EncoderKind::TfIdf) {
    throw Error(ErrorCode::ConfigError, "field 'encoder': tfidf has no trainable parameters");
  }
  cfg.train.validate();
  Run run("train", cfg);
  const auto train_corpus = load(run, cfg.train_path, cfg.channel);
  const auto dev = load(run, cfg.dev_path, cfg.channel);
  auto state = init_model(build_vocab(train_corpus, cfg.min_freq), cfg.encoder, cfg.seed);

  TrainCallbacks callbacks;
  if (!cfg.quiet) {
    callbacks.on_epoch = [&](std::size_t epoch, const ModelState&) {
      if (epoch % cfg.train.eval_every == 0 || epoch == cfg.train.epochs) std::cerr << "epoch " << epoch << '\n';
    };
  }
  const auto result = train(train_corpus, dev, std::move(state), cfg.train, callbacks);

  run.write(run.out("model.pmm"), serialize_model(result.best));
  save_checkpoint(run.out("checkpoint.pmc"), result.last, result.optimizer);
  run.output(run.out("checkpoint.pmc"));
  run.write(run.out("history.log"), format_history(result.history));
  std::string dev_log;
  for (const auto& d : result.history.dev) {
    dev_log += std::to_string(d.epoch) + "\t" + real(d.accuracy) + "\t" + real(d.mrr) + "\n";
  }
  run.write(run.out("dev.log"), dev_log);
  say(cfg, "best epoch " + std::to_string(result.history.best_epoch) + ", dev accuracy " +
               percent(result.history.best_accuracy) + "%");
  run.finish(0);
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  RunConfig::require_existing({{"test", cfg.test_path}});
  const bool tfidf = cfg.encoder.kind == EncoderKind::TfIdf && cfg.model_path.empty();
  if (!tfidf) RunConfig::require_existing({{"model", cfg.model_path}});
  Run run("eval", cfg);
  const auto test = load(run, cfg.test_path, cfg.channel);
  if (cfg.k && *cfg.k > test.size()) {
    throw Error(ErrorCode::ConfigError, "field 'k': k=" + std::to_string(*cfg.k) + " exceeds dataset size " +
                                            std::to_string(test.size()));
  }
  std::vector<TokenList> statements, proofs;
  for (const auto& p : test.pairs) {
    statements.push_back(p.statement);
    proofs.push_back(p.proof);
  }

  Matrix scores;
  std::string encoder_name;
  if (tfidf) {
    TfIdfStats stats;
    if (!cfg.train_path.empty()) {
      RunConfig::require_existing({{"train", cfg.train_path}});
      stats = TfIdfStats::from_corpus(load(run, cfg.train_path, cfg.channel));
    } else {
      stats = TfIdfStats::from_corpus(test);
    }
    scores = build_tfidf_score_matrix(stats, statements, proofs);
    encoder_name = "tfidf";
  } else {
    run.input(cfg.model_path);
    const auto state = load_model(cfg.model_path);
    ScoreMatrixOptions options;
    options.block_rows = cfg.block_rows;
    scores = build_score_matrix(state, statements, proofs, options);
    encoder_name = encoder_kind_name(state.config.kind);
  }

  const std::string k_name = cfg.decode == DecodeMode::Global ? (cfg.k ? std::to_string(*cfg.k) : "all") : "-";
  std::string text = "encoder\t" + encoder_name + "\n";
  text += std::string("decode\t") + (cfg.decode == DecodeMode::Local ? "local" : "global") + "\n";
  text += "k\t" + k_name + "\n";
  MetricReport report;
  std::string extra;
  if (cfg.decode == DecodeMode::Local) {
    const auto ranking = decode_local(scores, false);
    report = report_local(ranking);
    extra = "\n" + assignment_distribution(ranking).format();
  } else {
    const auto match = decode_global(scores, cfg.k);
    report = report_global(match);
    if (match.padded) extra = "\nsparse graph had no perfect matching; solved densely with padding\n";
  }
  text += "n\t" + std::to_string(report.n) + "\n";
  text += "mrr\t" + (report.mrr ? percent(*report.mrr) : std::string("-")) + "\n";
  text += "accuracy\t" + percent(report.accuracy) + "\n";
  text += extra;
  run.write(run.out("report.txt"), text);

  std::string tsv = "encoder\tdecode\tk\tn\tmrr\taccuracy\n";
  tsv += encoder_name + "\t" + (cfg.decode == DecodeMode::Local ? "local" : "global") + "\t" + k_name + "\t" +
         std::to_string(report.n) + "\t" + (report.mrr ? real(*report.mrr) : std::string("-")) + "\t" +
         real(report.accuracy) + "\n";
  run.write(run.out("report.tsv"), tsv);
  if (!cfg.quiet) std::cout << text;
  run.finish(0);
  return 0;
}

int cmd_grid(const RunConfig& cfg) {
  RunConfig::require_existing({{"train", cfg.train_path}, {"dev", cfg.dev_path}, {"test", cfg.test_path}});
  if (cfg.encoder.kind != EncoderKind::TfIdf) cfg.train.validate();
  Run run("grid", cfg);
  const auto train_corpus = load(run, cfg.train_path, cfg.channel);
  const auto dev = load(run, cfg.dev_path, cfg.channel);
  const auto test = load(run, cfg.test_path, cfg.channel);
  if (!cfg.protected_path.empty()) run.input(cfg.protected_path);

  const auto all = standard_grid_levels(cfg.alpha);
  std::vector<GridLevel> levels;
  if (cfg.levels.empty()) {
    levels = all;
  } else {
    for (const auto& name : cfg.levels) {
      const auto kind = parse_replacement_kind(name);
      for (const auto& l : all) {
        if (l.level.kind == kind) levels.push_back(l);
      }
    }
  }
  const auto report = run_grid(train_corpus, dev, test, levels, cfg.encoder, cfg.min_freq, cfg.train,
                               GridSeeds{cfg.seed, cfg.seed}, cfg.protected_set());
  run.write(run.out("grid.txt"), report.format_table());
  run.write(run.out("grid.tsv"), report.format_records());
  if (!cfg.quiet) std::cout << report.format_table();
  run.finish(0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();

  CLI::App app{"Statement/proof matching experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", PMATCH_VERSION);

  std::vector<std::pair<std::string, std::string>> overrides;
  std::string config_path;
  bool strict = false;

  auto setting = [&](CLI::App* target, const std::string& flag, const std::string& key, const std::string& help) {
    target->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); }, help);
  };

  app.add_option("--config", config_path, "flat key = value config file");
  setting(&app, "--seed", "seed", "master seed");
  setting(&app, "--out-dir", "out_dir", "output directory");
  setting(&app, "--channel", "channel", "both | text | math");
  app.add_flag_callback("--quiet", [&] { overrides.emplace_back("quiet", "true"); }, "suppress progress output");

  auto positional = [&](CLI::App* target, const std::string& key) {
    target->add_option_function<std::string>(
        key, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); }, "input corpus");
  };
  auto encoder_options = [&](CLI::App* target) {
    setting(target, "--encoder", "encoder", "tfidf | pooled | attention");
    setting(target, "--d", "d", "embedding size");
    setting(target, "--layers", "layers", "self-attention layers");
    setting(target, "--heads", "heads", "attention heads");
    setting(target, "--d-k", "d_k", "query/key size");
    setting(target, "--pooling", "pooling", "max | mean");
    setting(target, "--min-freq", "min_freq", "vocabulary frequency cutoff");
  };
  auto train_options = [&](CLI::App* target) {
    setting(target, "--objective", "objective", "local | hybrid");
    setting(target, "--batch-size", "batch_size", "pairs per batch");
    setting(target, "--epochs", "epochs", "training epochs");
    setting(target, "--lr", "lr", "initial learning rate");
    setting(target, "--optimizer", "optimizer", "sgd | asgd");
    setting(target, "--lr-decay", "lr_decay", "per-epoch learning-rate decay");
    setting(target, "--eval-every", "eval_every", "epochs between dev evaluations");
    setting(target, "--clip-norm", "clip_norm", "gradient norm cap");
  };

  auto* ingest = app.add_subcommand("ingest", "linearize and filter raw records");
  positional(ingest, "corpus");
  ingest->add_flag("--strict", strict, "exit 2 when any record is rejected");

  auto* split = app.add_subcommand("split", "split a corpus into train/dev/test");
  positional(split, "corpus");
  setting(split, "--mode", "mode", "mixed | unmixed");
  setting(split, "--ratios", "ratios", "train,dev,test fractions");

  auto* replace = app.add_subcommand("replace", "apply a symbol replacement level");
  positional(replace, "corpus");
  setting(replace, "--level", "level", "conservation | partial | full | transposition");
  setting(replace, "--alpha", "alpha", "fraction replaced at the partial level");
  setting(replace, "--protected", "protected", "protected symbol file");
  replace->add_flag_callback("--protect-probability", [&] { overrides.emplace_back("protect_probability", "true"); },
                             "protect P, E, V, sigma, rho");

  auto* vocab = app.add_subcommand("vocab", "build a vocabulary");
  positional(vocab, "corpus");
  setting(vocab, "--min-freq", "min_freq", "frequency cutoff");

  auto* train_cmd = app.add_subcommand("train", "train an encoder");
  setting(train_cmd, "--train", "train", "training corpus");
  setting(train_cmd, "--dev", "dev", "development corpus");
  encoder_options(train_cmd);
  train_options(train_cmd);

  auto* eval = app.add_subcommand("eval", "evaluate a model on a test corpus");
  setting(eval, "--model", "model", "model file");
  setting(eval, "--test", "test", "test corpus");
  setting(eval, "--train", "train", "document statistics for tfidf");
  setting(eval, "--encoder", "encoder", "tfidf to evaluate without a model");
  setting(eval, "--decode", "decode", "local | global");
  setting(eval, "--k", "k", "candidates kept per statement (or all)");
  setting(eval, "--block-rows", "block_rows", "statements scored per block");

  auto* grid = app.add_subcommand("grid", "cross-replacement train/test grid");
  setting(grid, "--train", "train", "training corpus");
  setting(grid, "--dev", "dev", "development corpus");
  setting(grid, "--test", "test", "test corpus");
  setting(grid, "--levels", "levels", "comma-separated replacement levels");
  setting(grid, "--alpha", "alpha", "fraction replaced at the partial level");
  setting(grid, "--protected", "protected", "protected symbol file");
  encoder_options(grid);
  train_options(grid);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      for (const auto& [k, v] : read_config_file(config_path)) cfg.set(k, v);
    }
    for (const auto& [k, v] : overrides) cfg.set(k, v);

    if (ingest->parsed()) return cmd_ingest(cfg, strict);
    if (split->parsed()) return cmd_split(cfg);
    if (replace->parsed()) return cmd_replace(cfg);
    if (vocab->parsed()) return cmd_vocab(cfg);
    if (train_cmd->parsed()) return cmd_train(cfg);
    if (eval->parsed()) return cmd_eval(cfg);
    if (grid->parsed()) return cmd_grid(cfg);
  } catch (const std::exception& e) {
    std::cerr << "match: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
