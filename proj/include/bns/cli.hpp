#pragma once

// Command-line front end: preprocess | train | eval | ablate | sweep |
// attn-export | gradcheck.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bns/gradient_suite.hpp"
#include "bns/train_eval.hpp"
#include "json.hpp"

namespace bns::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr double kGradTolerance = 1e-4;

namespace fs = std::filesystem;

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string corpus, valid, test, lexicon, embeddings, config_file, cache_dir, model_dir, text;
  std::string format = "tsv";
  std::string out = "bns-out";
  std::string mode = "conflict";
  std::string sizes = "2,3,4,5";
  std::map<std::string, std::string> overrides;  // config key -> flag value
};

inline std::string dashed(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return key;
}

inline void add_config_flags(CLI::App* app, Options& o) {
  for (const auto& field : config_fields()) {
    std::string names = "--" + dashed(field.key);
    if (field.key == "learning_rate") names += ",--lr";
    app->add_option_function<std::string>(
        names, [&o, key = field.key](const std::string& v) { o.overrides[key] = v; }, field.help);
  }
  app->add_option("--config", o.config_file, "flat key = value config file")->check(CLI::ExistingFile);
}

inline void add_data_flags(CLI::App* app, Options& o, bool corpus_required) {
  auto* c = app->add_option("--corpus", o.corpus, "training corpus (label<TAB>text)")->check(CLI::ExistingFile);
  if (corpus_required) c->required();
  app->add_option("--format", o.format, "tsv|pretagged")->check(CLI::IsMember({"tsv", "pretagged"}));
  app->add_option("--lexicon", o.lexicon, "sentiment lexicon (word<TAB>value)")->required()->check(CLI::ExistingFile);
  app->add_option("--out", o.out, "output directory");
}

inline void add_split_flags(CLI::App* app, Options& o) {
  app->add_option("--valid", o.valid, "validation corpus")->check(CLI::ExistingFile);
  app->add_option("--test", o.test, "test corpus")->check(CLI::ExistingFile);
  app->add_option("--embeddings", o.embeddings, "word2vec text embeddings")->check(CLI::ExistingFile);
}

/// Defaults (seeded from BNS_SEED when set) < config file < flags.
inline RunConfig effective_config(const Options& o, const Manifest& base = {}) {
  RunConfig defaults;
  if (const char* env = std::getenv("BNS_SEED"); env != nullptr && *env != '\0') {
    set_config_value(defaults, "seed", env);
  }
  Manifest file = base;
  if (!o.config_file.empty()) {
    for (const auto& [k, v] : load_manifest(o.config_file)) file[k] = v;
  }
  return config_merge(file, Manifest(o.overrides.begin(), o.overrides.end()), defaults);
}

inline CorpusFormat corpus_format(const Options& o) {
  return o.format == "pretagged" ? CorpusFormat::Pretagged : CorpusFormat::Tsv;
}

inline void write_run_manifest(const Options& o, const std::string& command, const RunConfig& config,
                               const Manifest& extra = {}) {
  fs::create_directories(o.out);
  Manifest m = to_manifest(config);
  m["command"] = command;
  m["version"] = kVersion;
  m["tagger"] = RuleTagger{}.version();
  for (const auto& [k, v] : std::map<std::string, std::string>{{"corpus", o.corpus},
                                                               {"valid", o.valid},
                                                               {"test", o.test},
                                                               {"lexicon", o.lexicon},
                                                               {"embeddings", o.embeddings},
                                                               {"format", o.format}}) {
    if (!v.empty()) m["input." + k] = v;
  }
  for (const auto& [k, v] : extra) m[k] = v;
  save_manifest(fs::path(o.out) / "manifest.txt", m);
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  detail::write_file_atomic(path, text);
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

struct Workspace {
  RunConfig config;
  SentimentLexicon lexicon;
  RuleTagger tagger;
  RawSplits raw;
  Vocabulary vocab;
  std::optional<Tensor> embeddings;
};

inline Workspace load_workspace(const Options& o, const RunConfig& config, std::ostream& out) {
  Workspace w;
  w.config = config;
  w.lexicon = load_lexicon(o.lexicon);
  w.raw.train = load_corpus(o.corpus, corpus_format(o));
  if (!o.valid.empty()) w.raw.valid = load_corpus(o.valid, corpus_format(o));
  if (!o.test.empty()) w.raw.test = load_corpus(o.test, corpus_format(o));
  w.vocab = build_vocab(w.raw.train, config.train.min_freq);
  if (!o.embeddings.empty()) {
    Rng rng(config.train.seed);
    EmbeddingLoadStats stats;
    w.embeddings = load_embeddings(o.embeddings, w.vocab, config.model.embed_dim, rng, &stats);
    out << "embeddings: " << stats.found << " found, " << stats.missing << " random\n";
  }
  out << "corpus: train " << w.raw.train.size();
  if (w.raw.valid) out << ", valid " << w.raw.valid->size();
  if (w.raw.test) out << ", test " << w.raw.test->size();
  out << "; vocabulary " << w.vocab.size() << "\n";
  return w;
}

inline PreprocessSettings settings_of(const RunConfig& c) { return {c.model.window_size, c.model.max_seq_len, true}; }

// ---- subcommands ---------------------------------------------------------

inline int cmd_preprocess(const Options& o, std::ostream& out) {
  const RunConfig config = effective_config(o);
  const Workspace w = load_workspace(o, config, out);
  const fs::path cache = o.cache_dir.empty() ? fs::path(o.out) / "cache" : fs::path(o.cache_dir);
  const auto result = preprocess_corpus(w.raw.train, w.vocab, settings_of(config), w.lexicon, w.tagger, cache);
  std::size_t chunks = 0, fallback = 0, truncated = 0;
  for (const auto& ex : result.examples) {
    chunks += ex.segmentation.chunks.size();
    fallback += ex.segmentation.fallback ? 1 : 0;
    truncated += ex.truncated ? 1 : 0;
  }
  out << "examples " << result.examples.size() << " sarcastic " << w.raw.train.sarcastic_count() << "\n";
  out << "chunks " << chunks << " fallback " << fallback << " truncated " << truncated << "\n";
  out << "ratio " << result.ratio << "\n";
  out << "cache " << (result.cache_hit ? "hit " : "written ") << result.cache_file.string() << "\n";
  write_text(fs::path(o.out) / "vocab.txt", w.vocab.serialize());
  write_run_manifest(o, "preprocess", config,
                     {{"result.ratio", detail::format_double(result.ratio)}, {"result.cache", result.cache_file.string()}});
  return 0;
}

inline void save_model(const fs::path& dir, const BnsModel& model, const Vocabulary& vocab, const RunConfig& config) {
  fs::create_directories(dir);
  save_checkpoint(dir / "model.ckpt", model.state());
  write_text(dir / "vocab.txt", vocab.serialize());
  save_manifest(dir / "config.txt", to_manifest(config));
}

inline int cmd_train(const Options& o, std::ostream& out) {
  const RunConfig config = effective_config(o);
  const Workspace w = load_workspace(o, config, out);
  const fs::path cache = o.cache_dir.empty() ? fs::path(o.out) / "cache" : fs::path(o.cache_dir);
  const Splits splits = preprocess_splits(w.raw, w.vocab, settings_of(config), w.lexicon, w.tagger, cache);
  write_run_manifest(o, "train", config);
  BnsModel model(config.model, w.vocab.size(), config.train.seed, w.embeddings);
  TrainHooks hooks;
  hooks.log = &out;
  hooks.dump_dir = fs::path(o.out);
  RunRecord record = train(model, splits.train, splits.valid, config.train, hooks);
  const auto train_metrics = evaluate(model, splits.train);
  out << metrics_row("train", train_metrics) << "\n";
  if (!splits.valid.empty()) out << metrics_row("valid", evaluate(model, splits.valid)) << "\n";
  if (!splits.test.empty()) {
    record.test_metrics = evaluate(model, splits.test);
    out << metrics_row("test", *record.test_metrics) << "\n";
  }
  save_model(o.out, model, w.vocab, config);
  auto j = to_json(record);
  j["train_metrics"] = to_json(train_metrics);
  write_json(fs::path(o.out) / "run.json", j);
  write_text(fs::path(o.out) / "loss_curve.tsv", loss_curve_text(record));
  write_run_manifest(o, "train", config,
                     {{"result.epochs_run", std::to_string(record.epochs_run)},
                      {"result.best_epoch", std::to_string(record.best_epoch)}});
  out << "saved " << (fs::path(o.out) / "model.ckpt").string() << "\n";
  return 0;
}

struct LoadedModel {
  RunConfig config;
  Vocabulary vocab;
  BnsModel model;
};

inline LoadedModel load_model(const Options& o) {
  const fs::path dir = o.model_dir;
  for (const char* f : {"model.ckpt", "vocab.txt", "config.txt"}) {
    if (!fs::exists(dir / f)) throw UsageError("model directory " + dir.string() + " lacks " + f + " (run train first)");
  }
  const RunConfig config = effective_config(o, load_manifest(dir / "config.txt"));
  Vocabulary vocab = Vocabulary::deserialize(detail::read_file(dir / "vocab.txt"));
  BnsModel model(config.model, vocab.size(), config.train.seed);
  model.load_state(load_checkpoint(dir / "model.ckpt"));
  return {config, std::move(vocab), std::move(model)};
}

inline int cmd_eval(const Options& o, std::ostream& out) {
  const LoadedModel m = load_model(o);
  const auto lexicon = load_lexicon(o.lexicon);
  const Corpus corpus = load_corpus(o.corpus, corpus_format(o));
  const auto examples = preprocess_corpus(corpus, m.vocab, settings_of(m.config), lexicon, RuleTagger{}).examples;
  const auto metrics = evaluate(m.model, examples);
  const auto loss = evaluate_loss(m.model, examples);
  out << "examples " << examples.size() << "\n";
  out << "Split\tPre.\tRec.\tF1\tAcc.\n" << metrics_row("eval", metrics) << "\n";
  out << "loss " << loss.total << " j_sar " << loss.j_sar << " j_imp " << loss.j_imp << " j_exp " << loss.j_exp << "\n";
  write_json(fs::path(o.out) / "metrics.json", {{"metrics", to_json(metrics)}, {"loss", to_json(loss)}});
  write_run_manifest(o, "eval", m.config, {{"input.model_dir", o.model_dir}});
  return 0;
}

inline int cmd_ablate(const Options& o, std::ostream& out) {
  const RunConfig config = effective_config(o);
  const Workspace w = load_workspace(o, config, out);
  write_run_manifest(o, "ablate", config);
  const Splits splits = preprocess_splits(w.raw, w.vocab, settings_of(config), w.lexicon, w.tagger);
  const auto results = ablate(splits, w.vocab.size(), config, w.embeddings, {}, &out);
  const std::string table = experiment_table(results, "Variant");
  out << table;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) j.push_back({{"variant", r.name}, {"metrics", to_json(r.metrics)}, {"run", to_json(r.record)}});
  write_text(fs::path(o.out) / "ablation.tsv", table);
  write_json(fs::path(o.out) / "ablation.json", j);
  return 0;
}

inline int cmd_sweep(const Options& o, std::ostream& out) {
  const RunConfig config = effective_config(o);
  const auto sizes = parse_size_list("sizes", o.sizes);
  const Workspace w = load_workspace(o, config, out);
  write_run_manifest(o, "sweep", config, {{"sweep.sizes", o.sizes}});
  const auto results = window_sweep(w.raw, w.vocab, w.lexicon, w.tagger, config, sizes, w.embeddings, &out);
  const std::string table = experiment_table(results, "Window");
  out << table;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) j.push_back({{"setting", r.name}, {"metrics", to_json(r.metrics)}, {"run", to_json(r.record)}});
  write_text(fs::path(o.out) / "sweep.tsv", table);
  write_json(fs::path(o.out) / "sweep.json", j);
  return 0;
}

inline int cmd_attn_export(const Options& o, std::ostream& out) {
  const LoadedModel m = load_model(o);
  const auto lexicon = load_lexicon(o.lexicon);
  Corpus corpus;
  if (!o.text.empty()) {
    corpus.examples.push_back({o.text, 0, {}, {}});
  } else if (!o.corpus.empty()) {
    corpus = load_corpus(o.corpus, corpus_format(o));
  } else {
    throw UsageError("attn-export needs --text or --corpus");
  }
  const AttentionMode mode = o.mode == "raw" ? AttentionMode::Raw : AttentionMode::Conflict;
  std::vector<AttentionRecord> records;
  for (const auto& ex : corpus.examples) {
    const auto prep = preprocess_example(ex, m.vocab, settings_of(m.config), lexicon, RuleTagger{});
    records.push_back(export_attention(m.model, prep, mode));
    for (const auto& c : records.back().chunks) out << c.mass << '\t' << c.text << '\n';
    out << '\n';
  }
  write_json(fs::path(o.out) / "attention.json", to_json(records));
  write_run_manifest(o, "attn-export", m.config, {{"input.model_dir", o.model_dir}, {"attention_export_mode", o.mode}});
  return 0;
}

inline int cmd_gradcheck(const Options& o, std::ostream& out) {
  const RunConfig config = effective_config(o);
  bool ok = true;
  for (const auto& check : run_gradient_suite(config.train.seed)) {
    const bool pass = check.result.max_rel_error < kGradTolerance;
    ok = ok && pass;
    out << check.name << '\t' << check.result.max_rel_error << '\t' << (pass ? "ok" : "FAIL") << '\n';
  }
  write_run_manifest(o, "gradcheck", config);
  return ok ? 0 : 2;
}

// ---- entry point ---------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Dual-channel sarcasm detector"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;

  auto* pre = app.add_subcommand("preprocess", "tag, chunk and split a corpus; write the cache");
  add_data_flags(pre, o, true);
  add_config_flags(pre, o);
  pre->add_option("--cache-dir", o.cache_dir, "cache directory (default <out>/cache)");

  auto* tr = app.add_subcommand("train", "train a model and save a checkpoint");
  add_data_flags(tr, o, true);
  add_split_flags(tr, o);
  add_config_flags(tr, o);
  tr->add_option("--cache-dir", o.cache_dir, "cache directory (default <out>/cache)");

  auto* ev = app.add_subcommand("eval", "score a saved model on a corpus");
  add_data_flags(ev, o, true);
  ev->add_option("--model", o.model_dir, "directory written by train")->required()->check(CLI::ExistingDirectory);

  auto* ab = app.add_subcommand("ablate", "train the five ablation variants");
  add_data_flags(ab, o, true);
  add_split_flags(ab, o);
  add_config_flags(ab, o);

  auto* sw = app.add_subcommand("sweep", "retrain across behavior window sizes");
  add_data_flags(sw, o, true);
  add_split_flags(sw, o);
  add_config_flags(sw, o);
  sw->add_option("--sizes", o.sizes, "comma-separated window sizes");

  auto* at = app.add_subcommand("attn-export", "dump per-head attention weights as JSON");
  add_data_flags(at, o, false);
  at->add_option("--model", o.model_dir, "directory written by train")->required()->check(CLI::ExistingDirectory);
  at->add_option("--text", o.text, "single sentence to analyze");
  at->add_option("--mode", o.mode, "conflict|raw")->check(CLI::IsMember({"conflict", "raw"}));

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gc->add_option("--seed", [&o](const CLI::results_t& r) { o.overrides["seed"] = r.front(); return true; }, "random seed");
  gc->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    if (argc <= 1) {
      err << app.help();
    } else {
      err << "error: " << e.what() << "\n";
    }
    return 1;
  }

  try {
    if (*pre) return cmd_preprocess(o, out);
    if (*tr) return cmd_train(o, out);
    if (*ev) return cmd_eval(o, out);
    if (*ab) return cmd_ablate(o, out);
    if (*sw) return cmd_sweep(o, out);
    if (*at) return cmd_attn_export(o, out);
    if (*gc) return cmd_gradcheck(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace bns::cli
