#pragma once

// Training loop, evaluation, ablation matrix, window sweep and attention
// export.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bns/adamw.hpp"
#include "bns/metrics.hpp"
#include "bns/model.hpp"
#include "json.hpp"

namespace bns {

// ---- evaluation ----------------------------------------------------------

inline int predict(const BnsModel& model, const PreprocessedExample& ex) {
  const auto out = model.forward(ex);
  return out.sarcasm_probs.value()[1] > out.sarcasm_probs.value()[0] ? 1 : 0;
}

/// Dropout-free predictions over `examples`, scored in one confusion pass.
inline MetricsReport evaluate(const BnsModel& model, const std::vector<PreprocessedExample>& examples) {
  if (examples.empty()) throw Error("evaluate: empty split");
  std::vector<int> predictions, labels;
  for (const auto& ex : examples) {
    predictions.push_back(predict(model, ex));
    labels.push_back(ex.sarcasm_label);
  }
  return compute_metrics(predictions, labels);
}

/// Dropout-free mean loss over `examples`.
inline LossBreakdown evaluate_loss(const BnsModel& model, const std::vector<PreprocessedExample>& examples) {
  std::vector<std::size_t> all(examples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return batch_loss(model, examples, all).mean;
}

// ---- training ------------------------------------------------------------

struct RunRecord {
  RunConfig config;
  std::vector<LossBreakdown> train_losses;    // one per epoch
  std::vector<MetricsReport> valid_metrics;   // one per epoch when a valid split exists
  std::optional<MetricsReport> test_metrics;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based; 0 when no valid split
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct TrainHooks {
  /// Called after backward() and before the optimizer step.
  std::function<void(std::size_t epoch, std::size_t step, const BnsModel&)> after_backward;
  std::ostream* log = nullptr;
  std::optional<std::filesystem::path> dump_dir;  // receives diverged.ckpt on failure
};

inline Var l2_penalty(const BnsModel& model, double coefficient) {
  std::vector<Var> terms;
  for (const auto& p : model.parameters()) terms.push_back(sum(mul(p.var, p.var)));
  return scale(sum(stack(terms)), 0.5 * coefficient);
}

/// Mini-batch AdamW on the joint loss. Batches are reshuffled per epoch from
/// the seed. With a validation split, the epoch with the best Macro-F1 is
/// restored at the end and training stops after `patience` epochs without
/// improvement.
inline RunRecord train(BnsModel& model, const std::vector<PreprocessedExample>& train_set,
                       const std::vector<PreprocessedExample>& valid_set, const TrainConfig& config,
                       const TrainHooks& hooks = {}) {
  config.validate();
  if (train_set.empty()) throw Error("train: empty training split");
  RunRecord record;
  record.config.model = model.config();
  record.config.train = config;

  AdamWOptions opt;
  opt.learning_rate = config.learning_rate;
  opt.weight_decay = config.l2_mode == L2Mode::Decoupled ? config.weight_decay : 0.0;
  AdamW optimizer(model.parameter_vars(), opt);
  Rng dropout_rng(config.seed ^ 0x9E3779B97F4A7C15ull);
  ForwardOptions fwd;
  fwd.dropout_rng = &dropout_rng;

  double best_f1 = -1.0;
  std::vector<NamedTensor> best_state;
  std::size_t since_best = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    LossBreakdown epoch_loss;
    const auto batches = make_batches(train_set, config.batch_size, config.seed + epoch);
    for (const auto& batch : batches) {
      ++step;
      try {
        optimizer.zero_grad();
        auto loss = batch_loss(model, train_set, batch.indices, fwd);
        Var objective = loss.total;
        if (config.l2_mode == L2Mode::Loss && config.weight_decay > 0.0) {
          objective = add(objective, l2_penalty(model, config.weight_decay));
        }
        backward(objective);
        if (hooks.after_backward) hooks.after_backward(epoch, step, model);
        optimizer.step();
        const double w = static_cast<double>(batch.size()) / static_cast<double>(train_set.size());
        epoch_loss.j_sar += w * loss.mean.j_sar;
        epoch_loss.j_imp += w * loss.mean.j_imp;
        epoch_loss.j_exp += w * loss.mean.j_exp;
        epoch_loss.total += w * loss.mean.total;
      } catch (const NumericError& e) {
        std::string where = "training diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(step);
        if (hooks.dump_dir) {
          std::filesystem::create_directories(*hooks.dump_dir);
          save_checkpoint(*hooks.dump_dir / "diverged.ckpt", model.state());
          where += " (parameters dumped to " + (*hooks.dump_dir / "diverged.ckpt").string() + ")";
        }
        throw TrainingDiverged(where + ": " + e.what());
      }
    }
    record.train_losses.push_back(epoch_loss);
    record.epochs_run = epoch;

    std::ostringstream line;
    line << "epoch " << epoch << " loss " << epoch_loss.total << " j_sar " << epoch_loss.j_sar << " j_imp "
         << epoch_loss.j_imp << " j_exp " << epoch_loss.j_exp;
    if (!valid_set.empty()) {
      const auto m = evaluate(model, valid_set);
      record.valid_metrics.push_back(m);
      line << " valid_f1 " << m.macro_f1 << " valid_acc " << m.accuracy;
      if (m.macro_f1 > best_f1) {
        best_f1 = m.macro_f1;
        best_state = model.state();
        record.best_epoch = epoch;
        since_best = 0;
      } else if (config.patience > 0 && ++since_best >= config.patience) {
        if (hooks.log) *hooks.log << line.str() << "\n" << "early stop: no improvement for " << config.patience << " epochs\n";
        break;
      }
    }
    if (hooks.log) *hooks.log << line.str() << "\n";
  }
  if (!best_state.empty()) model.load_state(best_state);
  return record;
}

// ---- reports -------------------------------------------------------------

inline nlohmann::json to_json(const LossBreakdown& l) {
  return {{"j_sar", l.j_sar}, {"j_imp", l.j_imp}, {"j_exp", l.j_exp}, {"total", l.total}};
}

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"precision", m.precision},
          {"recall", m.recall},
          {"macro_f1", m.macro_f1},
          {"accuracy", m.accuracy},
          {"confusion", {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"fn", m.counts.fn}, {"tn", m.counts.tn}}}};
}

inline nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j;
  j["config"] = to_manifest(r.config);
  j["epochs_run"] = r.epochs_run;
  j["best_epoch"] = r.best_epoch;
  j["train_losses"] = nlohmann::json::array();
  for (const auto& l : r.train_losses) j["train_losses"].push_back(to_json(l));
  j["valid_metrics"] = nlohmann::json::array();
  for (const auto& m : r.valid_metrics) j["valid_metrics"].push_back(to_json(m));
  if (r.test_metrics) j["test_metrics"] = to_json(*r.test_metrics);
  return j;
}

/// Tab-separated per-epoch loss table.
inline std::string loss_curve_text(const RunRecord& r) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch\tj_sar\tj_imp\tj_exp\ttotal\n";
  for (std::size_t i = 0; i < r.train_losses.size(); ++i) {
    const auto& l = r.train_losses[i];
    os << i + 1 << '\t' << l.j_sar << '\t' << l.j_imp << '\t' << l.j_exp << '\t' << l.total << '\n';
  }
  return os.str();
}

inline std::string metrics_row(const std::string& name, const MetricsReport& m) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << name << '\t' << 100 * m.precision << '\t' << 100 * m.recall << '\t' << 100 * m.macro_f1 << '\t'
     << 100 * m.accuracy;
  return os.str();
}

// ---- experiments ---------------------------------------------------------

struct Splits {
  std::vector<PreprocessedExample> train;
  std::vector<PreprocessedExample> valid;
  std::vector<PreprocessedExample> test;

  /// Test if present, else valid, else train.
  const std::vector<PreprocessedExample>& report_split() const {
    if (!test.empty()) return test;
    if (!valid.empty()) return valid;
    return train;
  }
};

struct AblationVariant {
  std::string name;
  RunConfig config;
};

/// The full model plus its four single-axis ablations.
inline std::vector<AblationVariant> ablation_variants(const RunConfig& base) {
  std::vector<AblationVariant> v;
  v.push_back({"full", base});
  v.push_back({"del-S", base});
  v.back().config.model.channel_mask = ChannelMask::BehaviorOnly;
  v.push_back({"del-B", base});
  v.back().config.model.channel_mask = ChannelMask::SentenceOnly;
  v.push_back({"raw-ATT", base});
  v.back().config.model.attention_mode = AttentionMode::Raw;
  v.push_back({"no-subloss", base});
  v.back().config.model.subtask_loss_enabled = false;
  return v;
}

struct ExperimentResult {
  std::string name;
  RunRecord record;
  MetricsReport metrics;  // on Splits::report_split()
};

inline ExperimentResult run_experiment(const std::string& name, const RunConfig& config, const Splits& splits,
                                       std::size_t vocab_size, const std::optional<Tensor>& embeddings,
                                       const TrainHooks& hooks) {
  BnsModel model(config.model, vocab_size, config.train.seed, embeddings);
  ExperimentResult r{name, train(model, splits.train, splits.valid, config.train, hooks), {}};
  r.metrics = evaluate(model, splits.report_split());
  if (!splits.test.empty()) r.record.test_metrics = r.metrics;
  return r;
}

using VariantHook = std::function<void(const std::string& variant, std::size_t epoch, std::size_t step, const BnsModel&)>;

/// Trains every ablation variant with the same seed and data.
inline std::vector<ExperimentResult> ablate(const Splits& splits, std::size_t vocab_size, const RunConfig& base,
                                            const std::optional<Tensor>& embeddings = std::nullopt,
                                            const VariantHook& hook = {}, std::ostream* log = nullptr) {
  std::vector<ExperimentResult> results;
  for (const auto& variant : ablation_variants(base)) {
    if (log) *log << "== variant " << variant.name << "\n";
    TrainHooks hooks;
    hooks.log = log;
    if (hook) {
      hooks.after_backward = [&](std::size_t e, std::size_t s, const BnsModel& m) { hook(variant.name, e, s, m); };
    }
    results.push_back(run_experiment(variant.name, variant.config, splits, vocab_size, embeddings, hooks));
  }
  return results;
}

inline std::string experiment_table(const std::vector<ExperimentResult>& results, const std::string& first_column) {
  std::string out = first_column + "\tPre.\tRec.\tF1\tAcc.\n";
  for (const auto& r : results) out += metrics_row(r.name, r.metrics) + "\n";
  return out;
}

struct RawSplits {
  Corpus train;
  std::optional<Corpus> valid;
  std::optional<Corpus> test;
};

inline Splits preprocess_splits(const RawSplits& raw, const Vocabulary& vocab, const PreprocessSettings& settings,
                                const SentimentLexicon& lexicon, const PosTagger& tagger,
                                const std::optional<std::filesystem::path>& cache_dir = std::nullopt) {
  Splits s;
  s.train = preprocess_corpus(raw.train, vocab, settings, lexicon, tagger, cache_dir).examples;
  if (raw.valid) s.valid = preprocess_corpus(*raw.valid, vocab, settings, lexicon, tagger, cache_dir).examples;
  if (raw.test) s.test = preprocess_corpus(*raw.test, vocab, settings, lexicon, tagger, cache_dir).examples;
  return s;
}

inline const std::vector<std::size_t>& default_sweep_sizes() {
  static const std::vector<std::size_t> sizes = {2, 3, 4, 5};
  return sizes;
}

/// Retrains once per window size (re-chunking the corpus each time) with an
/// otherwise identical configuration.
inline std::vector<ExperimentResult> window_sweep(const RawSplits& raw, const Vocabulary& vocab,
                                                  const SentimentLexicon& lexicon, const PosTagger& tagger,
                                                  const RunConfig& base, const std::vector<std::size_t>& sizes,
                                                  const std::optional<Tensor>& embeddings = std::nullopt,
                                                  std::ostream* log = nullptr) {
  std::vector<ExperimentResult> results;
  for (std::size_t w : sizes) {
    RunConfig config = base;
    config.model.window_size = w;
    config.validate();
    if (log) *log << "== window_size " << w << "\n";
    PreprocessSettings settings{w, config.model.max_seq_len, false};
    const Splits splits = preprocess_splits(raw, vocab, settings, lexicon, tagger);
    TrainHooks hooks;
    hooks.log = log;
    results.push_back(run_experiment("w=" + std::to_string(w), config, splits, vocab.size(), embeddings, hooks));
  }
  return results;
}

// ---- attention export ----------------------------------------------------

struct ChunkAttention {
  std::string text;
  std::size_t start = 0, end = 0;
  double mass = 0.0;  // column sum of the head-averaged weight matrix
};

struct AttentionRecord {
  std::string sentence;
  AttentionMode mode = AttentionMode::Conflict;
  std::vector<Tensor> heads;  // (L x L) each, rows sum to 1
  std::vector<ChunkAttention> chunks;
};

inline AttentionRecord export_attention(const BnsModel& model, const PreprocessedExample& ex, AttentionMode mode) {
  AttentionRecord rec;
  rec.mode = mode;
  for (std::size_t i = 0; i < ex.tokens.size(); ++i) rec.sentence += (i ? " " : "") + ex.tokens[i].surface;
  for (const auto& w : model.attention().weights(model.behavior_inputs(ex), mode)) rec.heads.push_back(w.value());
  const std::size_t steps = rec.heads.front().rows();
  for (std::size_t j = 0; j < steps; ++j) {
    ChunkAttention c;
    if (j < ex.segmentation.chunks.size()) {
      const auto& chunk = ex.segmentation.chunks[j];
      c.start = chunk.start;
      c.end = chunk.end;
      for (std::size_t t = chunk.start; t < chunk.end; ++t) c.text += (t > chunk.start ? " " : "") + ex.tokens[t].surface;
    } else {
      c.text = "<pad>";
    }
    for (const auto& h : rec.heads)
      for (std::size_t i = 0; i < steps; ++i) c.mass += h.at(i, j);
    c.mass /= static_cast<double>(rec.heads.size());
    rec.chunks.push_back(std::move(c));
  }
  return rec;
}

inline nlohmann::json to_json(const std::vector<AttentionRecord>& records) {
  nlohmann::json j;
  j["sentences"] = nlohmann::json::array();
  j["records"] = nlohmann::json::array();
  for (std::size_t s = 0; s < records.size(); ++s) {
    const auto& r = records[s];
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : r.chunks) chunks.push_back({{"text", c.text}, {"start", c.start}, {"end", c.end}, {"mass", c.mass}});
    j["sentences"].push_back({{"index", s}, {"text", r.sentence}, {"mode", to_string(r.mode)}, {"chunks", chunks}});
    for (std::size_t h = 0; h < r.heads.size(); ++h) {
      nlohmann::json matrix = nlohmann::json::array();
      for (std::size_t i = 0; i < r.heads[h].rows(); ++i) {
        const auto rowv = r.heads[h].row(i);
        matrix.push_back(std::vector<double>(rowv.begin(), rowv.end()));
      }
      j["records"].push_back({{"sentence", s}, {"head", h}, {"mode", to_string(r.mode)}, {"weights", matrix}});
    }
  }
  return j;
}

}  // namespace bns
