#pragma once

// The dual-channel detector.
//
//   behavior channel: chunk embeddings -> conflict (or raw) attention
//                     -> Bi-LSTM -> terminal states
//   sentence channel: explicit / implicit token embeddings -> two Bi-LSTMs
//                     -> sentiment heads; [e; m] projected to 2h
//   fusion:           2 x 2h stack -> multi-scale conv -> dense -> softmax
//
// Loss: lambda_sar J_sar + lambda_imp J_imp + lambda_exp J_exp.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bns/checkpoint.hpp"
#include "bns/config.hpp"
#include "bns/data_io.hpp"
#include "bns/layers.hpp"

namespace bns {

struct ForwardOptions {
  Rng* dropout_rng = nullptr;  // set at train time only
  bool record_attention = false;
};

struct ForwardOutput {
  Var sarcasm_probs;
  std::optional<Var> explicit_probs;  // absent when the sentence channel is off
  std::optional<Var> implicit_probs;
  std::optional<Var> behavior_repr;
  std::optional<Var> sentence_repr;
  std::vector<Tensor> attention_weights;  // one (L x L) per head, when recorded
  std::size_t behavior_steps = 0;
  bool fallback_chunk = false;
};

struct LossBreakdown {
  double j_sar = 0.0;
  double j_imp = 0.0;
  double j_exp = 0.0;
  double total = 0.0;
};

struct ExampleLabels {
  int sarcasm = 0;
  int explicit_sentiment = 0;
  int implicit_sentiment = 0;

  static ExampleLabels from(const PreprocessedExample& e) {
    return {e.sarcasm_label, label_of(e.labels.explicit_label), label_of(e.labels.implicit_label)};
  }
};

struct JointLoss {
  LossBreakdown values;
  Var total;  // differentiable
};

class BnsModel {
 public:
  BnsModel(ModelConfig config, std::size_t vocab_size, std::uint64_t seed,
           std::optional<Tensor> embeddings = std::nullopt)
      : config_(std::move(config)) {
    config_.validate();
    Rng rng(seed);
    const std::size_t d = config_.embed_dim, h = config_.hidden_dim;
    if (embeddings) {
      if (embeddings->rank() != 2 || embeddings->rows() != vocab_size || embeddings->cols() != d) {
        throw ShapeError("embedding table " + shape_string(embeddings->shape()) + " does not match vocabulary " +
                         std::to_string(vocab_size) + " x " + std::to_string(d));
      }
      embedding_ = parameter(*embeddings);
    } else {
      embedding_ = parameter(random_embeddings(vocab_size, d, rng));
    }
    attention_ = MultiHeadAttention(d, config_.num_heads, rng);
    behavior_lstm_ = BiLstm(d, h, config_.num_lstm_layers, rng);
    explicit_lstm_ = BiLstm(d, h, config_.num_lstm_layers, rng);
    implicit_lstm_ = BiLstm(d, h, config_.num_lstm_layers, rng);
    explicit_head_ = Linear(2 * h, 2, rng);
    implicit_head_ = Linear(2 * h, 2, rng);
    sentence_proj_ = Linear(4 * h, 2 * h, rng);
    const std::size_t channels = config_.fusion == FusionMode::Stack ? 2 : 1;
    conv_ = ConvFusion(channels, config_.kernel_widths, config_.feature_maps_per_width, rng);
    classifier_ = Linear(conv_.output_dim(), 2, rng);
  }

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t vocab_size() const { return embedding_.shape()[0]; }

  // ---- channels ----------------------------------------------------------

  /// Behavior embeddings (chunks x d) before dropout. An example with no
  /// chunks contributes one padding step.
  Var behavior_inputs(const PreprocessedExample& ex) const {
    std::vector<std::vector<std::size_t>> groups;
    for (const auto& c : ex.segmentation.chunks) groups.push_back(c.token_ids);
    if (groups.empty()) groups.push_back({Vocabulary::kPad});
    return gather_sum(embedding_, groups, Vocabulary::kPad);
  }

  Var behavior_channel(const PreprocessedExample& ex, const ForwardOptions& opt = {},
                       std::vector<Tensor>* weights_out = nullptr) const {
    const Var x = dropout(behavior_inputs(ex), config_.dropout_p, opt.dropout_rng);
    const Var attended = attention_.forward(x, config_.attention_mode, weights_out);
    return behavior_lstm_.run(attended, config_.dropout_p, opt.dropout_rng).last;
  }

  struct SentenceChannelOutput {
    Var repr;
    Var explicit_probs;
    Var implicit_probs;
  };

  /// Token embeddings of the listed positions; an empty part is one padding
  /// token.
  Var part_inputs(const PreprocessedExample& ex, const std::vector<std::size_t>& positions) const {
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t p : positions) groups.push_back({ex.token_ids.at(p)});
    if (groups.empty()) groups.push_back({Vocabulary::kPad});
    return gather_sum(embedding_, groups, Vocabulary::kPad);
  }

  SentenceChannelOutput sentence_channel(const PreprocessedExample& ex, const ForwardOptions& opt = {}) const {
    const Var xe = dropout(part_inputs(ex, ex.split.explicit_ids), config_.dropout_p, opt.dropout_rng);
    const Var xm = dropout(part_inputs(ex, ex.split.implicit_ids), config_.dropout_p, opt.dropout_rng);
    const Var e = explicit_lstm_.run(xe, config_.dropout_p, opt.dropout_rng).last;
    const Var m = implicit_lstm_.run(xm, config_.dropout_p, opt.dropout_rng).last;
    return {sentence_proj_.apply_vector(concat({e, m}, 0)), classify(explicit_head_, e), classify(implicit_head_, m)};
  }

  ForwardOutput forward(const PreprocessedExample& ex, const ForwardOptions& opt = {}) const {
    ForwardOutput out;
    out.fallback_chunk = ex.segmentation.fallback;
    out.behavior_steps = std::max<std::size_t>(1, ex.segmentation.chunks.size());
    if (config_.behavior_enabled()) {
      out.behavior_repr = behavior_channel(ex, opt, opt.record_attention ? &out.attention_weights : nullptr);
    }
    if (config_.sentence_enabled()) {
      auto s = sentence_channel(ex, opt);
      out.sentence_repr = s.repr;
      out.explicit_probs = s.explicit_probs;
      out.implicit_probs = s.implicit_probs;
    }
    // a deleted channel is replaced by a copy of the live one
    const Var b = out.behavior_repr ? *out.behavior_repr : *out.sentence_repr;
    const Var s = out.sentence_repr ? *out.sentence_repr : *out.behavior_repr;
    const Var fused = config_.fusion == FusionMode::Stack ? stack({b, s}) : as_row(concat({b, s}, 0));
    out.sarcasm_probs = classify(classifier_, conv_.run(fused));
    return out;
  }

  /// Per-example joint loss. Subtask terms are reported whenever the
  /// sentence channel runs, but join the differentiable total only when
  /// subtask_loss_enabled.
  JointLoss joint_loss(const ForwardOutput& out, const ExampleLabels& labels) const {
    JointLoss loss;
    const Var j_sar = cross_entropy(out.sarcasm_probs, labels.sarcasm);
    loss.values.j_sar = j_sar.item();
    loss.total = scale(j_sar, config_.lambda_sar);
    if (out.explicit_probs && out.implicit_probs) {
      const Var j_imp = cross_entropy(*out.implicit_probs, labels.implicit_sentiment);
      const Var j_exp = cross_entropy(*out.explicit_probs, labels.explicit_sentiment);
      loss.values.j_imp = j_imp.item();
      loss.values.j_exp = j_exp.item();
      if (config_.subtask_loss_enabled) {
        loss.total = add(add(loss.total, scale(j_imp, config_.lambda_imp)), scale(j_exp, config_.lambda_exp));
      }
    }
    loss.values.total = loss.total.item();
    return loss;
  }

  // ---- parameters --------------------------------------------------------

  ParamList parameters() const {
    ParamList out;
    out.push_back({"embedding", embedding_});
    attention_.collect(out, "attention");
    behavior_lstm_.collect(out, "behavior_lstm");
    explicit_lstm_.collect(out, "explicit_lstm");
    implicit_lstm_.collect(out, "implicit_lstm");
    explicit_head_.collect(out, "explicit_head");
    implicit_head_.collect(out, "implicit_head");
    sentence_proj_.collect(out, "sentence_proj");
    conv_.collect(out, "conv");
    classifier_.collect(out, "classifier");
    return out;
  }

  /// Parameters used only by the two sentiment heads.
  ParamList sentiment_head_parameters() const {
    ParamList out;
    explicit_head_.collect(out, "explicit_head");
    implicit_head_.collect(out, "implicit_head");
    return out;
  }

  std::vector<Var> parameter_vars() const {
    std::vector<Var> vars;
    for (auto& p : parameters()) vars.push_back(p.var);
    return vars;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.var.zero_grad();
  }

  std::vector<NamedTensor> state() const {
    std::vector<NamedTensor> out;
    for (const auto& p : parameters()) out.push_back({p.name, p.var.value()});
    return out;
  }

  /// Copies values in by name; every parameter must be present with the
  /// same shape.
  void load_state(const std::vector<NamedTensor>& arrays) {
    for (auto& p : parameters()) {
      auto it = std::find_if(arrays.begin(), arrays.end(), [&](const NamedTensor& a) { return a.name == p.name; });
      if (it == arrays.end()) throw ConfigError("checkpoint lacks parameter '" + p.name + "'");
      if (it->value.shape() != p.var.shape()) {
        throw ConfigError("checkpoint parameter '" + p.name + "' has shape " + shape_string(it->value.shape()) +
                          ", model expects " + shape_string(p.var.shape()));
      }
      Var v = p.var;
      v.mutable_value() = it->value;
    }
  }

  const MultiHeadAttention& attention() const noexcept { return attention_; }
  const Var& embedding() const noexcept { return embedding_; }

 private:
  ModelConfig config_;
  Var embedding_;
  MultiHeadAttention attention_;
  BiLstm behavior_lstm_;
  BiLstm explicit_lstm_;
  BiLstm implicit_lstm_;
  Linear explicit_head_;
  Linear implicit_head_;
  Linear sentence_proj_;
  ConvFusion conv_;
  Linear classifier_;
};

/// Mean joint loss over a set of examples.
struct BatchLoss {
  LossBreakdown mean;
  Var total;
};

inline BatchLoss batch_loss(const BnsModel& model, const std::vector<PreprocessedExample>& examples,
                            const std::vector<std::size_t>& indices, const ForwardOptions& opt = {}) {
  if (indices.empty()) throw Error("batch_loss: empty batch");
  BatchLoss out;
  std::vector<Var> totals;
  for (std::size_t i : indices) {
    const auto& ex = examples[i];
    const auto loss = model.joint_loss(model.forward(ex, opt), ExampleLabels::from(ex));
    out.mean.j_sar += loss.values.j_sar;
    out.mean.j_imp += loss.values.j_imp;
    out.mean.j_exp += loss.values.j_exp;
    out.mean.total += loss.values.total;
    totals.push_back(loss.total);
  }
  const double n = static_cast<double>(indices.size());
  out.mean.j_sar /= n;
  out.mean.j_imp /= n;
  out.mean.j_exp /= n;
  out.mean.total /= n;
  out.total = mean(stack(totals));
  return out;
}

}  // namespace bns
