#pragma once

// Model and training configuration, with a flat "key = value" form used by
// config files, CLI overrides and run manifests.

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bns/checkpoint.hpp"
#include "bns/error.hpp"
#include "bns/layers.hpp"

namespace bns {

enum class ChannelMask : unsigned char { Both, BehaviorOnly, SentenceOnly };
enum class FusionMode : unsigned char { Stack, Concat };
enum class L2Mode : unsigned char { Decoupled, Loss };

inline std::string_view to_string(ChannelMask m) {
  switch (m) {
    case ChannelMask::Both: return "both";
    case ChannelMask::BehaviorOnly: return "behavior_only";
    case ChannelMask::SentenceOnly: return "sentence_only";
  }
  return "both";
}
inline std::string_view to_string(FusionMode m) { return m == FusionMode::Stack ? "stack" : "concat"; }
inline std::string_view to_string(L2Mode m) { return m == L2Mode::Decoupled ? "decoupled" : "loss"; }

struct ModelConfig {
  std::size_t embed_dim = 300;
  std::size_t hidden_dim = 64;
  std::size_t num_heads = 10;
  std::size_t num_lstm_layers = 2;
  std::size_t window_size = 4;
  std::vector<std::size_t> kernel_widths = {3, 4, 5};
  std::size_t feature_maps_per_width = 32;
  double dropout_p = 0.5;
  double lambda_sar = 1.0;
  double lambda_imp = 0.5;
  double lambda_exp = 0.5;
  AttentionMode attention_mode = AttentionMode::Conflict;
  ChannelMask channel_mask = ChannelMask::Both;
  bool subtask_loss_enabled = true;
  FusionMode fusion = FusionMode::Stack;
  std::size_t max_seq_len = 150;

  bool behavior_enabled() const { return channel_mask != ChannelMask::SentenceOnly; }
  bool sentence_enabled() const { return channel_mask != ChannelMask::BehaviorOnly; }

  /// Width of the convolution's feature axis.
  std::size_t fused_length() const { return fusion == FusionMode::Stack ? 2 * hidden_dim : 4 * hidden_dim; }

  void validate() const {
    if (embed_dim == 0 || hidden_dim == 0) throw ConfigError("embed_dim and hidden_dim must be positive");
    if (num_heads == 0 || embed_dim % num_heads != 0) {
      throw ConfigError("embed_dim " + std::to_string(embed_dim) + " must be divisible by num_heads " +
                        std::to_string(num_heads));
    }
    if (num_lstm_layers == 0) throw ConfigError("num_lstm_layers must be >= 1");
    if (window_size == 0) throw ConfigError("window_size must be >= 1");
    if (kernel_widths.empty()) throw ConfigError("kernel_widths must not be empty");
    for (std::size_t k : kernel_widths) {
      if (k == 0 || k > fused_length()) {
        throw ConfigError("kernel width " + std::to_string(k) + " does not fit the fused feature length " +
                          std::to_string(fused_length()));
      }
    }
    if (feature_maps_per_width == 0) throw ConfigError("feature_maps_per_width must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must lie in [0, 1)");
    if (lambda_sar < 0 || lambda_imp < 0 || lambda_exp < 0) throw ConfigError("loss weights must be >= 0");
    if (max_seq_len == 0) throw ConfigError("max_seq_len must be positive");
  }
};

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  L2Mode l2_mode = L2Mode::Decoupled;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;  // 0 disables early stopping
  std::uint64_t seed = 1;
  std::size_t min_freq = 1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (min_freq == 0) throw ConfigError("min_freq must be >= 1");
  }
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  void validate() const {
    model.validate();
    train.validate();
  }
};

// ---- flat key/value form -------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

struct ConfigField {
  std::string key;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
ConfigField size_field(std::string key, std::string help, T RunConfig::*part, std::size_t T::*member) {
  return {key, std::move(help), [=](const RunConfig& c) { return std::to_string(c.*part.*member); },
          [=](RunConfig& c, const std::string& v) { c.*part.*member = parse_number<std::size_t>(key, v); }};
}

template <typename T>
ConfigField double_field(std::string key, std::string help, T RunConfig::*part, double T::*member) {
  return {key, std::move(help), [=](const RunConfig& c) { return format_double(c.*part.*member); },
          [=](RunConfig& c, const std::string& v) { c.*part.*member = parse_number<double>(key, v); }};
}

template <typename E>
ConfigField enum_field(std::string key, std::string help, E ModelConfig::*member, std::vector<E> values) {
  return {key, std::move(help), [=](const RunConfig& c) { return std::string(to_string(c.model.*member)); },
          [=](RunConfig& c, const std::string& v) {
            for (E e : values) {
              if (to_string(e) == v) {
                c.model.*member = e;
                return;
              }
            }
            std::string allowed;
            for (E e : values) allowed += (allowed.empty() ? "" : "|") + std::string(to_string(e));
            throw ConfigError("invalid value '" + v + "' for " + key + " (expected " + allowed + ")");
          }};
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace detail

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(detail::parse_number<std::size_t>(key, trim(item)));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

inline const std::vector<detail::ConfigField>& config_fields() {
  using detail::double_field;
  using detail::enum_field;
  using detail::size_field;
  using M = ModelConfig;
  using T = TrainConfig;
  static const std::vector<detail::ConfigField> fields = [] {
    std::vector<detail::ConfigField> f;
    f.push_back(size_field("embed_dim", "word embedding width", &RunConfig::model, &M::embed_dim));
    f.push_back(size_field("hidden_dim", "Bi-LSTM hidden width per direction", &RunConfig::model, &M::hidden_dim));
    f.push_back(size_field("num_heads", "attention heads", &RunConfig::model, &M::num_heads));
    f.push_back(size_field("num_lstm_layers", "stacked Bi-LSTM layers", &RunConfig::model, &M::num_lstm_layers));
    f.push_back(size_field("window_size", "behavior chunk window", &RunConfig::model, &M::window_size));
    f.push_back({"kernel_widths", "convolution kernel widths (comma list)",
                 [](const RunConfig& c) { return detail::join_sizes(c.model.kernel_widths); },
                 [](RunConfig& c, const std::string& v) { c.model.kernel_widths = parse_size_list("kernel_widths", v); }});
    f.push_back(size_field("feature_maps_per_width", "feature maps per kernel width", &RunConfig::model,
                           &M::feature_maps_per_width));
    f.push_back(double_field("dropout_p", "dropout probability", &RunConfig::model, &M::dropout_p));
    f.push_back(double_field("lambda_sar", "sarcasm loss weight", &RunConfig::model, &M::lambda_sar));
    f.push_back(double_field("lambda_imp", "implicit-sentiment loss weight", &RunConfig::model, &M::lambda_imp));
    f.push_back(double_field("lambda_exp", "explicit-sentiment loss weight", &RunConfig::model, &M::lambda_exp));
    f.push_back(enum_field("attention_mode", "conflict|raw", &M::attention_mode,
                           std::vector{AttentionMode::Conflict, AttentionMode::Raw}));
    f.push_back(enum_field("channel_mask", "both|behavior_only|sentence_only", &M::channel_mask,
                           std::vector{ChannelMask::Both, ChannelMask::BehaviorOnly, ChannelMask::SentenceOnly}));
    f.push_back({"subtask_loss_enabled", "train the sentiment subtasks",
                 [](const RunConfig& c) { return std::string(c.model.subtask_loss_enabled ? "true" : "false"); },
                 [](RunConfig& c, const std::string& v) {
                   c.model.subtask_loss_enabled = detail::parse_bool("subtask_loss_enabled", v);
                 }});
    f.push_back(enum_field("fusion", "stack|concat", &M::fusion, std::vector{FusionMode::Stack, FusionMode::Concat}));
    f.push_back(size_field("max_seq_len", "token truncation length", &RunConfig::model, &M::max_seq_len));
    f.push_back(double_field("learning_rate", "AdamW learning rate", &RunConfig::train, &T::learning_rate));
    f.push_back(double_field("weight_decay", "AdamW weight decay / L2 coefficient", &RunConfig::train,
                             &T::weight_decay));
    f.push_back({"l2_mode", "decoupled|loss",
                 [](const RunConfig& c) { return std::string(to_string(c.train.l2_mode)); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "decoupled") c.train.l2_mode = L2Mode::Decoupled;
                   else if (v == "loss") c.train.l2_mode = L2Mode::Loss;
                   else throw ConfigError("invalid value '" + v + "' for l2_mode (expected decoupled|loss)");
                 }});
    f.push_back(size_field("batch_size", "training batch size", &RunConfig::train, &T::batch_size));
    f.push_back(size_field("max_epochs", "maximum training epochs", &RunConfig::train, &T::max_epochs));
    f.push_back(size_field("patience", "early-stop patience on valid Macro-F1 (0 = off)", &RunConfig::train,
                           &T::patience));
    f.push_back({"seed", "random seed", [](const RunConfig& c) { return std::to_string(c.train.seed); },
                 [](RunConfig& c, const std::string& v) { c.train.seed = detail::parse_number<std::uint64_t>("seed", v); }});
    f.push_back(size_field("min_freq", "vocabulary frequency threshold", &RunConfig::train, &T::min_freq));
    return f;
  }();
  return fields;
}

inline void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : config_fields()) {
    if (f.key == key) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

inline Manifest to_manifest(const RunConfig& config) {
  Manifest m;
  for (const auto& f : config_fields()) m[f.key] = f.get(config);
  return m;
}

inline Manifest to_manifest(const ModelConfig& model) {
  RunConfig c;
  c.model = model;
  Manifest m;
  for (const auto& f : config_fields()) {
    if (f.key == "learning_rate") break;  // model fields come first
    m[f.key] = f.get(c);
  }
  return m;
}

/// Precedence: flag overrides > file values > defaults. Unknown keys and
/// malformed values throw ConfigError naming the key.
inline RunConfig config_merge(const Manifest& file_config, const Manifest& flag_overrides,
                              RunConfig defaults = {}) {
  RunConfig c = defaults;
  for (const auto& [k, v] : file_config) set_config_value(c, k, v);
  for (const auto& [k, v] : flag_overrides) set_config_value(c, k, v);
  c.validate();
  return c;
}

}  // namespace bns
