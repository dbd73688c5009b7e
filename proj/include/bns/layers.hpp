#pragma once

// Parameterized layers: linear maps, multi-head raw / conflict attention,
// bidirectional LSTM and the multi-scale convolutional fusion.

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "bns/ops.hpp"
#include "bns/random.hpp"

namespace bns {

struct NamedParam {
  std::string name;
  Var var;
};

using ParamList = std::vector<NamedParam>;

inline Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

/// Inverted dropout: kept entries are scaled by 1/(1-p). A null rng or
/// p == 0 is the identity (inference).
inline Var dropout(const Var& x, double p, Rng* rng) {
  if (rng == nullptr || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  Tensor mask(x.shape());
  const double keep = 1.0 / (1.0 - p);
  for (double& m : mask.data()) m = rng->uniform() < p ? 0.0 : keep;
  return mul_const(x, mask);
}

// ---- linear --------------------------------------------------------------

struct Linear {
  Var weight;  // (in x out)
  Var bias;    // (out)

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight = parameter(uniform_tensor({in, out}, bound, rng));
    bias = parameter(uniform_tensor({out}, bound, rng));
  }

  std::size_t in_dim() const { return weight.shape()[0]; }
  std::size_t out_dim() const { return weight.shape()[1]; }

  /// (m x in) -> (m x out)
  Var apply(const Var& x) const { return add_row(matmul(x, weight), bias); }

  /// (in) -> (out)
  Var apply_vector(const Var& v) const { return row(apply(as_row(v)), 0); }

  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

/// Dense layer followed by a softmax over classes.
inline Var classify(const Linear& head, const Var& features) { return softmax(head.apply_vector(features), 0); }

// ---- attention -----------------------------------------------------------

enum class AttentionMode : unsigned char { Conflict, Raw };

inline std::string_view to_string(AttentionMode m) { return m == AttentionMode::Conflict ? "conflict" : "raw"; }

/// Q = X Wq, K = X Wk, V = X Wv, split into heads along the feature axis.
/// Per head: Out = norm(Q K^T / sqrt(d_k)) V with norm = softmin (conflict
/// attention) or softmax (raw attention). Heads are concatenated with no
/// output projection.
struct MultiHeadAttention {
  Var w_q, w_k, w_v;  // (d x d)
  std::size_t num_heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t d_model, std::size_t heads, Rng& rng) : num_heads(heads) {
    if (heads == 0 || d_model % heads != 0) {
      throw ConfigError("embedding dimension " + std::to_string(d_model) + " is not divisible by " +
                        std::to_string(heads) + " attention heads");
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(2 * d_model));
    w_q = parameter(uniform_tensor({d_model, d_model}, bound, rng));
    w_k = parameter(uniform_tensor({d_model, d_model}, bound, rng));
    w_v = parameter(uniform_tensor({d_model, d_model}, bound, rng));
  }

  std::size_t d_model() const { return w_q.shape()[0]; }
  std::size_t d_k() const { return d_model() / num_heads; }

  struct Projections {
    Var q, k, v;
  };

  Projections project(const Var& x) const {
    detail::require_rank(x, 2, "attention");
    if (x.shape()[0] == 0) throw ShapeError("attention: empty sequence");
    if (x.shape()[1] != d_model()) {
      throw ShapeError("attention: input " + shape_string(x.shape()) + " does not match d_model " +
                       std::to_string(d_model()));
    }
    return {matmul(x, w_q), matmul(x, w_k), matmul(x, w_v)};
  }

  /// Scaled dot-product logits per head, (L x L) each.
  std::vector<Var> logits(const Projections& p) const {
    std::vector<Var> out;
    const double inv = 1.0 / std::sqrt(static_cast<double>(d_k()));
    for (std::size_t h = 0; h < num_heads; ++h) {
      const Var qh = slice(p.q, 1, h * d_k(), (h + 1) * d_k());
      const Var kh = slice(p.k, 1, h * d_k(), (h + 1) * d_k());
      out.push_back(scale(matmul(qh, transpose(kh)), inv));
    }
    return out;
  }

  std::vector<Var> logits(const Var& x) const { return logits(project(x)); }

  /// Row-normalized attention weights per head.
  std::vector<Var> weights(const Var& x, AttentionMode mode) const {
    std::vector<Var> out;
    for (const auto& l : logits(x)) out.push_back(normalize(l, mode));
    return out;
  }

  Var forward(const Var& x, AttentionMode mode, std::vector<Tensor>* weights_out = nullptr) const {
    const auto p = project(x);
    const auto lg = logits(p);
    std::vector<Var> heads;
    for (std::size_t h = 0; h < num_heads; ++h) {
      const Var w = normalize(lg[h], mode);
      if (weights_out) weights_out->push_back(w.value());
      const Var vh = slice(p.v, 1, h * d_k(), (h + 1) * d_k());
      heads.push_back(matmul(w, vh));
    }
    return num_heads == 1 ? heads[0] : concat(heads, 1);
  }

  static Var normalize(const Var& logits, AttentionMode mode) {
    return mode == AttentionMode::Conflict ? softmin(logits, 1) : softmax(logits, 1);
  }

  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".w_q", w_q});
    out.push_back({prefix + ".w_k", w_k});
    out.push_back({prefix + ".w_v", w_v});
  }
};

inline Var raw_attention(const Var& x, const MultiHeadAttention& params) {
  return params.forward(x, AttentionMode::Raw);
}

inline Var conflict_attention(const Var& x, const MultiHeadAttention& params) {
  return params.forward(x, AttentionMode::Conflict);
}

// ---- LSTM ----------------------------------------------------------------

/// One LSTM direction. Gate layout along the 4h axis: input, forget, cell,
/// output.
struct LstmDirection {
  Var w_x;   // (in x 4h)
  Var w_h;   // (h x 4h)
  Var bias;  // (4h)

  LstmDirection() = default;
  LstmDirection(std::size_t in, std::size_t hidden, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    w_x = parameter(uniform_tensor({in, 4 * hidden}, bound, rng));
    w_h = parameter(uniform_tensor({hidden, 4 * hidden}, bound, rng));
    bias = parameter(uniform_tensor({4 * hidden}, bound, rng));
  }

  std::size_t hidden() const { return w_h.shape()[0]; }

  /// Hidden states (L x h), row t belonging to input step t. With `reverse`
  /// the recurrence runs from the last step to the first.
  Var run(const Var& x, bool reverse) const {
    detail::require_rank(x, 2, "lstm");
    const std::size_t steps = x.shape()[0];
    if (steps == 0) throw ShapeError("lstm: empty sequence");
    const std::size_t h = hidden();
    const Var projected = add_row(matmul(x, w_x), bias);  // (L x 4h)
    std::vector<Var> states(steps);
    Var h_prev, c_prev;
    for (std::size_t n = 0; n < steps; ++n) {
      const std::size_t t = reverse ? steps - 1 - n : n;
      Var gates = row(projected, t);
      if (n > 0) gates = add(gates, row(matmul(as_row(h_prev), w_h), 0));
      const Var i = sigmoid(slice(gates, 0, 0, h));
      const Var f = sigmoid(slice(gates, 0, h, 2 * h));
      const Var g = tanh(slice(gates, 0, 2 * h, 3 * h));
      const Var o = sigmoid(slice(gates, 0, 3 * h, 4 * h));
      const Var c = n > 0 ? add(mul(f, c_prev), mul(i, g)) : mul(i, g);
      h_prev = mul(o, tanh(c));
      c_prev = c;
      states[t] = h_prev;
    }
    return stack(states);
  }

  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".w_x", w_x});
    out.push_back({prefix + ".w_h", w_h});
    out.push_back({prefix + ".bias", bias});
  }
};

struct BiLstmOutput {
  Var states;  // (L x 2h), row t = [forward h_t ; backward h_t]
  Var last;    // (2h) = [forward h_{L-1} ; backward h_0]
};

/// [forward h_{L-1} ; backward h_0] from a (L x 2h) state matrix.
inline Var terminal_states(const Var& states, std::size_t hidden) {
  const std::size_t steps = states.shape()[0];
  return concat({slice(row(states, steps - 1), 0, 0, hidden), slice(row(states, 0), 0, hidden, 2 * hidden)}, 0);
}

struct BiLstmLayer {
  LstmDirection forward_dir;
  LstmDirection backward_dir;

  BiLstmLayer() = default;
  BiLstmLayer(std::size_t in, std::size_t hidden, Rng& rng)
      : forward_dir(in, hidden, rng), backward_dir(in, hidden, rng) {}

  BiLstmOutput run(const Var& x) const {
    const Var hf = forward_dir.run(x, false);
    const Var hb = backward_dir.run(x, true);
    const std::size_t steps = x.shape()[0];
    return {concat({hf, hb}, 1), concat({row(hf, steps - 1), row(hb, 0)}, 0)};
  }

  void collect(ParamList& out, const std::string& prefix) const {
    forward_dir.collect(out, prefix + ".fwd");
    backward_dir.collect(out, prefix + ".bwd");
  }
};

/// Stacked Bi-LSTM; layer k+1 reads layer k's per-step outputs.
struct BiLstm {
  std::vector<BiLstmLayer> layers;

  BiLstm() = default;
  BiLstm(std::size_t in, std::size_t hidden, std::size_t num_layers, Rng& rng) {
    for (std::size_t l = 0; l < num_layers; ++l) layers.emplace_back(l == 0 ? in : 2 * hidden, hidden, rng);
  }

  std::size_t hidden() const { return layers.front().forward_dir.hidden(); }

  /// Dropout with rate `p` follows every layer when `rng` is set.
  BiLstmOutput run(const Var& x, double p = 0.0, Rng* rng = nullptr) const {
    BiLstmOutput out{x, Var()};
    for (const auto& layer : layers) {
      out = layer.run(out.states);
      if (rng != nullptr && p > 0.0) {
        out.states = dropout(out.states, p, rng);
        out.last = terminal_states(out.states, hidden());
      }
    }
    return out;
  }

  void collect(ParamList& out, const std::string& prefix) const {
    for (std::size_t l = 0; l < layers.size(); ++l) layers[l].collect(out, prefix + ".layer" + std::to_string(l));
  }
};

inline BiLstmOutput bilstm(const Var& x, const BiLstm& params) { return params.run(x); }

// ---- multi-scale convolution ---------------------------------------------

/// For each kernel width k: 1-D convolution along the feature axis with the
/// input rows as channels, ReLU, global max-pool. The pooled maps of all
/// widths are concatenated.
struct ConvFusion {
  std::vector<std::size_t> widths;
  std::vector<Var> kernels;  // (channels*k x maps) per width
  std::vector<Var> biases;   // (maps) per width
  std::size_t channels = 2;

  ConvFusion() = default;
  ConvFusion(std::size_t in_channels, std::vector<std::size_t> kernel_widths, std::size_t maps, Rng& rng)
      : widths(std::move(kernel_widths)), channels(in_channels) {
    for (std::size_t k : widths) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(channels * k));
      kernels.push_back(parameter(uniform_tensor({channels * k, maps}, bound, rng)));
      biases.push_back(parameter(uniform_tensor({maps}, bound, rng)));
    }
  }

  std::size_t output_dim() const {
    std::size_t total = 0;
    for (const auto& k : kernels) total += k.shape()[1];
    return total;
  }

  Var run(const Var& x) const {
    detail::require_rank(x, 2, "conv_fuse");
    if (x.shape()[0] != channels) {
      throw ShapeError("conv_fuse: expected " + std::to_string(channels) + " input rows, got " +
                       shape_string(x.shape()));
    }
    std::vector<Var> pooled;
    for (std::size_t w = 0; w < widths.size(); ++w) {
      const Var patches = unfold1d(x, widths[w]);
      pooled.push_back(max_rows(relu(add_row(matmul(patches, kernels[w]), biases[w]))));
    }
    return concat(pooled, 0);
  }

  void collect(ParamList& out, const std::string& prefix) const {
    for (std::size_t w = 0; w < widths.size(); ++w) {
      out.push_back({prefix + ".k" + std::to_string(widths[w]) + ".weight", kernels[w]});
      out.push_back({prefix + ".k" + std::to_string(widths[w]) + ".bias", biases[w]});
    }
  }
};

inline Var conv_fuse(const Var& stacked, const ConvFusion& params) { return params.run(stacked); }

}  // namespace bns
