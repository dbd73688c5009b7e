#pragma once

// Finite-difference checks over every differentiable building block and the
// end-to-end joint loss of a toy model.

#include <cstdint>
#include <string>
#include <vector>

#include "bns/gradcheck.hpp"
#include "bns/model.hpp"

namespace bns {

struct GradientCheck {
  std::string name;
  GradCheckResult result;
};

namespace detail {

inline std::vector<Var> leaves_of(const ParamList& params) {
  std::vector<Var> out;
  for (const auto& p : params) out.push_back(p.var);
  return out;
}

/// One example producing exactly two behavior chunks at window size 3.
inline PreprocessedExample toy_example(const Vocabulary& vocab) {
  SentimentLexicon lexicon;
  lexicon.set("love", 0.82);
  lexicon.set("ignored", -0.55);
  CorpusExample ex;
  ex.text = "I love being ignored";
  ex.label = 1;
  return preprocess_example(ex, vocab, PreprocessSettings{3, 150, false}, lexicon, RuleTagger{});
}

}  // namespace detail

inline std::vector<GradientCheck> run_gradient_suite(std::uint64_t seed = 7, double h = 1e-5) {
  std::vector<GradientCheck> out;
  Rng rng(seed);

  {
    const Var x = parameter(uniform_tensor({3, 5}, 2.0, rng));
    const Tensor w = uniform_tensor({3, 5}, 1.0, rng);
    out.push_back({"softmin", check_gradients([&] { return sum(mul_const(softmin(x, 1), w)); }, {x}, h)});
  }

  const std::size_t d = 8, len = 4;
  for (const auto mode : {AttentionMode::Raw, AttentionMode::Conflict}) {
    MultiHeadAttention att(d, 2, rng);
    const Var x = parameter(uniform_tensor({len, d}, 1.0, rng));
    const Tensor w = uniform_tensor({len, d}, 1.0, rng);
    std::vector<Var> leaves = {x};
    for (const auto& v : detail::leaves_of([&] { ParamList p; att.collect(p, "a"); return p; }())) leaves.push_back(v);
    auto f = [&] {
      const Var y = mode == AttentionMode::Raw ? raw_attention(x, att) : conflict_attention(x, att);
      return sum(mul_const(y, w));
    };
    out.push_back({mode == AttentionMode::Raw ? "raw_attention" : "conflict_attention", check_gradients(f, leaves, h)});
  }

  {
    const std::size_t hidden = 3;
    BiLstm net(d, hidden, 2, rng);
    const Var x0 = parameter(uniform_tensor({len, d}, 1.0, rng));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const auto& layer = net.layers[l];
      const Var x = l == 0 ? x0 : parameter(uniform_tensor({len, 2 * hidden}, 1.0, rng));
      const Tensor ws = uniform_tensor({len, 2 * hidden}, 1.0, rng);
      const Tensor wl = uniform_tensor({2 * hidden}, 1.0, rng);
      ParamList params;
      layer.collect(params, "lstm");
      std::vector<Var> leaves = detail::leaves_of(params);
      leaves.push_back(x);
      auto f = [&] {
        const auto o = layer.run(x);
        return add(sum(mul_const(o.states, ws)), sum(mul_const(o.last, wl)));
      };
      out.push_back({"bilstm_layer" + std::to_string(l), check_gradients(f, leaves, h)});
    }
  }

  {
    ConvFusion conv(2, {3, 4, 5}, 4, rng);
    const Var x = parameter(uniform_tensor({2, 12}, 1.0, rng));
    const Tensor w = uniform_tensor({12}, 1.0, rng);
    ParamList params;
    conv.collect(params, "conv");
    std::vector<Var> leaves = detail::leaves_of(params);
    leaves.push_back(x);
    out.push_back({"conv_fuse", check_gradients([&] { return sum(mul_const(conv_fuse(x, conv), w)); }, leaves, h)});
  }

  {
    const Var z = parameter(uniform_tensor({3, 2}, 2.0, rng));
    const std::vector<int> labels = {1, 0, 1};
    out.push_back({"cross_entropy", check_gradients([&] { return cross_entropy(softmax(z, 1), labels); }, {z}, h)});
  }

  {
    ModelConfig cfg;
    cfg.embed_dim = 20;
    cfg.hidden_dim = 8;
    cfg.num_heads = 2;
    cfg.window_size = 3;
    cfg.feature_maps_per_width = 4;
    const Vocabulary vocab({"<pad>", "<unk>", "i", "love", "being", "ignored"});
    const auto ex = detail::toy_example(vocab);
    if (ex.segmentation.chunks.size() != 2) throw Error("gradient suite: toy example must have two chunks");
    // unit-scale embeddings keep upstream gradients well above roundoff
    Tensor table = uniform_tensor({vocab.size(), cfg.embed_dim}, 1.0, rng);
    for (std::size_t j = 0; j < cfg.embed_dim; ++j) table.at(Vocabulary::kPad, j) = 0.0;
    const BnsModel model(cfg, vocab.size(), seed, table);
    auto f = [&] { return model.joint_loss(model.forward(ex), ExampleLabels::from(ex)).total; };
    out.push_back({"joint_loss", check_gradients(f, model.parameter_vars(), h)});
  }
  return out;
}

}  // namespace bns
