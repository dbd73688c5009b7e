#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "bns/adamw.hpp"
#include "bns/checkpoint.hpp"
#include "bns/config.hpp"
#include "bns/ops.hpp"

using namespace bns;

namespace {

void set_grad(Var& v, std::vector<double> g) {
  v.zero_grad();
  backward(sum(mul_const(v, Tensor(v.shape(), std::move(g)))));
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("bns_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(AdamW, ZeroGradientZeroDecayLeavesParams) {
  Var p = parameter(Tensor::vector({1.0, -2.0}));
  AdamW opt({p}, {0.1, 0.0});
  set_grad(p, {0.0, 0.0});
  opt.step();
  EXPECT_EQ(p.value().values(), (std::vector<double>{1.0, -2.0}));
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  Var p = parameter(Tensor::vector({0.0}));
  AdamW opt({p}, {0.1, 0.0});
  set_grad(p, {1.0});
  opt.step();
  // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
  EXPECT_NEAR(p.value()[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value()[0], -0.1, 1e-8);
}

TEST(AdamW, PureDecayTerm) {
  Var p = parameter(Tensor::vector({1.0}));
  AdamW opt({p}, {0.1, 0.01});
  set_grad(p, {0.0});
  opt.step();
  EXPECT_DOUBLE_EQ(p.value()[0], 0.999);
}

TEST(AdamW, MatchesReferenceOverSeveralSteps) {
  const AdamWOptions o{0.05, 0.02, 0.8, 0.95, 1e-6};
  Var p = parameter(Tensor::vector({0.7}));
  AdamW opt({p}, o);
  double theta = 0.7, m = 0, v = 0;
  const std::vector<double> grads = {0.3, -1.2, 0.5, 2.0, -0.1};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    set_grad(p, {g});
    opt.step();
    m = o.beta1 * m + (1 - o.beta1) * g;
    v = o.beta2 * v + (1 - o.beta2) * g * g;
    const double mh = m / (1 - std::pow(o.beta1, double(t))), vh = v / (1 - std::pow(o.beta2, double(t)));
    theta -= o.learning_rate * (mh / (std::sqrt(vh) + o.epsilon) + o.weight_decay * theta);
    EXPECT_NEAR(p.value()[0], theta, 1e-14);
  }
  EXPECT_EQ(opt.step_count(), grads.size());
}

TEST(Checkpoint, BitExactRoundTrip) {
  const std::vector<NamedTensor> arrays = {
      {"a", Tensor::matrix({{1.0 / 3.0, -0.0}, {std::numeric_limits<double>::denorm_min(), 1e308}})},
      {"b.bias", Tensor::vector({std::nextafter(1.0, 2.0)})},
      {"scalar", Tensor::scalar(-7.25)}};
  const auto dir = temp_dir("ckpt");
  save_checkpoint(dir / "m.ckpt", arrays);
  const auto back = load_checkpoint(dir / "m.ckpt");
  ASSERT_EQ(back.size(), arrays.size());
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    EXPECT_EQ(back[i].name, arrays[i].name);
    EXPECT_EQ(back[i].value.shape(), arrays[i].value.shape());
    for (std::size_t j = 0; j < arrays[i].value.size(); ++j) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(back[i].value[j]), std::bit_cast<std::uint64_t>(arrays[i].value[j]));
    }
  }
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(arrays));
  EXPECT_FALSE(std::filesystem::exists(dir / "m.ckpt.tmp"));
}

TEST(Checkpoint, LittleEndianLayout) {
  const std::string bytes = encode_checkpoint({{"x", Tensor::vector({1.0})}});
  EXPECT_EQ(bytes.substr(0, 8), "BNSCKPT1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1u);  // count, low byte first
  EXPECT_EQ(bytes[9], 0);
  // 1.0 = 0x3FF0000000000000: the high byte 0x3F comes last
  EXPECT_EQ(static_cast<unsigned char>(bytes.back()), 0x3Fu);
}

TEST(Checkpoint, RejectsCorruptInput) {
  EXPECT_THROW(decode_checkpoint("NOTACKPT"), ParseError);
  std::string bytes = encode_checkpoint({{"x", Tensor::vector({1.0, 2.0})}});
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), ParseError);
  EXPECT_THROW(load_checkpoint("/nonexistent/path.ckpt"), IoError);
}

TEST(Manifest, ParsesAndReportsLine) {
  const Manifest m = decode_manifest("# comment\n\nwindow_size = 3\n  seed=9  \n");
  EXPECT_EQ(m.at("window_size"), "3");
  EXPECT_EQ(m.at("seed"), "9");
  try {
    decode_manifest("a = 1\nbroken line\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_EQ(decode_manifest(encode_manifest(m)), m);
}

TEST(Config, DefaultsMatchDocumentation) {
  const RunConfig c = config_merge({}, {});
  EXPECT_EQ(c.model.window_size, 4u);
  EXPECT_EQ(c.model.num_heads, 10u);
  EXPECT_EQ(c.model.embed_dim, 300u);
  EXPECT_EQ(c.model.num_lstm_layers, 2u);
  EXPECT_DOUBLE_EQ(c.model.dropout_p, 0.5);
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 1e-4);
  EXPECT_DOUBLE_EQ(c.train.weight_decay, 0.01);
  EXPECT_EQ(c.model.kernel_widths, (std::vector<std::size_t>{3, 4, 5}));
}

TEST(Config, FlagsOverrideFileOverrideDefaults) {
  EXPECT_EQ(config_merge({{"window_size", "3"}}, {{"window_size", "4"}}).model.window_size, 4u);
  EXPECT_EQ(config_merge({{"window_size", "3"}}, {}).model.window_size, 3u);
  EXPECT_EQ(config_merge({{"window_size", "3"}}, {{"seed", "5"}}).train.seed, 5u);
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    config_merge({{"windwo_size", "3"}}, {});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("windwo_size"), std::string::npos);
  }
}

TEST(Config, TypeMismatchAndInvariants) {
  EXPECT_THROW(config_merge({}, {{"window_size", "four"}}), ConfigError);
  EXPECT_THROW(config_merge({}, {{"dropout_p", "0.5x"}}), ConfigError);
  EXPECT_THROW(config_merge({}, {{"attention_mode", "fancy"}}), ConfigError);
  EXPECT_THROW(config_merge({}, {{"num_heads", "7"}}), ConfigError);
  EXPECT_THROW(config_merge({}, {{"lambda_imp", "-1"}}), ConfigError);
  EXPECT_THROW(config_merge({}, {{"learning_rate", "0"}}), ConfigError);
  EXPECT_THROW(config_merge({}, {{"hidden_dim", "1"}, {"kernel_widths", "3,9"}}), ConfigError);
}

TEST(Config, ManifestRoundTripIsLossless) {
  RunConfig c;
  c.model.attention_mode = AttentionMode::Raw;
  c.model.channel_mask = ChannelMask::SentenceOnly;
  c.model.kernel_widths = {2, 7};
  c.model.lambda_imp = 0.1;
  c.train.learning_rate = 2e-4;
  c.train.seed = 123456789012345ull;
  const RunConfig back = config_merge(to_manifest(c), {});
  EXPECT_EQ(to_manifest(back), to_manifest(c));
  EXPECT_DOUBLE_EQ(back.model.lambda_imp, 0.1);
}
