#include <gtest/gtest.h>

#include <cmath>

#include "bns/gradcheck.hpp"
#include "bns/layers.hpp"

using namespace bns;

namespace {

Tensor identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

void set(Var v, const Tensor& value) { v.mutable_value() = value; }

void zero_all(const ParamList& params) {
  for (const auto& p : params) set(p.var, Tensor(p.var.shape()));
}

Tensor rand(Shape s, Rng& rng, double bound = 1.0) { return uniform_tensor(std::move(s), bound, rng); }

double weighted_check(const std::function<Var()>& f, const std::vector<Var>& leaves) {
  return check_gradients(f, leaves, 1e-5).max_rel_error;
}

std::vector<Var> leaves(const ParamList& params) {
  std::vector<Var> out;
  for (const auto& p : params) out.push_back(p.var);
  return out;
}

}  // namespace

// ---- embedding lookup ----------------------------------------------------

TEST(Embed, SingleRowLookup) {
  const Var table = constant(Tensor::matrix({{1, 2, 3}}));
  EXPECT_EQ(gather_sum(table, {{0}}, 99).value().values(), (std::vector<double>{1, 2, 3}));
}

TEST(Embed, EmptyIdList) {
  const Var table = constant(Tensor::matrix({{1, 2, 3}}));
  EXPECT_EQ(gather_sum(table, {}, 0).shape(), (Shape{0, 3}));
}

TEST(Embed, OutOfRangeId) {
  const Var table = constant(Tensor::matrix({{1, 2, 3}}));
  EXPECT_THROW(gather_sum(table, {{4}}, 0), ShapeError);
}

// ---- attention -----------------------------------------------------------

TEST(Attention, SingleStepReturnsValueRow) {
  Rng rng(1);
  const MultiHeadAttention att(4, 2, rng);
  const Var x = constant(rand({1, 4}, rng));
  const Tensor v = matmul(x, att.w_v).value();
  for (auto mode : {AttentionMode::Raw, AttentionMode::Conflict}) {
    const Tensor out = att.forward(x, mode).value();
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out[j], v[j], 1e-14);
  }
}

TEST(Attention, IdenticalRowsGiveMeanOfValues) {
  Rng rng(2);
  MultiHeadAttention att(3, 1, rng);
  set(att.w_q, identity(3));
  set(att.w_k, identity(3));
  set(att.w_v, identity(3));
  const Var x = constant(Tensor::matrix({{0.3, -1.0, 2.0}, {0.3, -1.0, 2.0}}));
  for (auto mode : {AttentionMode::Raw, AttentionMode::Conflict}) {
    const auto w = att.weights(x, mode)[0].value();
    for (double v : w.values()) EXPECT_NEAR(v, 0.5, 1e-15);
    const Tensor out = att.forward(x, mode).value();
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out.at(r, j), x.value().at(0, j), 1e-14);
  }
}

TEST(Attention, ConflictFavorsLowSimilarityKey) {
  Rng rng(3);
  MultiHeadAttention att(2, 1, rng);
  set(att.w_q, identity(2));
  set(att.w_k, identity(2));
  // q = row 0; q.k1 = 1 < q.k2 = 2
  const Var x = constant(Tensor::matrix({{1, 0}, {1, 5}, {2, 0}}));
  const Tensor cam = att.weights(x, AttentionMode::Conflict)[0].value();
  const Tensor raw = att.weights(x, AttentionMode::Raw)[0].value();
  EXPECT_GT(cam.at(0, 0), cam.at(0, 2));
  EXPECT_LT(raw.at(0, 0), raw.at(0, 2));
}

TEST(Attention, ConflictEqualsRawOnNegatedLogits) {
  Rng rng(4);
  const MultiHeadAttention att(6, 3, rng);
  const Var x = constant(rand({5, 6}, rng, 2.0));
  const auto logits = att.logits(x);
  const auto cam = att.weights(x, AttentionMode::Conflict);
  for (std::size_t h = 0; h < 3; ++h) {
    const Tensor ref = softmax(neg(logits[h]), 1).value();
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(cam[h].value()[i], ref[i], 1e-12);
  }
}

TEST(Attention, WeightRowsAreProbabilityVectors) {
  Rng rng(5);
  const MultiHeadAttention att(8, 4, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const Var x = constant(rand({1 + rng.index(7), 8}, rng, 3.0));
    for (auto mode : {AttentionMode::Raw, AttentionMode::Conflict}) {
      for (const auto& w : att.weights(x, mode)) {
        const Tensor t = w.value();
        for (std::size_t r = 0; r < t.rows(); ++r) {
          double s = 0;
          for (double v : t.row(r)) {
            EXPECT_GE(v, 0.0);
            s += v;
          }
          EXPECT_NEAR(s, 1.0, 1e-9);
        }
      }
    }
  }
}

TEST(Attention, EqualLogitsGiveUniformWeights) {
  Rng rng(6);
  MultiHeadAttention att(2, 1, rng);
  set(att.w_q, Tensor({2, 2}));
  const Var x = constant(rand({2, 2}, rng));
  for (auto mode : {AttentionMode::Raw, AttentionMode::Conflict}) {
    const Tensor w = att.weights(x, mode)[0].value();
    for (double v : w.values()) EXPECT_DOUBLE_EQ(v, 0.5);
  }
}

TEST(Attention, HeadsMustDivideModelDim) {
  Rng rng(7);
  EXPECT_THROW(MultiHeadAttention(10, 3, rng), ConfigError);
}

TEST(Attention, WrongInputWidthNamesShape) {
  Rng rng(8);
  const MultiHeadAttention att(4, 2, rng);
  EXPECT_THROW(att.forward(constant(Tensor({2, 5})), AttentionMode::Raw), ShapeError);
}

TEST(Attention, GradientsBothModes) {
  Rng rng(9);
  const MultiHeadAttention att(6, 2, rng);
  const Var x = parameter(rand({3, 6}, rng));
  const Tensor w = rand({3, 6}, rng);
  ParamList p;
  att.collect(p, "att");
  auto l = leaves(p);
  l.push_back(x);
  for (auto mode : {AttentionMode::Raw, AttentionMode::Conflict}) {
    EXPECT_LT(weighted_check([&] { return sum(mul_const(att.forward(x, mode), w)); }, l), 1e-4);
  }
}

// ---- Bi-LSTM -------------------------------------------------------------

TEST(BiLstm, ZeroWeightsGiveZeroStates) {
  Rng rng(10);
  BiLstm net(3, 4, 2, rng);
  ParamList p;
  net.collect(p, "lstm");
  zero_all(p);
  const auto out = net.run(constant(rand({5, 3}, rng)));
  for (double v : out.states.value().values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(out.states.shape(), (Shape{5, 8}));
  EXPECT_EQ(out.last.shape(), Shape{8});
}

TEST(BiLstm, SingleStepRowIsTerminalState) {
  Rng rng(11);
  const BiLstm net(3, 2, 2, rng);
  const auto out = net.run(constant(rand({1, 3}, rng)));
  EXPECT_EQ(out.states.value().values(), out.last.value().values());
}

TEST(BiLstm, LastIsForwardEndAndBackwardStart) {
  Rng rng(12);
  const BiLstm net(3, 2, 1, rng);
  const auto out = net.run(constant(rand({4, 3}, rng)));
  const Tensor s = out.states.value();
  const Tensor last = out.last.value();
  EXPECT_EQ(last[0], s.at(3, 0));
  EXPECT_EQ(last[1], s.at(3, 1));
  EXPECT_EQ(last[2], s.at(0, 2));
  EXPECT_EQ(last[3], s.at(0, 3));
}

TEST(BiLstm, ReversalSymmetry) {
  Rng rng(13);
  const LstmDirection dir(3, 4, rng);
  const Tensor x = rand({6, 3}, rng);
  Tensor reversed({6, 3});
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t j = 0; j < 3; ++j) reversed.at(5 - t, j) = x.at(t, j);
  const Tensor backward = dir.run(constant(x), true).value();
  const Tensor forward = dir.run(constant(reversed), false).value();
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(backward.at(t, j), forward.at(5 - t, j));
}

TEST(BiLstm, DirectionsHaveIndependentParameters) {
  Rng rng(14);
  const BiLstm net(3, 2, 2, rng);
  ParamList p;
  net.collect(p, "lstm");
  EXPECT_EQ(p.size(), 2u * 2u * 3u);
  EXPECT_NE(net.layers[0].forward_dir.w_x.value().values(), net.layers[0].backward_dir.w_x.value().values());
}

TEST(BiLstm, EmptySequenceRejected) {
  Rng rng(15);
  const BiLstm net(3, 2, 1, rng);
  EXPECT_THROW(net.run(constant(Tensor({0, 3}))), ShapeError);
}

TEST(BiLstm, GradientFourSteps) {
  Rng rng(16);
  const BiLstm net(5, 8, 2, rng);
  const Var x = parameter(rand({4, 5}, rng));
  const Tensor ws = rand({4, 16}, rng);
  const Tensor wl = rand({16}, rng);
  ParamList p;
  net.collect(p, "lstm");
  auto l = leaves(p);
  l.push_back(x);
  const double err = weighted_check([&] {
    const auto o = net.run(x);
    return add(sum(mul_const(o.states, ws)), sum(mul_const(o.last, wl)));
  }, l);
  EXPECT_LT(err, 1e-4);
}

// ---- convolution ---------------------------------------------------------

TEST(ConvFusion, ZeroInputGivesReluOfBias) {
  Rng rng(17);
  const ConvFusion conv(2, {3, 4, 5}, 6, rng);
  const Tensor out = conv.run(constant(Tensor({2, 10}))).value();
  std::size_t k = 0;
  for (const auto& b : conv.biases)
    for (double v : b.value().values()) EXPECT_DOUBLE_EQ(out[k++], std::max(0.0, v));
}

TEST(ConvFusion, ZeroInputZeroBiasGivesZero) {
  Rng rng(18);
  ConvFusion conv(2, {3, 4, 5}, 6, rng);
  for (const auto& b : conv.biases) set(b, Tensor(b.shape()));
  const Tensor out = conv.run(constant(Tensor({2, 9}))).value();
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(ConvFusion, OutputLengthIndependentOfWidth) {
  Rng rng(19);
  const ConvFusion conv(2, {3, 4, 5}, 7, rng);
  for (std::size_t d : {5, 8, 64}) EXPECT_EQ(conv.run(constant(rand({2, d}, rng))).shape(), Shape{21});
  EXPECT_EQ(conv.output_dim(), 21u);
}

TEST(ConvFusion, WrongChannelCount) {
  Rng rng(20);
  const ConvFusion conv(2, {3}, 2, rng);
  EXPECT_THROW(conv.run(constant(Tensor({3, 8}))), ShapeError);
}

TEST(ConvFusion, NonArgmaxPerturbationLeavesOutputUnchanged) {
  Rng rng(21);
  const ConvFusion conv(1, {1}, 1, rng);
  set(conv.kernels[0], Tensor::matrix({{1.0}}));
  set(conv.biases[0], Tensor({1}));
  Tensor x = Tensor::matrix({{0.1, 0.9, 0.3}});
  const double before = conv.run(constant(x)).value()[0];
  x.at(0, 2) += 1e-3;
  EXPECT_EQ(conv.run(constant(x)).value()[0], before);
}

TEST(ConvFusion, Gradient) {
  Rng rng(22);
  const ConvFusion conv(2, {3, 4, 5}, 3, rng);
  const Var x = parameter(rand({2, 9}, rng));
  const Tensor w = rand({9}, rng);
  ParamList p;
  conv.collect(p, "conv");
  auto l = leaves(p);
  l.push_back(x);
  EXPECT_LT(weighted_check([&] { return sum(mul_const(conv.run(x), w)); }, l), 1e-4);
}

// ---- dense heads and dropout ---------------------------------------------

TEST(Classify, ProbabilitiesSumToOne) {
  Rng rng(23);
  const Linear head(5, 2, rng);
  const Tensor p = classify(head, constant(rand({5}, rng))).value();
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
}

TEST(Dropout, InferenceIsIdentity) {
  Rng rng(24);
  const Var x = constant(rand({3, 4}, rng));
  EXPECT_EQ(dropout(x, 0.5, nullptr).value().values(), x.value().values());
  EXPECT_EQ(dropout(x, 0.0, &rng).value().values(), x.value().values());
}

TEST(Dropout, KeptEntriesAreRescaled) {
  Rng rng(25);
  Tensor ones({2000});
  for (double& v : ones.data()) v = 1.0;
  const Tensor out = dropout(constant(ones), 0.5, &rng).value();
  std::size_t kept = 0;
  for (double v : out.values()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    kept += v != 0.0;
  }
  EXPECT_NEAR(static_cast<double>(kept) / 2000.0, 0.5, 0.05);
}
