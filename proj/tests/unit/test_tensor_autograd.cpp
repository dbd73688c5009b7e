#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "bns/gradcheck.hpp"
#include "bns/ops.hpp"
#include "bns/random.hpp"

using namespace bns;

TEST(Tensor, ShapeAndDataMustAgree) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  const Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(shape_string(t.shape()), "(2,3)");
}

TEST(Tensor, MatrixLiteralIsRowMajor) {
  const Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.at(1, 0), 4.0);
  EXPECT_EQ(m.row(0)[2], 3.0);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), ShapeError);
}

TEST(Autograd, SumGradientIsOnes) {
  Var x = parameter(Tensor::vector({0.3, -1.0, 2.0}));
  backward(sum(x));
  EXPECT_EQ(x.grad().values(), (std::vector<double>{1, 1, 1}));
}

TEST(Autograd, SquareGradientIsTwoX) {
  Var x = parameter(Tensor::vector({1, 2}));
  backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad().values(), (std::vector<double>{2, 4}));
}

TEST(Autograd, NonScalarBackwardThrows) {
  Var x = parameter(Tensor::vector({1, 2}));
  EXPECT_THROW(backward(mul(x, x)), ShapeError);
}

TEST(Autograd, NonFiniteValuesAreRejectedEagerly) {
  Var x = parameter(Tensor::vector({std::numeric_limits<double>::max(), 1.0}));
  EXPECT_THROW(mul(x, x), NumericError);
  Var y = parameter(Tensor::vector({std::nan(""), 1.0}));
  EXPECT_THROW(add(y, y), NumericError);
}

TEST(Autograd, ReusedNodeAccumulatesPathGradients) {
  // y = x used three times: f = sum(x*x) + sum(x) -> df/dx = 2x + 1
  Var x = parameter(Tensor::vector({0.5, -2.0, 3.0}));
  backward(add(sum(mul(x, x)), sum(x)));
  const auto g = x.grad();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(g[i], 2 * x.value()[i] + 1);

  // duplicated-input construction: k explicit copies contribute k times
  Var y = parameter(Tensor::vector({1.5}));
  std::vector<Var> uses(4, y);
  backward(sum(stack(uses)));
  EXPECT_DOUBLE_EQ(y.grad()[0], 4.0);
}

TEST(Autograd, DiamondGraphVisitsSharedNodeOnce) {
  Var x = parameter(Tensor::vector({2.0}));
  const Var shared = mul(x, x);          // x^2
  const Var f = add(sum(shared), sum(scale(shared, 3.0)));  // 4x^2
  backward(f);
  EXPECT_DOUBLE_EQ(x.grad()[0], 16.0);
}

TEST(Autograd, ConstantsRecordNoGraph) {
  const Var a = constant(Tensor::vector({1, 2}));
  const Var b = mul(a, a);
  EXPECT_FALSE(b.requires_grad());
  EXPECT_TRUE(b.node()->parents.empty());
}

TEST(GradCheck, SumOfSquares) {
  Rng rng(3);
  Tensor x({7});
  for (auto& v : x.data()) v = rng.uniform(-2, 2);
  EXPECT_LT(check_gradients([](const Var& v) { return sum(mul(v, v)); }, x, 1e-5), 1e-7);
}

TEST(GradCheck, SoftminDotConstant) {
  Rng rng(4);
  Tensor x({6}), c({6});
  for (auto& v : x.data()) v = rng.uniform(-2, 2);
  for (auto& v : c.data()) v = rng.uniform(-1, 1);
  EXPECT_LT(check_gradients([&](const Var& v) { return sum(mul_const(softmin(v, 0), c)); }, x, 1e-5), 1e-6);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  const Tensor x = Tensor::vector({1, 2, 3});
  EXPECT_EQ(check_gradients([](const Var&) { return constant(Tensor::scalar(4.0)); }, x, 1e-5), 0.0);
}

TEST(GradCheck, RejectsNonScalarFunction) {
  const Tensor x = Tensor::vector({1, 2});
  EXPECT_THROW(check_gradients([](const Var& v) { return mul(v, v); }, x, 1e-5), ShapeError);
}

TEST(Random, SameSeedSameSequence) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(Rng(42).next(), c.next());
}

TEST(Random, UniformWithinBounds) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(-0.05, 0.05);
    EXPECT_GE(u, -0.05);
    EXPECT_LT(u, 0.05);
  }
}

TEST(Random, ShuffleIsPermutation) {
  Rng r(9);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto w = v;
  r.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}
