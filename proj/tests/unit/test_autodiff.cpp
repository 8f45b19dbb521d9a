#include <gtest/gtest.h>

#include <cmath>

#include "pedalid/autodiff/gradcheck.hpp"
#include "pedalid/autodiff/ops.hpp"
#include "pedalid/util/error.hpp"
#include "testkit.hpp"

namespace {

using namespace pedalid;
using ad::Tape;
using ad::Tensor;
namespace ops = ad::ops;
using testkit::Vec;

Vec vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

TEST(Tensor, ShapeAndStorageAgree) {
  Tensor t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.values().size(), 24u);
  EXPECT_FALSE(t.has_grad());
  EXPECT_THROW(Tensor({2, 2}, Vec{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor(ad::Shape{1, 1, 1, 1}), ShapeError);
  Tensor p = Tensor::parameter({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(p.grad().size(), 4u);
}

TEST(Tensor, CloneIsIndependent) {
  Tensor a({3}, Vec{1, 2, 3});
  Tensor b = a.clone();
  b.values()[0] = 9;
  EXPECT_EQ(a.values()[0], 1);
}

TEST(Ops, AddExample) {
  Tape t;
  EXPECT_EQ(vals(ops::add(t, Tensor({2}, Vec{1, 2}), Tensor({2}, Vec{3, 4}))), (Vec{4, 6}));
}

TEST(Ops, AddBroadcastsTrailingBias) {
  Tape t;
  Tensor y = ops::add(t, Tensor({2, 2}, Vec{1, 2, 3, 4}), Tensor({2}, Vec{10, 20}));
  EXPECT_EQ(vals(y), (Vec{11, 22, 13, 24}));
}

TEST(Ops, ShapeErrorNamesBothShapesAndKind) {
  Tape t;
  try {
    ops::elementwise_and_linear(t, Tensor({2, 3}), Tensor({4, 5}), ops::LinearKind::matmul);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4,5]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("matmul"), std::string::npos) << msg;
  }
  EXPECT_THROW(ops::add(t, Tensor({2}), Tensor({3})), ShapeError);
}

TEST(Ops, MatmulIdentity) {
  Rng rng(1);
  Tensor x = testkit::random_tensor(rng, {3, 3});
  Tensor eye({3, 3}, Vec{1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tape t;
  EXPECT_EQ(vals(ops::matmul(t, eye, x)), vals(x));
}

TEST(Ops, MatmulMatchesTripleLoop) {
  Rng rng(2);
  Tensor a = testkit::random_tensor(rng, {4, 5}), b = testkit::random_tensor(rng, {5, 3});
  Tape t;
  const Vec ref = testkit::matmul_oracle(vals(a), vals(b), 4, 5, 3);
  EXPECT_LT(testkit::max_abs_diff(vals(ops::matmul(t, a, b)), ref), 1e-12);
}

TEST(Ops, ScaleKindReadsFactorFromB) {
  Tape t;
  Tensor y = ops::elementwise_and_linear(t, Tensor({2}, Vec{1, -2}), Tensor::scalar(3),
                                         ops::LinearKind::scale);
  EXPECT_EQ(vals(y), (Vec{3, -6}));
}

TEST(Conv1d, IdentityKernels) {
  Rng rng(3);
  Tensor x = testkit::random_tensor(rng, {2, 1, 9});
  Tape t;
  EXPECT_EQ(vals(ops::conv1d(t, x, Tensor({1, 1, 1}, Vec{1}), Tensor(), {1, 0})), vals(x));
  EXPECT_EQ(vals(ops::conv1d(t, x, Tensor({1, 1, 3}, Vec{0, 1, 0}), Tensor(), {1, 1})), vals(x));
}

TEST(Conv1d, MatchesDirectSummation) {
  Rng rng(4);
  Tensor x = testkit::random_tensor(rng, {2, 3, 16}), w = testkit::random_tensor(rng, {4, 3, 5});
  Tensor b = testkit::random_tensor(rng, {4});
  Tape t;
  Tensor y = ops::conv1d(t, x, w, b, {1, 2});
  EXPECT_EQ(y.shape(), (ad::Shape{2, 4, 16}));
  EXPECT_LT(testkit::max_abs_diff(vals(y), testkit::conv1d_oracle(vals(x), vals(w), vals(b), 2, 3,
                                                                  16, 4, 5, 1, 2)),
            1e-12);
}

TEST(Conv1d, SamePaddingPreservesLength) {
  Rng rng(5);
  Tape t = Tape::inference();
  for (std::size_t k : {1, 3, 5, 7}) {
    for (std::size_t len = 1; len <= 64; ++len) {
      Tensor x({1, 2, len}, 1.0);
      Tensor w = testkit::random_tensor(rng, {3, 2, k});
      EXPECT_EQ(ops::conv1d(t, x, w, Tensor(), {1, k / 2}).dim(2), len);
    }
  }
}

TEST(Conv1d, RejectsBadShapes) {
  Tape t;
  EXPECT_THROW(ops::conv1d(t, Tensor({1, 2, 3}), Tensor({1, 2, 5}), Tensor(), {1, 0}), ShapeError);
  EXPECT_THROW(ops::conv1d(t, Tensor({1, 2, 8}), Tensor({1, 3, 3}), Tensor(), {1, 1}), ShapeError);
  EXPECT_THROW(ops::conv1d(t, Tensor({1, 2, 8}), Tensor({1, 2, 3}), Tensor(), {0, 1}),
               std::invalid_argument);
}

TEST(Prelu, Examples) {
  Tape t;
  Tensor alpha({1}, Vec{0.25});
  EXPECT_EQ(ops::prelu(t, Tensor({1}, Vec{3}), alpha).item(), 3);
  EXPECT_EQ(ops::prelu(t, Tensor({1}, Vec{-2}), alpha).item(), -0.5);
  Tensor x({5}, Vec{-2, -0.5, 0, 0.5, 2});
  EXPECT_EQ(vals(ops::prelu(t, x, Tensor({1}, Vec{0}))), (Vec{0, 0, 0, 0.5, 2}));
}

TEST(Prelu, PerChannelSlope) {
  Tape t;
  Tensor x({1, 2, 2}, Vec{-1, 1, -1, 1});
  EXPECT_EQ(vals(ops::prelu(t, x, Tensor({2}, Vec{0.1, 0.5}))), (Vec{-0.1, 1, -0.5, 1}));
  EXPECT_THROW(ops::prelu(t, x, Tensor({3})), ShapeError);
}

TEST(Prelu, KinkTakesPositiveBranch) {
  Tensor x = Tensor::parameter({1}, {0.0});
  Tensor alpha = Tensor::parameter({1}, {0.25});
  Tape t;
  t.backward(ops::sum(t, ops::prelu(t, x, alpha)));
  EXPECT_EQ(x.grad()[0], 1.0);
  EXPECT_EQ(alpha.grad()[0], 0.0);
}

TEST(Softmax, Examples) {
  Tape t;
  EXPECT_EQ(vals(ops::softmax(t, Tensor({1, 2}, Vec{0, 0}))), (Vec{0.5, 0.5}));
  Rng rng(6);
  Tensor x = testkit::random_tensor(rng, {3, 5});
  Tensor shifted({3, 5});
  for (std::size_t i = 0; i < 15; ++i) shifted.values()[i] = x.values()[i] + 17.5;
  EXPECT_LT(testkit::max_abs_diff(vals(ops::softmax(t, x)), vals(ops::softmax(t, shifted))), 1e-12);
}

TEST(Softmax, RowsSumToOneAndMatchNaive) {
  Rng rng(7);
  Tape t;
  for (int rep = 0; rep < 50; ++rep) {
    Tensor x = testkit::random_tensor(rng, {4, 5}, -50, 50);
    Tensor y = ops::softmax(t, x);
    Tensor ly = ops::log_softmax(t, x);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0, s2 = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        s += y.values()[r * 5 + j];
        s2 += std::exp(ly.values()[r * 5 + j]);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
      EXPECT_NEAR(s2, 1.0, 1e-9);
    }
  }
  Tensor x = testkit::random_tensor(rng, {1, 5});
  Tensor y = ops::softmax(t, x);
  double z = 0;
  for (double v : x.values()) z += std::exp(v);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(y.values()[j], std::exp(x.values()[j]) / z, 1e-12);
}

TEST(LogSoftmax, LargeInputsStayFinite) {
  Tape t;
  Tensor y = ops::log_softmax(t, Tensor({1, 3}, Vec{1000, 0, -1000}));
  for (double v : y.values()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(y.values()[0], 0.0, 1e-12);
}

TEST(GlobalAvgPool, Examples) {
  Tape t;
  EXPECT_EQ(ops::global_avg_pool(t, Tensor({1, 1, 6}, 7.0)).item(), 7.0);
  EXPECT_EQ(ops::global_avg_pool(t, Tensor({2, 128, 80})).shape(), (ad::Shape{2, 128}));
}

TEST(Concat, ExamplesAndRoundTrip) {
  Tape t;
  EXPECT_EQ(vals(ops::concat(t, Tensor({1, 1}, Vec{1}), Tensor({1, 1}, Vec{2}))), (Vec{1, 2}));
  EXPECT_EQ(ops::concat(t, Tensor({3, 128}), Tensor({3, 75})).dim(1), 203u);
  Rng rng(8);
  Tensor a = testkit::random_tensor(rng, {2, 3}), b = testkit::random_tensor(rng, {2, 4});
  Tensor c = ops::concat(t, a, b);
  EXPECT_EQ(vals(ops::slice(t, c, 0, 3)), vals(a));
  EXPECT_EQ(vals(ops::slice(t, c, 3, 4)), vals(b));
  EXPECT_THROW(ops::concat(t, Tensor({2, 1}), Tensor({3, 1})), ShapeError);
}

TEST(Backward, SumAndSquare) {
  Tensor x = Tensor::parameter({4}, {1, 2, 3, 4});
  {
    Tape t;
    t.backward(ops::sum(t, x));
  }
  EXPECT_EQ(vals(Tensor({4}, Vec(x.grad().begin(), x.grad().end()))), (Vec{1, 1, 1, 1}));
  Tensor s = Tensor::parameter({1}, {3.0});
  Tape t;
  t.backward(ops::mul(t, s, s));
  EXPECT_EQ(s.grad()[0], 6.0);
}

TEST(Backward, AccumulatesAcrossCallsUntilZeroed) {
  Tensor s = Tensor::parameter({1}, {3.0});
  for (int i = 0; i < 2; ++i) {
    Tape t;
    t.backward(ops::mul(t, s, s));
  }
  EXPECT_EQ(s.grad()[0], 12.0);
  s.zero_grad();
  EXPECT_EQ(s.grad()[0], 0.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tensor x = Tensor::parameter({2}, {1, 2});
  Tape t;
  Tensor y = ops::mul(t, x, x);
  EXPECT_THROW(t.backward(y), ShapeError);
}

TEST(Tape, RecordsOnlyDifferentiableWork) {
  Tape t;
  Tensor c({2}, Vec{1, 2});
  ops::add(t, c, c);
  EXPECT_EQ(t.size(), 0u);
  Tensor p = Tensor::parameter({2}, {1, 2});
  Tensor y = ops::add(t, p, c);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(y.node_id(), std::optional<std::size_t>(0));
  Tape inf = Tape::inference();
  EXPECT_FALSE(ops::add(inf, p, c).node_id().has_value());
}

TEST(Tape, EntriesAreTopologicallyOrdered) {
  Rng rng(9);
  Tensor x = Tensor::parameter({2, 3}, testkit::uniform(rng, 6));
  Tensor w = Tensor::parameter({3, 2}, testkit::uniform(rng, 6));
  Tape t;
  Tensor y = ops::log_softmax(t, ops::tanh(t, ops::matmul(t, x, w)));
  ops::sum(t, y);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (const auto& in : t.entries()[i].inputs) {
      EXPECT_LT(in->tape_index, static_cast<std::ptrdiff_t>(i));
    }
    EXPECT_EQ(t.entries()[i].output->tape_index, static_cast<std::ptrdiff_t>(i));
  }
}

TEST(Tape, DeterministicGradients) {
  Rng rng(10);
  Tensor x = testkit::random_tensor(rng, {2, 3, 8});
  Tensor w = Tensor::parameter({4, 3, 3}, testkit::uniform(rng, 36));
  auto grads = [&] {
    w.zero_grad();
    Tape t;
    Tensor y = ops::softmax(t, ops::global_avg_pool(t, ops::conv1d(t, x, w, Tensor(), {1, 1})));
    t.backward(ops::cross_entropy(t, y, std::vector<std::size_t>{1, 3}));
    return Vec(w.grad().begin(), w.grad().end());
  };
  EXPECT_EQ(grads(), grads());
}

TEST(Loss, CrossEntropyExamples) {
  Tape t;
  const std::vector<std::size_t> ten(3, 4);
  EXPECT_NEAR(ops::cross_entropy(t, Tensor({3, 10}, 0.0), ten).item(), std::log(10.0), 1e-12);
  EXPECT_NEAR(ops::cross_entropy(t, Tensor({1, 3}, Vec{1, 2, 3}), std::vector<std::size_t>{2}).item(),
              std::log(std::exp(-2.0) + std::exp(-1.0) + 1.0), 1e-12);
  EXPECT_NEAR(ops::cross_entropy(t, Tensor({1, 3}, Vec{1, 2, 3}), std::vector<std::size_t>{2}).item(),
              0.407606, 1e-6);
  double prev = INFINITY;
  for (double m = 0; m <= 40; m += 2) {
    const double l = ops::cross_entropy(t, Tensor({1, 2}, Vec{m, 0}), std::vector<std::size_t>{0}).item();
    if (prev > 1e-12) {
      EXPECT_LT(l, prev);
    } else {
      EXPECT_LE(l, prev);
    }
    EXPECT_GE(l, 0.0);
    prev = l;
  }
  EXPECT_LT(prev, 1e-15);
  EXPECT_THROW(ops::cross_entropy(t, Tensor({1, 3}), std::vector<std::size_t>{3}), std::invalid_argument);
  EXPECT_THROW(ops::nll_loss(t, Tensor({1, 3}), std::vector<std::size_t>{5}), std::invalid_argument);
}

TEST(Loss, NllOfLogSoftmaxEqualsCrossEntropy) {
  Rng rng(11);
  Tensor x = testkit::random_tensor(rng, {4, 6});
  const std::vector<std::size_t> c{0, 5, 2, 2};
  Tape t;
  EXPECT_NEAR(ops::nll_loss(t, ops::log_softmax(t, x), c).item(), ops::cross_entropy(t, x, c).item(),
              1e-12);
}

TEST(GradCheck, LinearFunctionIsExact) {
  Rng rng(12);
  Tensor x = testkit::random_tensor(rng, {3, 4}), w = testkit::random_tensor(rng, {3, 4});
  const double err = ad::finite_diff_check(
      [&](Tape& t, const Tensor& in) { return testkit::weighted_sum(t, ops::scale(t, in, 2.5), w); }, x);
  EXPECT_LT(err, 1e-9);
  EXPECT_FALSE(x.requires_grad());
}

TEST(GradCheck, ExcludedCoordinatesAreSkipped) {
  Tensor x({3}, Vec{-1, 0, 1});
  Tensor alpha({1}, Vec{0.25});
  ad::GradCheckOptions opt;
  opt.exclude = [&](std::size_t input, std::size_t i) { return input == 0 && x.values()[i] == 0; };
  const auto r = ad::finite_diff_check(
      [&](Tape& t) { return ops::sum(t, ops::prelu(t, x, alpha)); }, {x, alpha}, opt);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.checked, 3u);
  EXPECT_LT(r.max_relative_error, 1e-8);
}

TEST(GradCheck, KinkCrossingsAreDetected) {
  Tensor x({3}, Vec{-1, 3e-6, 1});
  Tensor alpha({1}, Vec{0.25});
  auto f = [&](Tape& t) { return ops::sum(t, ops::prelu(t, x, alpha)); };
  EXPECT_GT(ad::finite_diff_check(f, {x, alpha}).max_relative_error, 0.1);

  ad::GradCheckOptions opt;
  opt.skip_kinks = true;
  const auto r = ad::finite_diff_check(f, {x, alpha}, opt);
  EXPECT_EQ(r.kinks, 1u);
  EXPECT_EQ(r.checked, 3u);
  EXPECT_LT(r.max_relative_error, 1e-8);

  // A smooth function has none.
  Tensor y({4}, Vec{-1.5, -0.2, 0.3, 1.1});
  const auto s = ad::finite_diff_check([&](Tape& t) { return ops::sum(t, ops::tanh(t, ops::mul(t, y, y))); }, {y}, opt);
  EXPECT_EQ(s.kinks, 0u);
  EXPECT_LT(s.max_relative_error, 1e-6);
}

TEST(GradCheck, DenominatorFloor) {
  // Gradient 1e-9: the default floor measures it relatively, a raised one absolutely.
  Tensor x({1}, Vec{0.5});
  auto f = [&](Tape& t) { return ops::add(t, ops::scale(t, x, 1e-9), Tensor::scalar(1.0)); };
  ad::GradCheckOptions opt;
  const double strict = ad::finite_diff_check(f, {x}, opt).max_relative_error;
  opt.denominator_floor = 1e-5;
  const double floored = ad::finite_diff_check(f, {x}, opt).max_relative_error;
  EXPECT_LE(floored, strict * 1e-8 / 1e-5 + 1e-15);
  EXPECT_LT(floored, 1e-4);
}

TEST(GradCheck, PrimitiveSuite) {
  for (const auto& r : testkit::primitive_gradient_suite(42, 20)) {
    EXPECT_TRUE(r.pass()) << r.name << ": " << r.max_error;
    EXPECT_EQ(r.cases, 20u) << r.name;
  }
}

TEST(GradCheck, LayerSuite) {
  for (const auto& r : testkit::layer_gradient_suite(7, 5)) {
    EXPECT_TRUE(r.pass()) << r.name << ": " << r.max_error;
    EXPECT_EQ(r.cases, 5u) << r.name;
  }
}

TEST(Invariants, ValuesStayFinite) {
  Rng rng(13);
  Tape t;
  Tensor x = testkit::random_tensor(rng, {2, 8}, -700, 700);
  for (Tensor y : {ops::sigmoid(t, x), ops::tanh(t, x), ops::softmax(t, x), ops::log_softmax(t, x)}) {
    for (double v : y.values()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Oracles, LibraryMatchesReferences) {
  for (const auto& r : testkit::oracle_suite(7, 20)) {
    EXPECT_TRUE(r.pass()) << r.name << ": " << r.max_error;
  }
}

}  // namespace
