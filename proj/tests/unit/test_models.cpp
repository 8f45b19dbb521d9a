#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "pedalid/models/checkpoint.hpp"
#include "pedalid/models/models.hpp"
#include "pedalid/util/error.hpp"
#include "testkit.hpp"

namespace {

using namespace pedalid;
using ad::Tape;
using ad::Tensor;
using models::Architecture;
using models::FrontEnd;
using nn::Mode;
using testkit::Vec;

Vec vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

void zero(Tensor& t) { std::fill(t.values().begin(), t.values().end(), 0.0); }

std::size_t conv_params(std::size_t cin, std::size_t cout, std::size_t k) { return cout * cin * k + cout; }
std::size_t basic_params(std::size_t cin, std::size_t cout, std::size_t k) {
  return conv_params(cin, cout, k) + 2 * cout + cout;
}
std::size_t resnet_trunk_params(std::size_t cin, const std::vector<std::size_t>& channels) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const std::size_t co = channels[i];
    n += basic_params(cin, co, 7) + basic_params(co, co, 5) + basic_params(co, co, 3);
    if (cin != co) n += conv_params(cin, co, 1) + 2 * co;
    if (i + 1 < channels.size()) n += co;
    cin = co;
  }
  return n;
}
std::size_t lstm_trunk_params(std::size_t f, std::size_t h) {
  return 4 * (h * f + h * h + 2 * h) + 4 * (h * h + h * h + 2 * h);
}
std::size_t linear_params(std::size_t n, std::size_t m) { return n * m + m; }

models::ModelSpec spec(Architecture a, std::size_t classes = 4, FrontEnd fe = FrontEnd::standard,
                       double rate = 100) {
  models::ModelSpec s;
  s.architecture = a;
  s.front_end = fe;
  s.classes = classes;
  s.sample_rate_hz = rate;
  return s;
}

double max_row_sum_error(const Tensor& logp) {
  double worst = 0;
  for (std::size_t b = 0; b < logp.dim(0); ++b) {
    double s = 0;
    for (std::size_t k = 0; k < logp.dim(1); ++k) s += std::exp(logp.values()[b * logp.dim(1) + k]);
    worst = std::max(worst, std::abs(s - 1));
  }
  return worst;
}

TEST(BasicBlock, ZeroWeightsCollapseToPreluOfBias) {
  Rng rng(1);
  models::BasicBlock block(2, 4, 7, rng);
  zero(block.conv.weight);
  block.conv.bias = Tensor::parameter({4}, {-1.0, 0.5, 2.0, -0.2});
  Tensor x = testkit::random_tensor(rng, {2, 2, 10});
  Tape t;
  Tensor y = block.forward(t, x, Mode::eval);
  const double s = 1 / std::sqrt(1 + 1e-5);
  const Vec bias{-1.0, 0.5, 2.0, -0.2};
  for (std::size_t i = 0; i < y.numel(); ++i) {
    const double v = bias[(i / 10) % 4] * s;
    EXPECT_NEAR(y.values()[i], v >= 0 ? v : 0.25 * v, 1e-15);
  }
}

TEST(BasicBlock, ShapeAndComposition) {
  Rng rng(2);
  models::BasicBlock block(2, 128, 7, rng);
  Tensor x = testkit::random_tensor(rng, {3, 2, 80});
  Tape t;
  Tensor y = block.forward(t, x, Mode::train);
  EXPECT_EQ(y.shape(), (ad::Shape{3, 128, 80}));
  Tensor manual = block.act.forward(t, block.bn.forward(t, block.conv.forward(t, x), Mode::eval));
  EXPECT_EQ(vals(block.forward(t, x, Mode::eval)), vals(manual));
}

TEST(ResidualBlock, ZeroWeightsLeaveShortcut) {
  Rng rng(3);
  models::ResidualBlock block(3, 3, {7, 5, 3}, true, rng);
  EXPECT_FALSE(block.has_projection());
  for (auto& b : block.blocks) {
    zero(b.conv.weight);
    zero(b.conv.bias);
  }
  Tensor x = testkit::random_tensor(rng, {2, 3, 9});
  Tape t;
  for (Mode m : {Mode::eval, Mode::train}) {
    Tensor y = block.forward(t, x, m);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double v = x.values()[i];
      EXPECT_EQ(y.values()[i], v >= 0 ? v : 0.25 * v);
    }
  }
}

TEST(ResidualBlock, ChannelChangesUseProjection) {
  Rng rng(4);
  EXPECT_TRUE(models::ResidualBlock(2, 128, {7, 5, 3}, true, rng).has_projection());
  EXPECT_FALSE(models::ResidualBlock(256, 256, {7, 5, 3}, true, rng).has_projection());
}

TEST(ResNet, ChainPreservesLengthAndFeatureWidth) {
  Rng rng(5);
  models::ResNetConfig cfg;
  cfg.classes = 3;
  models::ResNet net(cfg, true, rng, 1);
  ASSERT_EQ(net.blocks.size(), 4u);
  Tensor x = testkit::random_tensor(rng, {2, 2, 80}, 0, 1);
  Tape t = Tape::inference();
  Tensor h = x;
  for (auto& b : net.blocks) {
    h = b.forward(t, h, Mode::eval);
    EXPECT_EQ(h.dim(2), 80u);
  }
  EXPECT_EQ(h.dim(1), 128u);
  EXPECT_EQ(net.features(t, x, Mode::eval).shape(), (ad::Shape{2, 128}));
  EXPECT_LT(max_row_sum_error(net.forward(t, x, Mode::eval)), 1e-9);
}

TEST(Classifier, ParameterCountsAreExact) {
  const std::size_t k = 10;
  const std::size_t rn = resnet_trunk_params(2, {128, 256, 256, 128});
  const std::size_t ls = lstm_trunk_params(2, 75);
  models::Classifier resnet(spec(Architecture::resnet, k));
  EXPECT_EQ(resnet.parameter_count(), rn + linear_params(128, k));
  models::Classifier lstm(spec(Architecture::lstm, k));
  EXPECT_EQ(lstm.parameter_count(), ls + linear_params(75, k));
  models::Classifier combined(spec(Architecture::lstm_resnet, k));
  EXPECT_EQ(combined.parameter_count(),
            rn + ls + linear_params(203, 64) + 2 * 64 + 64 + linear_params(64, k));

  models::ModelSpec s = spec(Architecture::lstm_resnet, k, FrontEnd::adfe, 1000);
  models::Classifier adfe(s);
  const std::size_t front = basic_params(2, 8, 25) + basic_params(8, 8, 11) + basic_params(8, 2, 11);
  EXPECT_EQ(adfe.parameter_count(), front + combined.parameter_count());
}

TEST(Classifier, RegistryNamesAreUnique) {
  models::Classifier m(spec(Architecture::lstm_resnet, 3, FrontEnd::adfe, 100));
  auto reg = m.registry();
  std::set<std::string> names;
  for (const auto& p : reg.parameters) names.insert(p.name);
  for (const auto& b : reg.buffers) names.insert(b.name);
  EXPECT_EQ(names.size(), reg.parameters.size() + reg.buffers.size());
}

TEST(Classifier, RowsNormalizeInEveryModeAndArchitecture) {
  Rng rng(6);
  for (auto a : {Architecture::resnet, Architecture::lstm, Architecture::lstm_resnet}) {
    models::Classifier m(spec(a, 5), 3);
    Tensor x = testkit::random_tensor(rng, {3, 2, 80}, 0, 1);
    Tape t = Tape::inference();
    for (Mode mode : {Mode::train, Mode::eval}) {
      Tensor y = m.forward(t, x, mode);
      EXPECT_EQ(y.shape(), (ad::Shape{3, 5}));
      EXPECT_LT(max_row_sum_error(y), 1e-9) << to_string(a);
    }
  }
}

TEST(Classifier, FeatureWidthsAndFusion) {
  Rng rng(7);
  Tensor x = testkit::random_tensor(rng, {2, 2, 80}, 0, 1);
  Tape t = Tape::inference();
  models::Classifier lstm(spec(Architecture::lstm, 3));
  EXPECT_EQ(lstm.features(t, x, Mode::eval).shape(), (ad::Shape{2, 75}));
  models::Classifier resnet(spec(Architecture::resnet, 3));
  EXPECT_EQ(resnet.features(t, x, Mode::eval).shape(), (ad::Shape{2, 128}));
  models::Classifier comb(spec(Architecture::lstm_resnet, 3));
  EXPECT_EQ(comb.features(t, x, Mode::eval).shape(), (ad::Shape{2, 203}));
  EXPECT_EQ(comb.spec().combined().fusion_inputs(), 203u);
  auto reg = comb.registry();
  bool found = false;
  for (const auto& p : reg.parameters) {
    if (p.name == "lstm_resnet.fusion.conv.weight") {
      EXPECT_EQ(p.tensor.shape(), (ad::Shape{203, 64}));
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Classifier, HeadOfFeaturesEqualsForwardInEval) {
  Rng rng(8);
  for (auto a : {Architecture::resnet, Architecture::lstm, Architecture::lstm_resnet}) {
    models::Classifier m(spec(a, 4), 11);
    Tensor x = testkit::random_tensor(rng, {2, 2, 80}, 0, 1);
    Tape t = Tape::inference();
    EXPECT_EQ(vals(m.forward(t, x, Mode::eval)), vals(m.head(t, m.features(t, x, Mode::eval), Mode::eval)));
  }
}

TEST(Classifier, EvalIsDeterministicAndBatchEquivariant) {
  Rng rng(9);
  for (auto a : {Architecture::resnet, Architecture::lstm, Architecture::lstm_resnet}) {
    models::Classifier m(spec(a, 3), 5);
    Tensor x = testkit::random_tensor(rng, {3, 2, 80}, 0, 1);
    Tensor xr({3, 2, 80});
    const std::vector<std::size_t> perm{2, 0, 1};
    for (std::size_t b = 0; b < 3; ++b)
      std::copy_n(x.values().begin() + perm[b] * 160, 160, xr.values().begin() + b * 160);
    Tape t = Tape::inference();
    Tensor y = m.forward(t, x, Mode::eval);
    EXPECT_EQ(vals(y), vals(m.forward(t, x, Mode::eval)));
    Tensor yr = m.forward(t, xr, Mode::eval);
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t k = 0; k < 3; ++k)
        EXPECT_NEAR(yr.values()[b * 3 + k], y.values()[perm[b] * 3 + k], 1e-12);
  }
}

TEST(Classifier, CombinedGradientReachesBothBranches) {
  Rng rng(10);
  models::Classifier m(spec(Architecture::lstm_resnet, 3), 2);
  Tensor x = testkit::random_tensor(rng, {4, 2, 80}, 0, 1);
  Tape t;
  t.backward(ad::ops::nll_loss(t, m.forward(t, x, Mode::train), std::vector<std::size_t>{0, 1, 2, 1}));
  auto reg = m.registry();
  auto norm = [&](const std::string& name) {
    for (const auto& p : reg.parameters)
      if (p.name == name) {
        double s = 0;
        for (double g : p.tensor.grad()) s += g * g;
        return s;
      }
    ADD_FAILURE() << "no parameter " << name;
    return 0.0;
  };
  EXPECT_GT(norm("lstm_resnet.resnet.res0.block0.conv.weight"), 0.0);
  EXPECT_GT(norm("lstm_resnet.lstm.lstm.layer0.w_ih"), 0.0);
}

TEST(Classifier, AnyGridLengthRuns) {
  Rng rng(11);
  for (auto a : {Architecture::resnet, Architecture::lstm, Architecture::lstm_resnet}) {
    for (double secs : {5.0, 10.0, 20.0}) {
      auto s = spec(a, 3);
      s.window_seconds = secs;
      models::Classifier m(s, 1);
      Tape t = Tape::inference();
      Tensor y = m.forward(t, testkit::random_tensor(rng, {2, 2, s.input_length()}, 0, 1), Mode::eval);
      EXPECT_EQ(y.shape(), (ad::Shape{2, 3}));
    }
  }
  models::Classifier m(spec(Architecture::resnet, 3));
  Tape t;
  EXPECT_THROW(m.forward(t, Tensor({1, 2, 79}), Mode::eval), ShapeError);
  EXPECT_THROW(m.forward(t, Tensor({1, 3, 80}), Mode::eval), ShapeError);
}

TEST(Adfe, DefaultStagesMapOntoTheGrid) {
  auto k = models::AdfeConfig::for_rate(1000);
  EXPECT_EQ(k.total_stride(), 250u);
  ASSERT_EQ(k.stages.size(), 3u);
  EXPECT_EQ(k.stages[0].kernel, 25u);
  EXPECT_EQ(k.stages[2].stride, 10u);
  EXPECT_EQ(k.output_channels(), 2u);
  EXPECT_EQ(models::AdfeConfig::for_rate(100).total_stride(), 25u);
  EXPECT_THROW(models::AdfeConfig::for_rate(102), std::invalid_argument);

  Rng rng(12);
  Tape t = Tape::inference();
  for (double rate : {1000.0, 100.0}) {
    models::Adfe adfe(models::AdfeConfig::for_rate(rate), rng);
    const auto len = static_cast<std::size_t>(20 * rate);
    Tensor y = adfe.forward(t, testkit::random_tensor(rng, {2, 2, len}, 0, 1), Mode::eval);
    EXPECT_EQ(y.shape(), (ad::Shape{2, 2, 80}));
  }
}

TEST(Adfe, ZeroWeightsGiveZero) {
  Rng rng(13);
  models::Adfe adfe(models::AdfeConfig::for_rate(100), rng);
  for (auto& s : adfe.stages) {
    zero(s.conv.weight);
    zero(s.conv.bias);
  }
  Tape t = Tape::inference();
  for (Mode m : {Mode::eval, Mode::train}) {
    Tensor y = adfe.forward(t, testkit::random_tensor(rng, {2, 2, 2000}), m);
    for (double v : y.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Adfe, IndivisibleLengthReportsPadding) {
  Rng rng(14);
  models::Adfe adfe(models::AdfeConfig::for_rate(100), rng);
  Tape t;
  try {
    adfe.forward(t, Tensor({1, 2, 1990}), Mode::eval);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("pad"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("10"), std::string::npos) << e.what();
  }
}

TEST(Adfe, ClassifierTakesRawRateWindows) {
  Rng rng(15);
  models::Classifier m(spec(Architecture::lstm_resnet, 3, FrontEnd::adfe, 100), 1);
  EXPECT_EQ(m.spec().input_length(), 2000u);
  Tape t = Tape::inference();
  EXPECT_LT(max_row_sum_error(m.forward(t, testkit::random_tensor(rng, {2, 2, 2000}, 0, 1), Mode::eval)), 1e-9);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  Rng rng(16);
  for (auto fe : {FrontEnd::standard, FrontEnd::adfe}) {
    models::Classifier m(spec(Architecture::lstm_resnet, 3, fe, 100), 21);
    Tensor x = testkit::random_tensor(rng, {4, 2, m.spec().input_length()}, 0, 1);
    {
      Tape t = Tape::inference();
      m.forward(t, x, Mode::train);  // move the running statistics off their defaults
    }
    Tape t = Tape::inference();
    const Vec before = vals(m.forward(t, x, Mode::eval));
    const auto ck = models::Checkpoint::capture(m, {7, 8, 9}, {100, 200, 300}, "demo");
    const std::string bytes = ck.serialize();
    const auto back = models::Checkpoint::deserialize(bytes);
    EXPECT_EQ(back.serialize(), bytes);
    EXPECT_EQ(back.labels, (std::vector<std::int64_t>{7, 8, 9}));
    EXPECT_EQ(back.model_id, "demo");
    auto restored = back.restore();
    EXPECT_EQ(vals(restored.forward(t, x, Mode::eval)), before);
  }
}

TEST(Checkpoint, FileRoundTripAndErrors) {
  models::Classifier m(spec(Architecture::lstm, 2), 1);
  const auto ck = models::Checkpoint::capture(m, {1, 2}, {20, 20});
  const auto path = std::filesystem::temp_directory_path() / "pedalid_ck_test.pdc";
  ck.save(path);
  EXPECT_EQ(models::Checkpoint::load(path).serialize(), ck.serialize());
  std::filesystem::remove(path);

  EXPECT_THROW(models::Checkpoint::deserialize("garbage"), DataError);
  std::string bytes = ck.serialize();
  EXPECT_THROW(models::Checkpoint::deserialize(bytes.substr(0, bytes.size() - 8)), DataError);
  auto bad = ck;
  bad.entries.pop_back();
  EXPECT_THROW(bad.restore(), DataError);
  bad = ck;
  bad.entries[0].shape = {1};
  EXPECT_THROW(bad.restore(), DataError);
  EXPECT_THROW(models::Checkpoint::load("/nonexistent/ck.pdc"), DataError);
}

TEST(Config, ParseNames) {
  EXPECT_EQ(models::parse_architecture("lstm-resnet"), Architecture::lstm_resnet);
  EXPECT_EQ(models::parse_front_end("adfe"), FrontEnd::adfe);
  EXPECT_THROW(models::parse_architecture("gru"), std::invalid_argument);
  EXPECT_THROW(models::Classifier(spec(Architecture::lstm, 1)), std::invalid_argument);
}

}  // namespace
