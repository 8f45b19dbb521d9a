#include "pedalid/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "pedalid/util/error.hpp"

namespace pedalid::nn {
namespace {

namespace ops = ad::ops;

Tensor uniform_parameter(ad::Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor constant_parameter(ad::Shape shape, double value) {
  std::vector<double> v(ad::shape_numel(shape), value);
  return Tensor::parameter(std::move(shape), std::move(v));
}

}  // namespace

std::size_t Registry::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters) n += p.tensor.numel();
  return n;
}

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng,
               ops::Conv1dOptions opts)
    : options(opts) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in_channels * kernel));
  weight = uniform_parameter({out_channels, in_channels, kernel}, bound, rng);
  bias = uniform_parameter({out_channels}, bound, rng);
}

Conv1d Conv1d::same(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                    Rng& rng) {
  if (kernel % 2 == 0) throw ShapeError("same-padding convolution needs an odd kernel");
  return Conv1d(in_channels, out_channels, kernel, rng, {1, kernel / 2});
}

Tensor Conv1d::forward(Tape& tape, const Tensor& x) const {
  return ops::conv1d(tape, x, weight, bias, options);
}

void Conv1d::collect(const std::string& prefix, Registry& reg) {
  reg.add(prefix + ".weight", weight);
  reg.add(prefix + ".bias", bias);
}

BatchNorm1d::BatchNorm1d(std::size_t channels)
    : gamma(constant_parameter({channels}, 1.0)),
      beta(constant_parameter({channels}, 0.0)),
      running_mean(channels, 0.0),
      running_var(channels, 1.0) {}

Tensor BatchNorm1d::forward(Tape& tape, const Tensor& x, Mode mode) {
  if (mode == Mode::eval) {
    return ops::batch_norm_eval(tape, x, gamma, beta, running_mean, running_var, epsilon);
  }
  ops::BatchMoments m;
  Tensor y = ops::batch_norm_train(tape, x, gamma, beta, epsilon, &m);
  const double unbias = static_cast<double>(m.count) / static_cast<double>(m.count - 1);
  for (std::size_t c = 0; c < running_mean.size(); ++c) {
    running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * m.mean[c];
    running_var[c] = (1.0 - momentum) * running_var[c] + momentum * m.variance[c] * unbias;
  }
  return y;
}

void BatchNorm1d::collect(const std::string& prefix, Registry& reg) {
  reg.add(prefix + ".gamma", gamma);
  reg.add(prefix + ".beta", beta);
  reg.add_buffer(prefix + ".running_mean", running_mean);
  reg.add_buffer(prefix + ".running_var", running_var);
}

PRelu::PRelu(std::size_t channels) : alpha(constant_parameter({channels}, kInitialSlope)) {}

Tensor PRelu::forward(Tape& tape, const Tensor& x) const { return ops::prelu(tape, x, alpha); }

void PRelu::collect(const std::string& prefix, Registry& reg) { reg.add(prefix + ".alpha", alpha); }

Dropout::Dropout(double p, std::uint64_t seed) : p_(p), rng_(seed) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout probability must lie in [0,1), got " + std::to_string(p));
  }
}

Tensor Dropout::forward(Tape& tape, const Tensor& x, Mode mode) {
  if (mode == Mode::eval || p_ == 0.0) return x;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p_);
  Tensor mask(x.shape());
  for (double& m : mask.values()) m = u(rng_) < p_ ? 0.0 : keep_scale;
  return ops::mul(tape, x, mask);
}

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in_features));
  weight = uniform_parameter({in_features, out_features}, bound, rng);
  bias = uniform_parameter({out_features}, bound, rng);
}

Tensor Linear::forward(Tape& tape, const Tensor& x) const {
  return ops::add(tape, ops::matmul(tape, x, weight), bias);
}

void Linear::collect(const std::string& prefix, Registry& reg) {
  reg.add(prefix + ".weight", weight);
  reg.add(prefix + ".bias", bias);
}

Lstm::Lstm(std::size_t input_features, std::size_t hidden, std::size_t layers, double dropout_p,
           Rng& rng, std::uint64_t dropout_seed)
    : input_features_(input_features), hidden_(hidden), dropout_(dropout_p, dropout_seed) {
  if (layers == 0 || hidden == 0) throw std::invalid_argument("LSTM needs layers and hidden > 0");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? input_features : hidden;
    LstmLayerWeights w;
    w.w_ih = uniform_parameter({in, 4 * hidden}, bound, rng);
    w.w_hh = uniform_parameter({hidden, 4 * hidden}, bound, rng);
    w.b_ih = constant_parameter({4 * hidden}, 0.0);
    w.b_hh = constant_parameter({4 * hidden}, 0.0);
    for (std::size_t j = hidden; j < 2 * hidden; ++j) w.b_ih.values()[j] = 1.0;  // forget gate
    layers_.push_back(std::move(w));
  }
}

std::pair<Tensor, Tensor> Lstm::step(Tape& tape, const Tensor& x_t, const Tensor& h_prev,
                                     const Tensor& c_prev, std::size_t layer) const {
  const auto& w = layers_.at(layer);
  const std::size_t h = hidden_;
  Tensor gates = ops::add(tape, ops::add(tape, ops::matmul(tape, x_t, w.w_ih), w.b_ih),
                          ops::add(tape, ops::matmul(tape, h_prev, w.w_hh), w.b_hh));
  Tensor i = ops::sigmoid(tape, ops::slice(tape, gates, 0, h));
  Tensor f = ops::sigmoid(tape, ops::slice(tape, gates, h, h));
  Tensor g = ops::tanh(tape, ops::slice(tape, gates, 2 * h, h));
  Tensor o = ops::sigmoid(tape, ops::slice(tape, gates, 3 * h, h));
  Tensor c = ops::add(tape, ops::mul(tape, f, c_prev), ops::mul(tape, i, g));
  Tensor hn = ops::mul(tape, o, ops::tanh(tape, c));
  return {hn, c};
}

Tensor Lstm::sequence(Tape& tape, const Tensor& x, Mode mode) {
  if (x.rank() != 3 || x.dim(1) != input_features_) {
    throw ShapeError("lstm: expected [B," + std::to_string(input_features_) + ",T], got " +
                     ad::shape_to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), steps = x.dim(2);
  if (steps == 0) throw ShapeError("lstm: sequence must have at least one step");
  std::vector<Tensor> h(layers_.size(), Tensor({batch, hidden_}));
  std::vector<Tensor> c(layers_.size(), Tensor({batch, hidden_}));
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor in = ops::time_step(tape, x, t);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (l > 0) in = dropout_.forward(tape, in, mode);
      std::tie(h[l], c[l]) = step(tape, in, h[l], c[l], l);
      in = h[l];
    }
  }
  return h.back();
}

void Lstm::collect(const std::string& prefix, Registry& reg) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    reg.add(p + ".w_ih", layers_[l].w_ih);
    reg.add(p + ".w_hh", layers_[l].w_hh);
    reg.add(p + ".b_ih", layers_[l].b_ih);
    reg.add(p + ".b_hh", layers_[l].b_hh);
  }
}

}  // namespace pedalid::nn
