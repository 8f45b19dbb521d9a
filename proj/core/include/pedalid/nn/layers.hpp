#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pedalid/autodiff/ops.hpp"
#include "pedalid/autodiff/tape.hpp"
#include "pedalid/autodiff/tensor.hpp"
#include "pedalid/util/random.hpp"

namespace pedalid::nn {

using ad::Tape;
using ad::Tensor;

enum class Mode { train, eval };

/// A learned tensor with its dotted registry name, e.g. "resnet.block0.conv1.weight".
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Non-learned state that still belongs in a checkpoint (BN running statistics).
struct NamedBuffer {
  std::string name;
  std::vector<double>* values;
};

/// Parameters and buffers collected by walking a layer tree.
struct Registry {
  std::vector<NamedTensor> parameters;
  std::vector<NamedBuffer> buffers;

  void add(std::string name, const Tensor& t) { parameters.push_back({std::move(name), t}); }
  void add_buffer(std::string name, std::vector<double>& v) {
    buffers.push_back({std::move(name), &v});
  }
  std::size_t parameter_count() const;
};

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng,
         ad::ops::Conv1dOptions options = {});
  /// Same-length output for odd kernels: stride 1, pad kernel/2.
  static Conv1d same(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                     Rng& rng);

  Tensor forward(Tape& tape, const Tensor& x) const;
  void collect(const std::string& prefix, Registry& reg);

  Tensor weight;  // [Cout, Cin, K]
  Tensor bias;    // [Cout]
  ad::ops::Conv1dOptions options;
};

/// Batch normalization over axis 1 of [B,C] or [B,C,T] inputs.
class BatchNorm1d {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm1d() = default;
  explicit BatchNorm1d(std::size_t channels);

  /// Train mode normalizes with batch statistics and folds them into the
  /// running estimates; eval mode uses the running estimates only.
  Tensor forward(Tape& tape, const Tensor& x, Mode mode);
  void collect(const std::string& prefix, Registry& reg);

  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = kEpsilon;
  double momentum = kMomentum;
};

class PRelu {
 public:
  static constexpr double kInitialSlope = 0.25;

  PRelu() = default;
  explicit PRelu(std::size_t channels);
  Tensor forward(Tape& tape, const Tensor& x) const;
  void collect(const std::string& prefix, Registry& reg);

  Tensor alpha;
};

/// Inverted dropout: survivors are scaled by 1/(1-p) so eval mode is the identity.
class Dropout {
 public:
  Dropout() = default;
  Dropout(double p, std::uint64_t seed);

  Tensor forward(Tape& tape, const Tensor& x, Mode mode);
  double probability() const noexcept { return p_; }
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  double p_ = 0.0;
  Rng rng_;
};

/// y = x W + b with W stored [in, out].
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, Rng& rng);

  Tensor forward(Tape& tape, const Tensor& x) const;
  void collect(const std::string& prefix, Registry& reg);

  Tensor weight;  // [N, M]
  Tensor bias;    // [M]
};

/// Gate weights of one LSTM layer, gate order (input, forget, cell, output).
struct LstmLayerWeights {
  Tensor w_ih;  // [F, 4H]
  Tensor w_hh;  // [H, 4H]
  Tensor b_ih;  // [4H]
  Tensor b_hh;  // [4H]
};

/// Stacked many-to-one LSTM with dropout between layers.
class Lstm {
 public:
  static constexpr std::size_t kDefaultHidden = 75;

  Lstm() = default;
  Lstm(std::size_t input_features, std::size_t hidden, std::size_t layers, double dropout_p,
       Rng& rng, std::uint64_t dropout_seed);

  /// One cell update of layer `layer`: returns (h, c).
  std::pair<Tensor, Tensor> step(Tape& tape, const Tensor& x_t, const Tensor& h_prev,
                                 const Tensor& c_prev, std::size_t layer) const;

  /// Runs every layer over x [B,F,T] from zero state and returns the last
  /// layer's hidden state at the final step, [B,H].
  Tensor sequence(Tape& tape, const Tensor& x, Mode mode);

  void collect(const std::string& prefix, Registry& reg);
  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t input_features() const noexcept { return input_features_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  LstmLayerWeights& layer(std::size_t i) { return layers_.at(i); }
  Dropout& inter_layer_dropout() { return dropout_; }

 private:
  std::size_t input_features_ = 0;
  std::size_t hidden_ = 0;
  std::vector<LstmLayerWeights> layers_;
  Dropout dropout_;
};

}  // namespace pedalid::nn
