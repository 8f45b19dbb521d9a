#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pedalid/models/config.hpp"
#include "pedalid/nn/layers.hpp"

namespace pedalid::models {

using ad::Tape;
using ad::Tensor;
using nn::Mode;
using nn::Registry;

/// conv -> batch norm -> PReLU, length preserving.
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng);

  Tensor forward(Tape& tape, const Tensor& x, Mode mode);
  void collect(const std::string& prefix, Registry& reg);

  nn::Conv1d conv;
  nn::BatchNorm1d bn;
  nn::PRelu act;
};

/// Three basic blocks plus an additive shortcut. Channel changes go through a
/// kernel-1 projection with batch norm; the output PReLU is optional so the
/// network's last block can omit it.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(std::size_t in_channels, std::size_t out_channels,
                const std::vector<std::size_t>& kernels, bool output_activation, Rng& rng);

  Tensor forward(Tape& tape, const Tensor& x, Mode mode);
  void collect(const std::string& prefix, Registry& reg);
  bool has_projection() const noexcept { return projection_.has_value(); }

  std::vector<BasicBlock> blocks;

 private:
  struct Projection {
    nn::Conv1d conv;
    nn::BatchNorm1d bn;
  };
  std::optional<Projection> projection_;
  std::optional<nn::PRelu> out_act_;
};

class ResNet {
 public:
  ResNet() = default;
  /// `with_head` adds dropout + linear classification layers.
  ResNet(const ResNetConfig& cfg, bool with_head, Rng& rng, std::uint64_t dropout_seed);

  /// [B,Cin,T] -> pooled features [B, channels.back()]
  Tensor features(Tape& tape, const Tensor& x, Mode mode);
  /// features -> log-probabilities [B,K]
  Tensor head(Tape& tape, const Tensor& features, Mode mode);
  Tensor forward(Tape& tape, const Tensor& x, Mode mode);

  void collect(const std::string& prefix, Registry& reg);
  std::size_t feature_width() const { return cfg_.channels.back(); }

  std::vector<ResidualBlock> blocks;

 private:
  ResNetConfig cfg_;
  bool with_head_ = false;
  nn::Dropout dropout_;
  nn::Linear linear_;
};

class LstmClassifier {
 public:
  LstmClassifier() = default;
  LstmClassifier(const LstmClassifierConfig& cfg, bool with_head, Rng& rng,
                 std::uint64_t dropout_seed);

  /// [B,F,T] -> final hidden state [B,H]
  Tensor features(Tape& tape, const Tensor& x, Mode mode);
  Tensor head(Tape& tape, const Tensor& features, Mode mode);
  Tensor forward(Tape& tape, const Tensor& x, Mode mode);

  void collect(const std::string& prefix, Registry& reg);
  std::size_t feature_width() const { return cfg_.hidden; }
  nn::Lstm& lstm() { return lstm_; }

 private:
  LstmClassifierConfig cfg_;
  bool with_head_ = false;
  nn::Lstm lstm_;
  nn::Dropout dropout_;
  nn::Linear linear_;
};

/// ResNet and LSTM trunks side by side; their features are concatenated and
/// passed through a kernel-1 fusion convolution (an affine 203 -> 64 map on
/// the flat feature vector), batch norm, PReLU, dropout and a linear head.
class LstmResNet {
 public:
  LstmResNet() = default;
  LstmResNet(const CombinedConfig& cfg, Rng& rng, std::uint64_t dropout_seed);

  /// Concatenated trunk features [B, 203].
  Tensor features(Tape& tape, const Tensor& x, Mode mode);
  Tensor head(Tape& tape, const Tensor& features, Mode mode);
  Tensor forward(Tape& tape, const Tensor& x, Mode mode);

  void collect(const std::string& prefix, Registry& reg);
  ResNet& resnet() { return resnet_; }
  LstmClassifier& lstm() { return lstm_; }

 private:
  CombinedConfig cfg_;
  ResNet resnet_;
  LstmClassifier lstm_;
  nn::Linear fusion_;
  nn::BatchNorm1d fusion_bn_;
  nn::PRelu fusion_act_;
  nn::Dropout dropout_;
  nn::Linear linear_;
};

/// Strided conv -> BN -> PReLU stages reducing raw-rate input to the grid.
class Adfe {
 public:
  Adfe() = default;
  Adfe(const AdfeConfig& cfg, Rng& rng);

  /// [B,2,T_raw] -> [B,C_out,T_raw/total_stride]; T_raw must be a multiple of
  /// the total stride.
  Tensor forward(Tape& tape, const Tensor& x, Mode mode);
  void collect(const std::string& prefix, Registry& reg);

  std::vector<BasicBlock> stages;

 private:
  AdfeConfig cfg_;
};

/// Front-end plus architecture: the unit that is trained and checkpointed.
class Classifier {
 public:
  explicit Classifier(const ModelSpec& spec, std::uint64_t seed = 0);

  Classifier(const Classifier&) = delete;
  Classifier& operator=(const Classifier&) = delete;
  Classifier(Classifier&&) = default;
  Classifier& operator=(Classifier&&) = default;

  /// [B,2,input_length] -> log-probabilities [B,K]
  Tensor forward(Tape& tape, const Tensor& x, Mode mode);
  /// Trunk features after the front-end, before any head layer.
  Tensor features(Tape& tape, const Tensor& x, Mode mode);
  Tensor head(Tape& tape, const Tensor& features, Mode mode);

  /// Parameters and buffers in a fixed order with stable names.
  Registry registry();
  std::size_t parameter_count();
  const ModelSpec& spec() const noexcept { return spec_; }

  std::optional<Adfe> adfe;
  std::optional<ResNet> resnet;
  std::optional<LstmClassifier> lstm;
  std::optional<LstmResNet> combined;

 private:
  Tensor front(Tape& tape, const Tensor& x, Mode mode);
  ModelSpec spec_;
};

}  // namespace pedalid::models
