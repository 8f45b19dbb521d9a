#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace pedalid::models {

enum class Architecture { lstm, resnet, lstm_resnet };
enum class FrontEnd { standard, adfe };

std::string_view to_string(Architecture a);
std::string_view to_string(FrontEnd f);
Architecture parse_architecture(std::string_view s);
FrontEnd parse_front_end(std::string_view s);

struct ResNetConfig {
  std::size_t input_channels = 2;
  std::vector<std::size_t> kernels{7, 5, 3};            // convolutions inside each residual block
  std::vector<std::size_t> channels{128, 256, 256, 128};  // one residual block per entry
  double dropout = 0.2;
  std::size_t classes = 0;

  void validate() const;
};

struct LstmClassifierConfig {
  std::size_t input_channels = 2;
  std::size_t layers = 2;
  std::size_t hidden = 75;
  double inter_layer_dropout = 0.2;
  double head_dropout = 0.2;
  std::size_t classes = 0;

  void validate() const;
};

/// Both trunks without their dropout/softmax heads, fused by a 203->64 map.
struct CombinedConfig {
  ResNetConfig resnet;
  LstmClassifierConfig lstm;
  std::size_t fusion_width = 64;
  double fusion_dropout = 0.2;
  std::size_t classes = 0;

  std::size_t fusion_inputs() const { return resnet.channels.back() + lstm.hidden; }
  void validate() const;
};

struct AdfeStage {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t channels = 1;
};

/// Learned strided-convolution front-end mapping a raw-rate window onto the
/// 0.25 s grid.
struct AdfeConfig {
  std::size_t input_channels = 2;
  std::vector<AdfeStage> stages;

  /// Three stages with kernels {25,11,11}; strides {5,5,10} at 1 kHz and
  /// {5,5,1} at 100 Hz. Other rates use strides factoring rate / 4.
  static AdfeConfig for_rate(double rate_hz);

  std::size_t total_stride() const;
  std::size_t output_channels() const { return stages.empty() ? input_channels : stages.back().channels; }
  /// Zero padding of a stage so that its output length is input / stride.
  static std::size_t stage_padding(const AdfeStage& s) { return (s.kernel + 1 - s.stride) / 2; }
  void validate() const;
};

/// Everything needed to rebuild a classifier: architecture, front-end, sizes.
struct ModelSpec {
  Architecture architecture = Architecture::lstm_resnet;
  FrontEnd front_end = FrontEnd::standard;
  std::size_t classes = 0;
  double sample_rate_hz = 100.0;  // raw rate; only ADFE consumes it directly
  double window_seconds = 20.0;
  double grid_seconds = 0.25;
  ResNetConfig resnet;
  LstmClassifierConfig lstm;
  std::size_t fusion_width = 64;
  double fusion_dropout = 0.2;
  AdfeConfig adfe;

  /// Time extent of the model input: grid points for standard sampling,
  /// raw samples for ADFE.
  std::size_t input_length() const;
  std::size_t grid_length() const;
  CombinedConfig combined() const;
  void validate() const;
};

}  // namespace pedalid::models
