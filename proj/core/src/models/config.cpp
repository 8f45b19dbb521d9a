#include "pedalid/models/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace pedalid::models {

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::lstm:
      return "lstm";
    case Architecture::resnet:
      return "resnet";
    case Architecture::lstm_resnet:
      return "lstm-resnet";
  }
  return "?";
}

std::string_view to_string(FrontEnd f) { return f == FrontEnd::adfe ? "adfe" : "standard"; }

Architecture parse_architecture(std::string_view s) {
  if (s == "lstm") return Architecture::lstm;
  if (s == "resnet") return Architecture::resnet;
  if (s == "lstm-resnet") return Architecture::lstm_resnet;
  throw std::invalid_argument("unknown model '" + std::string(s) +
                              "' (expected lstm, resnet or lstm-resnet)");
}

FrontEnd parse_front_end(std::string_view s) {
  if (s == "standard") return FrontEnd::standard;
  if (s == "adfe") return FrontEnd::adfe;
  throw std::invalid_argument("unknown front-end '" + std::string(s) +
                              "' (expected standard or adfe)");
}

void ResNetConfig::validate() const {
  if (kernels.empty() || channels.empty()) {
    throw std::invalid_argument("resnet: kernel and channel lists must be non-empty");
  }
  for (auto k : kernels) {
    if (k % 2 == 0) throw std::invalid_argument("resnet: kernels must be odd for same padding");
  }
  if (!(dropout >= 0 && dropout < 1)) throw std::invalid_argument("resnet: dropout in [0,1)");
}

void LstmClassifierConfig::validate() const {
  if (layers == 0 || hidden == 0) throw std::invalid_argument("lstm: layers and hidden must be > 0");
  if (!(inter_layer_dropout >= 0 && inter_layer_dropout < 1) ||
      !(head_dropout >= 0 && head_dropout < 1)) {
    throw std::invalid_argument("lstm: dropout in [0,1)");
  }
}

void CombinedConfig::validate() const {
  resnet.validate();
  lstm.validate();
  if (fusion_width == 0) throw std::invalid_argument("fusion width must be > 0");
}

AdfeConfig AdfeConfig::for_rate(double rate_hz) {
  const double per_grid = rate_hz * 0.25;
  const auto n = static_cast<std::size_t>(std::llround(per_grid));
  if (n == 0 || std::abs(per_grid - static_cast<double>(n)) > 1e-9) {
    throw std::invalid_argument("ADFE needs a sampling rate divisible by 4 Hz, got " +
                                std::to_string(rate_hz));
  }
  std::array<std::size_t, 3> strides{n, 1, 1};
  if (n % 25 == 0) {
    strides = {5, 5, n / 25};
  } else if (n % 5 == 0) {
    strides = {5, n / 5, 1};
  }
  const std::array<std::size_t, 3> kernels{25, 11, 11};
  const std::array<std::size_t, 3> widths{8, 8, 2};
  AdfeConfig cfg;
  for (std::size_t i = 0; i < 3; ++i) {
    cfg.stages.push_back({std::max(kernels[i], strides[i]), strides[i], widths[i]});
  }
  return cfg;
}

std::size_t AdfeConfig::total_stride() const {
  std::size_t s = 1;
  for (const auto& st : stages) s *= st.stride;
  return s;
}

void AdfeConfig::validate() const {
  if (stages.empty()) throw std::invalid_argument("ADFE needs at least one stage");
  for (const auto& s : stages) {
    if (s.stride == 0 || s.channels == 0 || s.kernel + 1 < s.stride) {
      throw std::invalid_argument("ADFE stage needs stride >= 1, channels >= 1, kernel >= stride - 1");
    }
  }
}

std::size_t ModelSpec::grid_length() const {
  return static_cast<std::size_t>(std::llround(window_seconds / grid_seconds));
}

std::size_t ModelSpec::input_length() const {
  if (front_end == FrontEnd::standard) return grid_length();
  return static_cast<std::size_t>(std::llround(window_seconds * sample_rate_hz));
}

CombinedConfig ModelSpec::combined() const {
  CombinedConfig c{resnet, lstm, fusion_width, fusion_dropout, classes};
  c.resnet.classes = classes;
  c.lstm.classes = classes;
  return c;
}

void ModelSpec::validate() const {
  if (classes < 2) throw std::invalid_argument("a classifier needs at least 2 classes");
  resnet.validate();
  lstm.validate();
  if (front_end == FrontEnd::adfe) {
    adfe.validate();
    if (adfe.total_stride() * grid_length() != input_length()) {
      throw std::invalid_argument("ADFE total stride " + std::to_string(adfe.total_stride()) +
                                  " does not map " + std::to_string(input_length()) +
                                  " raw samples onto " + std::to_string(grid_length()) +
                                  " grid points");
    }
  }
}

}  // namespace pedalid::models
