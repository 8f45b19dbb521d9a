#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pedalid/data/split.hpp"
#include "pedalid/train/trainer.hpp"

namespace pedalid::cli {

/// Every setting a command reads. Commands write the effective values back
/// out as JSON; passing that file to --config reproduces the run.
struct RunConfig {
  std::string command;
  std::vector<std::string> dataset;
  std::string profiles;
  std::string checkpoint;
  std::string out = ".";
  std::uint64_t seed = 0;

  // generate
  std::size_t drivers = 10;  // used when no profile file is given
  double overlap = 0.0;
  std::vector<double> duration{300.0};
  double rate_hz = 100.0;
  double trace_seconds = 60.0;

  // train
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double decay_factor = 0.5;
  std::size_t decay_period = 15;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::string model = "lstm-resnet";
  std::string frontend = "standard";
  std::string model_id;
  std::vector<std::size_t> resnet_channels{128, 256, 256, 128};
  std::size_t lstm_hidden = 75;
  std::size_t lstm_layers = 2;
  double train_fraction = 0.8;
  double validation_fraction = 0.0;
  double test_fraction = 0.2;

  // eval / infer
  std::string part = "all";  // all | train | validation | test

  // plot / infer
  std::optional<std::int64_t> trace_id;
  double t_start = 0.0;
  std::optional<double> t_end;

  train::TrainConfig train_config() const;
  data::SplitFractions fractions() const;

  std::string to_json() const;
  /// Throws std::invalid_argument naming the first unknown or mistyped key.
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace pedalid::cli
