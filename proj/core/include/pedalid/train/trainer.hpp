#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pedalid/data/split.hpp"
#include "pedalid/models/checkpoint.hpp"
#include "pedalid/models/config.hpp"
#include "pedalid/train/adam.hpp"

namespace pedalid::train {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double decay_factor = 0.5;
  std::size_t decay_period = 15;
  AdamConfig adam;
  std::uint64_t seed = 0;
  models::Architecture architecture = models::Architecture::lstm_resnet;
  models::FrontEnd front_end = models::FrontEnd::standard;
  models::ResNetConfig resnet;
  models::LstmClassifierConfig lstm;
  std::string model_id;
  /// Forward pass of the untrained model over the training set before epoch 0.
  bool record_initial_loss = true;

  void validate() const;
};

/// lr0 * decay^floor(epoch / period)
double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean per-observation loss over the epoch
  std::optional<double> val_accuracy;
};

struct TrainResult {
  models::Checkpoint final;
  models::Checkpoint best;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
  std::optional<double> initial_loss;
  std::vector<std::int64_t> labels;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Model spec that `train` builds for a split at the data's sampling rate.
models::ModelSpec spec_for(const TrainConfig& cfg, std::size_t classes, double rate_hz);

/// Seeded minibatch training with Adam and the step schedule. The best
/// checkpoint maximizes validation accuracy when a validation part exists and
/// minimizes training loss otherwise; ties keep the earlier epoch.
/// Throws DataError when fewer than two drivers are present or a validation
/// driver is missing from the training part, and NumericError on a
/// non-finite loss or gradient.
TrainResult train(const data::DatasetSplit& split, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// "epoch,lr,train_loss,val_accuracy" rows; val_accuracy is empty without a
/// validation part.
void write_history(std::ostream& out, const std::vector<EpochRecord>& history);
void save_history(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace pedalid::train
