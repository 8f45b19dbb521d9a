#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pedalid/data/signal.hpp"
#include "pedalid/models/checkpoint.hpp"
#include "pedalid/models/models.hpp"

namespace pedalid::train {

/// Accuracy, per-class error and their mean for one evaluation run.
struct MetricsReport {
  std::string model_id;
  std::vector<std::int64_t> labels;                // driver id per class index
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::size_t> counts;                 // samples per true class
  std::vector<std::optional<double>> pce;          // misclassified / count; empty when count == 0
  std::vector<double> train_seconds;               // optional, per class
  double accuracy = 0.0;
  double mpce = 0.0;  // mean PCE over classes with samples
  std::size_t total = 0;
  std::size_t correct = 0;

  /// Classes without test samples; excluded from the MPCE.
  std::vector<std::int64_t> absent_classes() const;

  /// Builds every derived field from a confusion matrix.
  static MetricsReport from_confusion(std::vector<std::vector<std::size_t>> confusion,
                                      std::vector<std::int64_t> labels);
};

/// "79.49 %" style rendering of a fraction.
std::string format_percent(double fraction);

/// Text table (accuracy/MPCE row, per-driver PCE against training seconds)
/// followed by a key=value block.
std::string format_report(const MetricsReport& report);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> row);

/// Eval-mode forward over every window in batches. Throws DataError on an
/// empty window list, an unknown label or a window shape the model cannot take.
MetricsReport evaluate(models::Classifier& model, std::span<const data::SequenceWindow> windows,
                       std::span<const std::int64_t> labels);
MetricsReport evaluate(const models::Checkpoint& checkpoint,
                       std::span<const data::SequenceWindow> windows);

/// Class probabilities of each window, [N][K], eval mode.
std::vector<std::vector<double>> predict_proba(models::Classifier& model,
                                               std::span<const data::SequenceWindow> windows);

}  // namespace pedalid::train
