#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pedalid/autodiff/tensor.hpp"
#include "pedalid/models/config.hpp"
#include "pedalid/models/models.hpp"

namespace pedalid::models {

/// Serialized classifier: spec, class labels, every learned tensor and every
/// batch-norm running statistic.
///
/// File layout (all integers little-endian):
///   8 bytes  magic "PEDALIDC"
///   u32      format version
///   u64      header length in bytes
///   header   UTF-8 JSON: spec, labels, tensor directory (name, kind, shape, offset)
///   payload  IEEE-754 binary64 values, little-endian, in directory order
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  struct Entry {
    std::string name;
    bool buffer = false;  // running statistic rather than learned parameter
    ad::Shape shape;
    std::vector<double> values;
  };

  ModelSpec spec;
  std::string model_id;              // free-form identifier carried into reports
  std::vector<std::int64_t> labels;  // driver id of each class index
  std::vector<double> train_seconds; // training data per class, for reports
  std::vector<Entry> entries;

  /// Snapshot of a live classifier.
  static Checkpoint capture(Classifier& model, std::vector<std::int64_t> labels,
                            std::vector<double> train_seconds, std::string model_id = {});
  /// Fresh classifier carrying the stored values; throws DataError when the
  /// stored tensors do not match the spec's architecture.
  Classifier restore() const;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace pedalid::models
