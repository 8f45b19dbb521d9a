#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "pedalid/data/signal.hpp"

namespace pedalid::data {

struct SplitFractions {
  double train = 1.0;
  double validation = 0.0;
  double test = 0.0;
};

struct DatasetSplit {
  std::vector<SequenceWindow> train;
  std::vector<SequenceWindow> validation;
  std::vector<SequenceWindow> test;

  /// Windows per driver id in each part.
  std::map<std::int64_t, std::array<std::size_t, 3>> class_counts() const;
};

/// Trace-level stratified split: all windows of one trace land in the same
/// part, and each driver's traces are divided by the fractions (largest
/// remainder, at least one trace for every non-zero fraction). Deterministic
/// for a given seed. Throws DataError naming every driver that has too few
/// traces for the requested parts.
DatasetSplit split(const std::vector<SequenceWindow>& windows, SplitFractions fractions,
                   std::uint64_t seed);

}  // namespace pedalid::data
