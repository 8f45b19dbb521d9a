#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "pedalid/data/signal.hpp"

namespace pedalid::data {

/// Dataset text format, one sample per row:
///
///   driver_id,trace_id,rate_hz,t_s,gas_kgf,brake_kgf
///
/// Rows are grouped by (driver_id, trace_id) in ascending order and t_s
/// increases by 1/rate_hz (within 1e-9 s) inside a trace.
inline constexpr const char* kDatasetHeader = "driver_id,trace_id,rate_hz,t_s,gas_kgf,brake_kgf";

struct LoadedDataset {
  std::vector<SignalTrace> traces;
  std::size_t clamp_warnings = 0;  // out-of-range pressures pulled into the sensor range
};

/// Throws DataError with the offending line number on a missing column, a
/// non-numeric field, unsorted rows, non-monotonic time or a rate mismatch.
LoadedDataset read_dataset(std::istream& in);
LoadedDataset load_csv(const std::filesystem::path& path);

void write_dataset(std::ostream& out, const std::vector<SignalTrace>& traces);
void save_csv(const std::vector<SignalTrace>& traces, const std::filesystem::path& path);

}  // namespace pedalid::data
