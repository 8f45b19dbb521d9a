#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pedalid::data {

/// Sensor ranges of the pedal channels, in kilogram-force.
inline constexpr double kBrakeMaxKgf = 50.0;
inline constexpr double kGasMaxKgf = 30.0;
/// Full-scale code of the 16-bit pedal digitizer.
inline constexpr int kDigitalMax = 32767;

/// Two-channel pedal-pressure recording of one drive.
struct SignalTrace {
  std::int64_t driver_id = 0;
  std::int64_t trace_id = 0;
  double rate_hz = 100.0;
  std::vector<double> gas;    // kgf
  std::vector<double> brake;  // kgf

  std::size_t samples() const noexcept { return gas.size(); }
  double duration_s() const noexcept { return static_cast<double>(gas.size()) / rate_hz; }
};

/// One fixed-length slice of a trace. Channel 0 is gas, channel 1 is brake.
struct SequenceWindow {
  std::int64_t label = 0;  // driver id
  std::int64_t trace_id = 0;
  double start_s = 0.0;
  double rate_hz = 100.0;
  std::size_t length = 0;      // samples per channel
  std::vector<double> values;  // [2, length], row-major

  double gas(std::size_t i) const { return values[i]; }
  double brake(std::size_t i) const { return values[length + i]; }
};

/// Counts values pulled back into range during ingestion.
struct ClampCounter {
  std::size_t count = 0;
};

/// Clamps to [0, range_max] and counts the clamp in `counter` when given.
double clamp_pressure(double kgf, double range_max, ClampCounter* counter = nullptr);

/// floor(p / range_max * 32767) after clamping p into [0, range_max].
/// Throws std::invalid_argument when range_max <= 0.
int digitize(double kgf, double range_max, ClampCounter* counter = nullptr);

/// Midpoint of the kgf interval that maps onto `code`, capped at range_max.
double undigitize(int code, double range_max);

/// Clamps both channels of a trace to the sensor ranges.
void clamp_trace(SignalTrace& trace, ClampCounter* counter = nullptr);

}  // namespace pedalid::data
