#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pedalid/data/signal.hpp"

namespace pedalid::data {

/// Parameters of one synthetic driver.
struct DriverProfile {
  std::int64_t driver_id = 0;
  double aggression = 12.0;      // mean gas amplitude while accelerating, kgf
  double brake_sharpness = 0.5;  // brake rise time constant, s
  double cadence = 4.0;          // mean dwell per driving state, s
  double smoothness = 1.0;       // gas low-pass cutoff, Hz
  double noise = 0.2;            // sensor noise RMS, kgf
  /// Relative weights of entering the accelerate / coast / brake states.
  std::array<double, 3> transition_bias{0.45, 0.30, 0.25};
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthOptions {
  double rate_hz = 100.0;
  /// Recording length per trace; a driver's total duration is cut into
  /// traces of this length, the last one possibly shorter.
  double trace_seconds = 60.0;
};

/// Generates `duration_s` seconds of signal per profile. A seeded three-state
/// (accelerate / coast / brake) Markov chain sets pedal targets; first-order
/// lags shape the envelopes, Gaussian noise is added, gas is damped while the
/// brake is pressed, and both channels are clamped to the sensor ranges.
std::vector<SignalTrace> synth_generate(const std::vector<DriverProfile>& profiles,
                                        double duration_s, const SynthOptions& options = {});

/// Same, with one duration per profile.
std::vector<SignalTrace> synth_generate(const std::vector<DriverProfile>& profiles,
                                        const std::vector<double>& durations_s,
                                        const SynthOptions& options = {});

/// Profile file: INI-style sections, one per driver, with keys driver_id,
/// aggression, brake_sharpness, cadence, smoothness, noise, bias_accelerate,
/// bias_coast, bias_brake, seed. Unknown keys are rejected.
std::vector<DriverProfile> parse_profiles(const std::string& text);
std::vector<DriverProfile> load_profiles(const std::filesystem::path& path);
std::string format_profiles(const std::vector<DriverProfile>& profiles);

/// `count` well-separated profiles, deterministic in `seed`. `overlap` in
/// [0,1] pulls the profiles toward a common centre (1 = identical drivers).
std::vector<DriverProfile> make_profiles(std::size_t count, std::uint64_t seed,
                                         double overlap = 0.0);

}  // namespace pedalid::data
