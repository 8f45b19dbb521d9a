#include "pedalid/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <type_traits>

#include "pedalid/util/error.hpp"
#include "pedalid/util/random.hpp"

namespace pedalid::data {
namespace {

enum State : std::size_t { kAccelerate = 0, kCoast = 1, kBrake = 2 };

constexpr double kMinDwell = 0.5;
constexpr double kGasCeiling = 28.0;
constexpr double kBrakeCeiling = 48.0;

SignalTrace simulate(const DriverProfile& p, std::size_t samples, double rate, Rng& rng) {
  SignalTrace tr;
  tr.driver_id = p.driver_id;
  tr.rate_hz = rate;
  tr.gas.resize(samples);
  tr.brake.resize(samples);

  const double dt = 1.0 / rate;
  const double gas_gain = 1.0 - std::exp(-dt * 2.0 * std::numbers::pi * p.smoothness);
  const double brake_gain = 1.0 - std::exp(-dt / p.brake_sharpness);
  std::discrete_distribution<std::size_t> next_state(p.transition_bias.begin(),
                                                     p.transition_bias.end());
  std::exponential_distribution<double> dwell(1.0 / p.cadence);
  std::uniform_real_distribution<double> spread(0.6, 1.4);
  std::normal_distribution<double> noise(0.0, p.noise);

  double gas_env = 0, brake_env = 0, gas_target = 0, brake_target = 0, remaining = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    if (remaining <= 0) {
      const std::size_t s = next_state(rng);
      remaining = std::max(kMinDwell, dwell(rng));
      gas_target = s == kAccelerate ? std::min(kGasCeiling, p.aggression * spread(rng)) : 0.0;
      brake_target =
          s == kBrake ? std::min(kBrakeCeiling, (6.0 + 0.9 * p.aggression) * spread(rng)) : 0.0;
    }
    remaining -= dt;
    gas_env += gas_gain * (gas_target - gas_env);
    brake_env += brake_gain * (brake_target - brake_env);
    const double gas = gas_env * std::exp(-brake_env / 2.0) + noise(rng);
    const double brake = brake_env + noise(rng);
    tr.gas[i] = std::clamp(gas, 0.0, kGasMaxKgf);
    tr.brake[i] = std::clamp(brake, 0.0, kBrakeMaxKgf);
  }
  return tr;
}

double parse_double(const std::string& v, const std::string& key, std::size_t line) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw DataError("profiles line " + std::to_string(line) + ": '" + key +
                    "' needs a number, got '" + v + "'");
  }
}

template <typename Int>
Int parse_integer(const std::string& v, const std::string& key, std::size_t line) {
  try {
    std::size_t used = 0;
    Int r;
    if constexpr (std::is_signed_v<Int>) {
      r = static_cast<Int>(std::stoll(v, &used));
    } else {
      if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
      r = static_cast<Int>(std::stoull(v, &used));
    }
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw DataError("profiles line " + std::to_string(line) + ": '" + key +
                    "' needs an integer, got '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void DriverProfile::validate() const {
  auto bad = [&](const char* what) {
    throw DataError("profile of driver " + std::to_string(driver_id) + ": " + what);
  };
  if (!(aggression > 0 && aggression <= kGasMaxKgf)) bad("aggression must lie in (0, 30] kgf");
  if (!(brake_sharpness > 0)) bad("brake_sharpness must be positive");
  if (!(cadence > 0)) bad("cadence must be positive");
  if (!(smoothness > 0)) bad("smoothness must be positive");
  if (!(noise >= 0)) bad("noise must be non-negative");
  double total = 0;
  for (double w : transition_bias) {
    if (!(w >= 0)) bad("transition weights must be non-negative");
    total += w;
  }
  if (!(total > 0)) bad("transition weights must not all be zero");
}

std::vector<SignalTrace> synth_generate(const std::vector<DriverProfile>& profiles,
                                        const std::vector<double>& durations_s,
                                        const SynthOptions& options) {
  if (durations_s.size() != profiles.size()) {
    throw std::invalid_argument("synth_generate: one duration per profile required");
  }
  if (!(options.rate_hz > 0) || !(options.trace_seconds > 0)) {
    throw std::invalid_argument("synth_generate: rate and trace length must be positive");
  }
  std::vector<SignalTrace> out;
  for (std::size_t d = 0; d < profiles.size(); ++d) {
    const auto& p = profiles[d];
    p.validate();
    if (durations_s[d] < 20.0) {
      throw std::invalid_argument("synth_generate: duration must be at least 20 s");
    }
    const auto total = static_cast<std::size_t>(std::llround(durations_s[d] * options.rate_hz));
    const auto per_trace =
        static_cast<std::size_t>(std::llround(options.trace_seconds * options.rate_hz));
    std::size_t done = 0;
    for (std::int64_t k = 0; done < total; ++k) {
      const std::size_t n = std::min(per_trace, total - done);
      Rng rng = make_rng(p.seed, "trace-" + std::to_string(k));
      SignalTrace tr = simulate(p, n, options.rate_hz, rng);
      tr.trace_id = p.driver_id * 10000 + k;
      out.push_back(std::move(tr));
      done += n;
    }
  }
  return out;
}

std::vector<SignalTrace> synth_generate(const std::vector<DriverProfile>& profiles,
                                        double duration_s, const SynthOptions& options) {
  return synth_generate(profiles, std::vector<double>(profiles.size(), duration_s), options);
}

std::vector<DriverProfile> parse_profiles(const std::string& text) {
  std::vector<DriverProfile> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  bool have_id = false;
  auto finish = [&] {
    if (!out.empty() && !have_id) {
      throw DataError("profiles: section ending before line " + std::to_string(line) +
                      " has no driver_id");
    }
  };
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw DataError("profiles line " + std::to_string(line) + ": bad section header");
      finish();
      out.emplace_back();
      have_id = false;
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw DataError("profiles line " + std::to_string(line) + ": expected key = value");
    }
    if (out.empty()) {
      throw DataError("profiles line " + std::to_string(line) + ": key outside a [section]");
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    DriverProfile& p = out.back();
    if (key == "driver_id") {
      p.driver_id = parse_integer<std::int64_t>(val, key, line);
      have_id = true;
    } else if (key == "aggression") {
      p.aggression = parse_double(val, key, line);
    } else if (key == "brake_sharpness") {
      p.brake_sharpness = parse_double(val, key, line);
    } else if (key == "cadence") {
      p.cadence = parse_double(val, key, line);
    } else if (key == "smoothness") {
      p.smoothness = parse_double(val, key, line);
    } else if (key == "noise") {
      p.noise = parse_double(val, key, line);
    } else if (key == "bias_accelerate") {
      p.transition_bias[0] = parse_double(val, key, line);
    } else if (key == "bias_coast") {
      p.transition_bias[1] = parse_double(val, key, line);
    } else if (key == "bias_brake") {
      p.transition_bias[2] = parse_double(val, key, line);
    } else if (key == "seed") {
      p.seed = parse_integer<std::uint64_t>(val, key, line);
    } else {
      throw DataError("profiles line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  finish();
  if (out.empty()) throw DataError("profiles: no [section] found");
  for (const auto& p : out) p.validate();
  return out;
}

std::vector<DriverProfile> load_profiles(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open profile file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_profiles(ss.str());
}

std::string format_profiles(const std::vector<DriverProfile>& profiles) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& p : profiles) {
    os << "[driver " << p.driver_id << "]\n"
       << "driver_id = " << p.driver_id << "\n"
       << "aggression = " << p.aggression << "\n"
       << "brake_sharpness = " << p.brake_sharpness << "\n"
       << "cadence = " << p.cadence << "\n"
       << "smoothness = " << p.smoothness << "\n"
       << "noise = " << p.noise << "\n"
       << "bias_accelerate = " << p.transition_bias[0] << "\n"
       << "bias_coast = " << p.transition_bias[1] << "\n"
       << "bias_brake = " << p.transition_bias[2] << "\n"
       << "seed = " << p.seed << "\n\n";
  }
  return os.str();
}

std::vector<DriverProfile> make_profiles(std::size_t count, std::uint64_t seed, double overlap) {
  if (!(overlap >= 0 && overlap <= 1)) throw std::invalid_argument("overlap must lie in [0,1]");
  Rng rng = make_rng(seed, "profiles");
  // Each trait takes evenly spaced levels, independently permuted across drivers.
  auto levels = [&](double lo, double hi) {
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double u = count == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(count - 1);
      v[i] = lo + u * (hi - lo);
    }
    std::shuffle(v.begin(), v.end(), rng);
    const double centre = 0.5 * (lo + hi);
    for (double& x : v) x = centre + (1.0 - overlap) * (x - centre);
    return v;
  };
  const auto aggression = levels(5.0, 25.0);
  const auto sharpness = levels(0.15, 1.5);
  const auto cadence = levels(2.0, 9.0);
  const auto smoothness = levels(0.3, 3.0);
  const auto noise = levels(0.05, 0.8);
  const auto accel = levels(0.25, 0.65);
  const auto brake = levels(0.15, 0.45);
  std::vector<DriverProfile> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& p = out[i];
    p.driver_id = static_cast<std::int64_t>(i + 1);
    p.aggression = aggression[i];
    p.brake_sharpness = sharpness[i];
    p.cadence = cadence[i];
    p.smoothness = smoothness[i];
    p.noise = noise[i];
    p.transition_bias = {accel[i], std::max(0.05, 1.0 - accel[i] - brake[i]), brake[i]};
    p.seed = derive_seed(seed, "driver-" + std::to_string(i + 1));
  }
  return out;
}

}  // namespace pedalid::data
