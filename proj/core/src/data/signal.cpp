#include "pedalid/data/signal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pedalid::data {

double clamp_pressure(double kgf, double range_max, ClampCounter* counter) {
  if (kgf < 0.0 || kgf > range_max || std::isnan(kgf)) {
    if (counter) ++counter->count;
    return std::isnan(kgf) ? 0.0 : std::clamp(kgf, 0.0, range_max);
  }
  return kgf;
}

int digitize(double kgf, double range_max, ClampCounter* counter) {
  if (!(range_max > 0.0)) {
    throw std::invalid_argument("digitize: range maximum must be positive, got " +
                                std::to_string(range_max));
  }
  const double p = clamp_pressure(kgf, range_max, counter);
  const auto code = static_cast<int>(std::floor(p * kDigitalMax / range_max));
  return std::min(code, kDigitalMax);
}

double undigitize(int code, double range_max) {
  if (!(range_max > 0.0)) {
    throw std::invalid_argument("undigitize: range maximum must be positive");
  }
  code = std::clamp(code, 0, kDigitalMax);
  return std::min(range_max, (code + 0.5) * range_max / kDigitalMax);
}

void clamp_trace(SignalTrace& trace, ClampCounter* counter) {
  for (double& g : trace.gas) g = clamp_pressure(g, kGasMaxKgf, counter);
  for (double& b : trace.brake) b = clamp_pressure(b, kBrakeMaxKgf, counter);
}

}  // namespace pedalid::data
