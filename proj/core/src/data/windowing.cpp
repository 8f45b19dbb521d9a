#include "pedalid/data/windowing.hpp"

#include <cmath>
#include <string>

#include "pedalid/util/error.hpp"

namespace pedalid::data {
namespace {

// Number of samples spanning `seconds` at `rate`, or throws when fractional.
std::size_t whole_samples(double seconds, double rate, const char* what) {
  const double n = seconds * rate;
  const auto r = static_cast<std::size_t>(std::llround(n));
  if (r == 0 || std::abs(n - static_cast<double>(r)) > 1e-9) {
    throw DataError(std::string(what) + ": sampling rate " + std::to_string(rate) +
                    " Hz does not give a whole number of samples per " + std::to_string(seconds) +
                    " s");
  }
  return r;
}

}  // namespace

std::vector<SequenceWindow> window(const SignalTrace& trace, double window_s) {
  if (trace.gas.size() != trace.brake.size()) {
    throw DataError("trace " + std::to_string(trace.trace_id) + ": gas and brake lengths differ");
  }
  const std::size_t len = whole_samples(window_s, trace.rate_hz, "window");
  std::vector<SequenceWindow> out;
  for (std::size_t start = 0; start + len <= trace.samples(); start += len) {
    SequenceWindow w;
    w.label = trace.driver_id;
    w.trace_id = trace.trace_id;
    w.start_s = static_cast<double>(start) / trace.rate_hz;
    w.rate_hz = trace.rate_hz;
    w.length = len;
    w.values.reserve(2 * len);
    w.values.insert(w.values.end(), trace.gas.begin() + static_cast<std::ptrdiff_t>(start),
                    trace.gas.begin() + static_cast<std::ptrdiff_t>(start + len));
    w.values.insert(w.values.end(), trace.brake.begin() + static_cast<std::ptrdiff_t>(start),
                    trace.brake.begin() + static_cast<std::ptrdiff_t>(start + len));
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<SequenceWindow> window_all(std::span<const SignalTrace> traces, double window_s) {
  std::vector<SequenceWindow> out;
  for (const auto& t : traces) {
    auto w = window(t, window_s);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

ad::Tensor standard_sample(const SequenceWindow& w, double grid_s) {
  const std::size_t step = whole_samples(grid_s, w.rate_hz, "standard sampling");
  const std::size_t points = w.length / step;
  if (points * step != w.length) {
    throw DataError("standard sampling: window of " + std::to_string(w.length) +
                    " samples is not a whole number of grid steps");
  }
  ad::Tensor out({2, points});
  auto o = out.values();
  for (std::size_t i = 0; i < points; ++i) {
    o[i] = w.gas(i * step);
    o[points + i] = w.brake(i * step);
  }
  return out;
}

ad::Tensor make_batch(std::span<const SequenceWindow* const> windows,
                      const models::ModelSpec& spec) {
  const std::size_t len = spec.input_length();
  ad::Tensor batch({windows.size(), 2, len});
  auto out = batch.values();
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const SequenceWindow& w = *windows[b];
    const std::size_t raw = static_cast<std::size_t>(std::llround(spec.window_seconds * w.rate_hz));
    if (w.length != raw) {
      throw DataError("window of trace " + std::to_string(w.trace_id) + " has " +
                      std::to_string(w.length) + " samples, expected " + std::to_string(raw));
    }
    double* dst = out.data() + b * 2 * len;
    if (spec.front_end == models::FrontEnd::standard) {
      ad::Tensor s = standard_sample(w, spec.grid_seconds);
      if (s.dim(1) != len) {
        throw DataError("standard sampling produced " + std::to_string(s.dim(1)) +
                        " points, model expects " + std::to_string(len));
      }
      auto sv = s.values();
      for (std::size_t i = 0; i < len; ++i) {
        dst[i] = sv[i] / kGasMaxKgf;
        dst[len + i] = sv[len + i] / kBrakeMaxKgf;
      }
    } else {
      if (std::abs(w.rate_hz - spec.sample_rate_hz) > 1e-9 || w.length != len) {
        throw DataError("ADFE model trained at " + std::to_string(spec.sample_rate_hz) +
                        " Hz cannot consume a " + std::to_string(w.rate_hz) + " Hz window");
      }
      for (std::size_t i = 0; i < len; ++i) {
        dst[i] = w.gas(i) / kGasMaxKgf;
        dst[len + i] = w.brake(i) / kBrakeMaxKgf;
      }
    }
  }
  return batch;
}

ad::Tensor make_batch(std::span<const SequenceWindow> windows, const models::ModelSpec& spec) {
  std::vector<const SequenceWindow*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return make_batch(std::span<const SequenceWindow* const>(ptrs), spec);
}

}  // namespace pedalid::data
