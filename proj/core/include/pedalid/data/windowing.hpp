#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pedalid/autodiff/tensor.hpp"
#include "pedalid/data/signal.hpp"
#include "pedalid/models/config.hpp"

namespace pedalid::data {

inline constexpr double kWindowSeconds = 20.0;
inline constexpr double kGridSeconds = 0.25;

/// Consecutive non-overlapping windows from t = 0; a trailing remainder
/// shorter than one window is dropped.
std::vector<SequenceWindow> window(const SignalTrace& trace, double window_s = kWindowSeconds);

std::vector<SequenceWindow> window_all(std::span<const SignalTrace> traces,
                                       double window_s = kWindowSeconds);

/// Picks the raw sample at t = 0, grid, 2*grid, ... (no interpolation).
/// Returns [2, window/grid] in kgf. Throws DataError when rate * grid is not
/// a whole number of samples.
ad::Tensor standard_sample(const SequenceWindow& w, double grid_s = kGridSeconds);

/// Builds a [B, 2, input_length] batch for the model's front-end. Gas is
/// divided by 30 kgf and brake by 50 kgf so both channels lie in [0, 1].
/// Throws DataError on window length or sampling-rate mismatch.
ad::Tensor make_batch(std::span<const SequenceWindow* const> windows, const models::ModelSpec& spec);
ad::Tensor make_batch(std::span<const SequenceWindow> windows, const models::ModelSpec& spec);

}  // namespace pedalid::data
