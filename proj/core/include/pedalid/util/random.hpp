#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pedalid {

using Rng = std::mt19937_64;

/// Expands a root seed into an independent stream seed for a named subsystem.
/// Streams with different labels are decorrelated, so adding a consumer never
/// perturbs the others.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

inline Rng make_rng(std::uint64_t root, std::string_view label) {
  return Rng(derive_seed(root, label));
}

}  // namespace pedalid
