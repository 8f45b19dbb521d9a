#include "pedalid/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pedalid/util/error.hpp"
#include "pedalid/util/random.hpp"

namespace pedalid::data {

std::map<std::int64_t, std::array<std::size_t, 3>> DatasetSplit::class_counts() const {
  std::map<std::int64_t, std::array<std::size_t, 3>> out;
  for (const auto& w : train) ++out[w.label][0];
  for (const auto& w : validation) ++out[w.label][1];
  for (const auto& w : test) ++out[w.label][2];
  return out;
}

namespace {

// Traces per part for one driver with n traces.
std::array<std::size_t, 3> allocate(std::size_t n, const std::array<double, 3>& f) {
  std::array<std::size_t, 3> count{};
  std::size_t used = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (f[i] > 0) count[i] = 1, ++used;
  }
  const std::size_t rest = n - used;
  std::array<double, 3> quota{};
  std::size_t given = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (f[i] <= 0) continue;
    quota[i] = std::max(0.0, f[i] * static_cast<double>(n) - 1.0);
    const auto whole = static_cast<std::size_t>(std::floor(quota[i]));
    count[i] += whole;
    given += whole;
    quota[i] -= static_cast<double>(whole);
  }
  while (given > rest) {  // quotas can overshoot once the minimum of one is granted
    std::size_t j = 2;
    while (count[j] <= 1) --j;
    --count[j];
    --given;
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return quota[a] > quota[b]; });
  for (std::size_t k = 0; given < rest; k = (k + 1) % 3) {
    if (f[order[k]] <= 0) continue;
    ++count[order[k]];
    ++given;
  }
  return count;
}

}  // namespace

DatasetSplit split(const std::vector<SequenceWindow>& windows, SplitFractions fractions,
                   std::uint64_t seed) {
  const std::array<double, 3> f{fractions.train, fractions.validation, fractions.test};
  for (double x : f) {
    if (x < 0 || !std::isfinite(x)) throw DataError("split fractions must be non-negative");
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    throw DataError("split fractions must sum to 1");
  }
  if (f[0] <= 0) throw DataError("the training fraction must be positive");

  // driver -> trace id -> window indices, both in ascending order
  std::map<std::int64_t, std::map<std::int64_t, std::vector<std::size_t>>> by_driver;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    by_driver[windows[i].label][windows[i].trace_id].push_back(i);
  }
  const std::size_t parts = static_cast<std::size_t>(std::count_if(f.begin(), f.end(), [](double x) { return x > 0; }));
  std::ostringstream problems;
  for (const auto& [driver, traces] : by_driver) {
    if (traces.size() < parts) {
      problems << " driver " << driver << " has " << traces.size() << " trace(s) for " << parts
               << " non-empty parts;";
    }
  }
  if (!problems.str().empty()) throw DataError("cannot split:" + problems.str());

  Rng rng = make_rng(seed, "split");
  DatasetSplit out;
  std::array<std::vector<SequenceWindow>*, 3> dst{&out.train, &out.validation, &out.test};
  for (const auto& [driver, traces] : by_driver) {
    std::vector<std::int64_t> ids;
    for (const auto& kv : traces) ids.push_back(kv.first);
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto count = allocate(ids.size(), f);
    std::size_t next = 0;
    for (std::size_t part = 0; part < 3; ++part) {
      for (std::size_t k = 0; k < count[part]; ++k, ++next) {
        for (std::size_t idx : traces.at(ids[next])) dst[part]->push_back(windows[idx]);
      }
    }
  }
  return out;
}

}  // namespace pedalid::data
