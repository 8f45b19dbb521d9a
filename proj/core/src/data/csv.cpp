#include "pedalid/data/csv.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pedalid/util/error.hpp"

namespace pedalid::data {
namespace {

constexpr std::array<std::string_view, 6> kColumns{"driver_id", "trace_id", "rate_hz",
                                                   "t_s",       "gas_kgf",  "brake_kgf"};
constexpr double kTimeTolerance = 1e-9;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw DataError("dataset line " + std::to_string(line) + ": " + msg);
}

template <typename T>
T parse_field(std::string_view s, std::string_view column, std::size_t line) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    fail(line, "cannot parse " + std::string(column) + " value '" + std::string(s) + "'");
  }
  return v;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

LoadedDataset read_dataset(std::istream& in) {
  std::string text;
  std::size_t line = 1;
  if (!std::getline(in, text)) fail(line, "empty file, expected header '" + std::string(kDatasetHeader) + "'");
  if (!text.empty() && text.back() == '\r') text.pop_back();
  const auto header = split_fields(text);
  std::array<std::size_t, 6> col{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    std::optional<std::size_t> found;
    for (std::size_t h = 0; h < header.size(); ++h) {
      if (header[h] == kColumns[c]) found = h;
    }
    if (!found) fail(line, "missing column \"" + std::string(kColumns[c]) + "\"");
    col[c] = *found;
  }

  LoadedDataset out;
  ClampCounter clamps;
  SignalTrace* cur = nullptr;
  double last_t = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto f = split_fields(text);
    if (f.size() != header.size()) {
      fail(line, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    }
    const auto driver = parse_field<std::int64_t>(f[col[0]], kColumns[0], line);
    const auto trace = parse_field<std::int64_t>(f[col[1]], kColumns[1], line);
    const auto rate = parse_field<double>(f[col[2]], kColumns[2], line);
    const auto t = parse_field<double>(f[col[3]], kColumns[3], line);
    const auto gas = parse_field<double>(f[col[4]], kColumns[4], line);
    const auto brake = parse_field<double>(f[col[5]], kColumns[5], line);
    if (!(rate > 0)) fail(line, "rate_hz must be positive");

    if (!cur || cur->trace_id != trace || cur->driver_id != driver) {
      if (cur && (driver < cur->driver_id || (driver == cur->driver_id && trace <= cur->trace_id))) {
        fail(line, "rows not sorted by (driver_id, trace_id) or trace " + std::to_string(trace) +
                       " split across the file");
      }
      out.traces.push_back(SignalTrace{driver, trace, rate, {}, {}});
      cur = &out.traces.back();
    } else {
      if (rate != cur->rate_hz) {
        fail(line, "rate mismatch within trace " + std::to_string(trace) + ": " +
                       std::to_string(rate) + " vs " + std::to_string(cur->rate_hz));
      }
      if (!(t > last_t)) fail(line, "time is not strictly increasing");
      if (std::abs((t - last_t) - 1.0 / rate) > kTimeTolerance) {
        fail(line, "time step does not match 1/rate_hz");
      }
    }
    last_t = t;
    cur->gas.push_back(clamp_pressure(gas, kGasMaxKgf, &clamps));
    cur->brake.push_back(clamp_pressure(brake, kBrakeMaxKgf, &clamps));
  }
  out.clamp_warnings = clamps.count;
  return out;
}

LoadedDataset load_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open dataset " + path.string());
  return read_dataset(f);
}

void write_dataset(std::ostream& out, const std::vector<SignalTrace>& traces) {
  out << kDatasetHeader << '\n';
  std::vector<const SignalTrace*> order;
  for (const auto& tr : traces) order.push_back(&tr);
  std::stable_sort(order.begin(), order.end(), [](const SignalTrace* a, const SignalTrace* b) {
    return std::pair(a->driver_id, a->trace_id) < std::pair(b->driver_id, b->trace_id);
  });
  std::string row;
  for (const SignalTrace* trp : order) {
    const SignalTrace& tr = *trp;
    if (tr.gas.size() != tr.brake.size()) {
      throw DataError("trace " + std::to_string(tr.trace_id) + ": gas and brake lengths differ");
    }
    const std::string prefix = std::to_string(tr.driver_id) + ',' + std::to_string(tr.trace_id) + ',';
    std::string rate;
    append_double(rate, tr.rate_hz);
    for (std::size_t i = 0; i < tr.samples(); ++i) {
      row = prefix;
      row += rate;
      row += ',';
      append_double(row, static_cast<double>(i) / tr.rate_hz);
      row += ',';
      append_double(row, tr.gas[i]);
      row += ',';
      append_double(row, tr.brake[i]);
      row += '\n';
      out << row;
    }
  }
}

void save_csv(const std::vector<SignalTrace>& traces, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write dataset " + path.string());
  write_dataset(f, traces);
  if (!f) throw DataError("failed writing dataset " + path.string());
}

}  // namespace pedalid::data
