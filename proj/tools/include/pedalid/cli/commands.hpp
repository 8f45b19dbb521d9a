#pragma once

#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pedalid/cli/run_config.hpp"
#include "pedalid/data/signal.hpp"

namespace pedalid::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericAbort = 3 };

/// Bad or missing command-line input.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutEnv = "PEDALID_OUT";

/// Parses `args` (without the program name), runs the subcommand and maps
/// errors onto exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

void cmd_generate(const RunConfig& cfg, std::ostream& out);
void cmd_train(const RunConfig& cfg, std::ostream& out);
void cmd_eval(const RunConfig& cfg, std::ostream& out);
void cmd_infer(const RunConfig& cfg, std::ostream& out);
void cmd_plot(const RunConfig& cfg, std::ostream& out);

struct PlotSummary {
  std::size_t samples = 0;
  double mean_gas = 0.0;    // kgf
  double mean_brake = 0.0;  // kgf
};

/// Gas (blue) and brake (orange) pressure against time as a standalone SVG
/// document. Means over the plotted range go into the <metadata> element.
std::string render_svg(const data::SignalTrace& trace, double t_start, std::optional<double> t_end,
                       PlotSummary* summary = nullptr);

}  // namespace pedalid::cli
