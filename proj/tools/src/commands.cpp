#include "pedalid/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "pedalid/data/csv.hpp"
#include "pedalid/data/split.hpp"
#include "pedalid/data/synth.hpp"
#include "pedalid/data/windowing.hpp"
#include "pedalid/models/checkpoint.hpp"
#include "pedalid/train/metrics.hpp"
#include "pedalid/train/trainer.hpp"
#include "pedalid/util/error.hpp"

namespace pedalid::cli {
namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text)) throw DataError("cannot write " + path.string());
}

void echo_config(const RunConfig& cfg) {
  write_text(out_dir(cfg) / (cfg.command + "_config.json"), cfg.to_json());
}

std::vector<data::SignalTrace> load_traces(const RunConfig& cfg, std::ostream& out) {
  if (cfg.dataset.empty()) throw UsageError(cfg.command + ": --dataset is required");
  std::vector<data::SignalTrace> traces;
  for (const auto& path : cfg.dataset) {
    auto loaded = data::load_csv(path);
    if (loaded.clamp_warnings) {
      out << "warning: " << loaded.clamp_warnings << " samples in " << path
          << " were clamped to the sensor range\n";
    }
    for (auto& t : loaded.traces) traces.push_back(std::move(t));
  }
  return traces;
}

std::vector<data::SequenceWindow> select_part(const RunConfig& cfg,
                                              std::vector<data::SequenceWindow> windows) {
  if (cfg.part == "all") return windows;
  auto parts = data::split(windows, cfg.fractions(), cfg.seed);
  if (cfg.part == "train") return std::move(parts.train);
  if (cfg.part == "validation") return std::move(parts.validation);
  if (cfg.part == "test") return std::move(parts.test);
  throw UsageError("--part must be one of all, train, validation, test");
}

}  // namespace

void cmd_generate(const RunConfig& cfg, std::ostream& out) {
  std::vector<data::DriverProfile> profiles =
      cfg.profiles.empty() ? data::make_profiles(cfg.drivers, cfg.seed, cfg.overlap)
                           : data::load_profiles(cfg.profiles);
  std::vector<double> durations = cfg.duration;
  if (durations.size() == 1) durations.assign(profiles.size(), durations.front());
  if (durations.size() != profiles.size()) {
    throw UsageError("--duration takes one value or one per profile (" +
                     std::to_string(profiles.size()) + "), got " + std::to_string(durations.size()));
  }
  data::SynthOptions opts{cfg.rate_hz, cfg.trace_seconds};
  const auto traces = data::synth_generate(profiles, durations, opts);

  const fs::path dir = out_dir(cfg);
  data::save_csv(traces, dir / "dataset.csv");
  write_text(dir / "profiles.ini", data::format_profiles(profiles));
  echo_config(cfg);

  std::map<std::int64_t, double> seconds;
  for (const auto& t : traces) seconds[t.driver_id] += t.duration_s();
  for (const auto& [driver, s] : seconds) {
    out << "driver " << driver << ": " << fmt("%.2f", s) << " s\n";
  }
  out << "wrote " << traces.size() << " traces to " << (dir / "dataset.csv").string() << "\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto tcfg = cfg.train_config();
  const auto traces = load_traces(cfg, out);
  const auto windows = data::window_all(traces);
  if (windows.empty()) throw DataError("dataset holds no complete 20 s window");
  const auto parts = data::split(windows, cfg.fractions(), cfg.seed);
  const fs::path dir = out_dir(cfg);
  echo_config(cfg);

  out << "model " << tcfg.model_id << ": " << parts.train.size() << " train, "
      << parts.validation.size() << " validation, " << parts.test.size() << " test windows\n";
  const auto result = train::train(parts, tcfg, [&](const train::EpochRecord& r) {
    out << "epoch " << r.epoch + 1 << "/" << tcfg.epochs << " lr " << r.lr << " loss "
        << fmt("%.6f", r.train_loss);
    if (r.val_accuracy) out << " val " << train::format_percent(*r.val_accuracy);
    out << "\n" << std::flush;
  });
  result.final.save(dir / "checkpoint_final.pdc");
  result.best.save(dir / "checkpoint_best.pdc");
  train::save_history(result.history, dir / "history.csv");
  out << "best epoch " << result.best_epoch + 1 << "; checkpoints in " << dir.string() << "\n";

  if (!parts.test.empty()) {
    const auto report = train::evaluate(result.best, parts.test);
    const std::string text = train::format_report(report);
    write_text(dir / "report.txt", text);
    out << "\n" << text;
  }
}

void cmd_eval(const RunConfig& cfg, std::ostream& out) {
  if (cfg.checkpoint.empty()) throw UsageError("eval: --checkpoint is required");
  const auto ck = models::Checkpoint::load(cfg.checkpoint);
  const auto traces = load_traces(cfg, out);
  const auto windows = select_part(cfg, data::window_all(traces, ck.spec.window_seconds));
  if (windows.empty()) throw DataError("eval: the selected test set is empty");
  const auto report = train::evaluate(ck, windows);
  const std::string text = train::format_report(report);
  const fs::path dir = out_dir(cfg);
  write_text(dir / "report.txt", text);
  echo_config(cfg);
  out << text;
}

void cmd_infer(const RunConfig& cfg, std::ostream& out) {
  if (cfg.checkpoint.empty()) throw UsageError("infer: --checkpoint is required");
  const auto ck = models::Checkpoint::load(cfg.checkpoint);
  auto traces = load_traces(cfg, out);
  if (cfg.trace_id) {
    std::erase_if(traces, [&](const data::SignalTrace& t) { return t.trace_id != *cfg.trace_id; });
    if (traces.empty()) throw DataError("trace " + std::to_string(*cfg.trace_id) + " not found");
  }
  auto model = ck.restore();

  std::ostringstream csv;
  csv << "trace_id,start_s,predicted";
  for (auto l : ck.labels) csv << ",p_" << l;
  csv << "\n";
  for (const auto& t : traces) {
    const auto windows = data::window(t, ck.spec.window_seconds);
    if (windows.empty()) {
      out << "trace " << t.trace_id << ": no complete window (" << fmt("%.2f", t.duration_s())
          << " s < " << fmt("%g", ck.spec.window_seconds) << " s)\n";
      continue;
    }
    const auto probs = train::predict_proba(model, windows);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto pred = ck.labels[train::argmax(probs[i])];
      out << "trace " << t.trace_id << " t=" << fmt("%g", windows[i].start_s) << " s: driver "
          << pred << " |";
      csv << t.trace_id << ',' << fmt("%g", windows[i].start_s) << ',' << pred;
      for (double p : probs[i]) {
        out << ' ' << fmt("%.6f", p);
        csv << ',' << fmt("%.17g", p);
      }
      out << "\n";
      csv << "\n";
    }
  }
  const fs::path dir = out_dir(cfg);
  write_text(dir / "predictions.csv", csv.str());
  echo_config(cfg);
}

std::string render_svg(const data::SignalTrace& trace, double t_start, std::optional<double> t_end,
                       PlotSummary* summary) {
  const double total = trace.duration_s();
  const double t0 = std::clamp(t_start, 0.0, total);
  const double t1 = std::clamp(t_end.value_or(total), t0, total);
  const auto i0 = static_cast<std::size_t>(std::ceil(t0 * trace.rate_hz - 1e-9));
  const auto i1 = std::min(trace.samples(), static_cast<std::size_t>(std::floor(t1 * trace.rate_hz + 1e-9)) + 1);

  PlotSummary s;
  for (std::size_t i = i0; i < i1; ++i) {
    s.mean_gas += trace.gas[i];
    s.mean_brake += trace.brake[i];
  }
  s.samples = i1 > i0 ? i1 - i0 : 0;
  if (s.samples) {
    s.mean_gas /= static_cast<double>(s.samples);
    s.mean_brake /= static_cast<double>(s.samples);
  }
  if (summary) *summary = s;

  constexpr double W = 960, H = 360, ml = 60, mr = 20, mt = 30, mb = 45;
  constexpr double pw = W - ml - mr, ph = H - mt - mb;
  constexpr double ymax = data::kBrakeMaxKgf;
  const double span = t1 > t0 ? t1 - t0 : 1.0;
  auto X = [&](double t) { return ml + (t - t0) / span * pw; };
  auto Y = [&](double v) { return mt + ph * (1.0 - v / ymax); };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  o << "<metadata>trace_id=" << trace.trace_id << ";driver_id=" << trace.driver_id
    << ";t_start=" << fmt("%.6g", t0) << ";t_end=" << fmt("%.6g", t1) << ";samples=" << s.samples
    << ";mean_gas_kgf=" << fmt("%.6f", s.mean_gas) << ";mean_brake_kgf=" << fmt("%.6f", s.mean_brake)
    << "</metadata>\n";
  o << "<title>trace " << trace.trace_id << " (driver " << trace.driver_id << ")</title>\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  o << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int v = 0; v <= static_cast<int>(ymax); v += 10) {
    o << "<line x1=\"" << ml << "\" x2=\"" << ml + pw << "\" y1=\"" << fmt("%.2f", Y(v))
      << "\" y2=\"" << fmt("%.2f", Y(v)) << "\" stroke=\"#ddd\"/>";
    o << "<text x=\"" << ml - 6 << "\" y=\"" << fmt("%.2f", Y(v) + 4) << "\" text-anchor=\"end\">"
      << v << "</text>\n";
  }
  const double raw = span / 8;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double step = raw / mag < 2 ? 2 * mag : raw / mag < 5 ? 5 * mag : 10 * mag;
  for (double t = std::ceil(t0 / step) * step; t <= t1 + 1e-9; t += step) {
    o << "<text x=\"" << fmt("%.2f", X(t)) << "\" y=\"" << H - mb + 16
      << "\" text-anchor=\"middle\">" << fmt("%g", t) << "</text>\n";
  }
  o << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">time (s)</text>\n";
  o << "<text x=\"14\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << mt + ph / 2 << ")\">pressure (kgf)</text>\n";
  o << "</g>\n";
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#333\"/>\n";

  const std::size_t stride = std::max<std::size_t>(1, s.samples / 4000);
  auto series = [&](const std::vector<double>& v, const char* name, const char* color) {
    o << "<polyline id=\"" << name << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = i0; i < i1; i += stride) {
      const double t = static_cast<double>(i) / trace.rate_hz;
      o << fmt("%.2f", X(t)) << ',' << fmt("%.2f", Y(v[i])) << ' ';
    }
    o << "\"/>\n";
  };
  series(trace.gas, "gas", "#1f77b4");
  series(trace.brake, "brake", "#ff7f0e");

  o << "<g font-family=\"sans-serif\" font-size=\"12\">"
    << "<line x1=\"" << ml + 10 << "\" x2=\"" << ml + 30 << "\" y1=\"18\" y2=\"18\" stroke=\"#1f77b4\" stroke-width=\"2\"/>"
    << "<text x=\"" << ml + 34 << "\" y=\"22\">gas</text>"
    << "<line x1=\"" << ml + 80 << "\" x2=\"" << ml + 100 << "\" y1=\"18\" y2=\"18\" stroke=\"#ff7f0e\" stroke-width=\"2\"/>"
    << "<text x=\"" << ml + 104 << "\" y=\"22\">brake</text></g>\n";
  o << "</svg>\n";
  return o.str();
}

void cmd_plot(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.trace_id) throw UsageError("plot: --trace-id is required");
  const auto traces = load_traces(cfg, out);
  const auto it = std::find_if(traces.begin(), traces.end(),
                               [&](const data::SignalTrace& t) { return t.trace_id == *cfg.trace_id; });
  if (it == traces.end()) throw DataError("trace " + std::to_string(*cfg.trace_id) + " not found");
  PlotSummary s;
  const std::string svg = render_svg(*it, cfg.t_start, cfg.t_end, &s);
  const fs::path path = out_dir(cfg) / ("trace_" + std::to_string(*cfg.trace_id) + ".svg");
  write_text(path, svg);
  echo_config(cfg);
  out << "trace " << *cfg.trace_id << ": " << s.samples << " samples, mean gas "
      << fmt("%.3f", s.mean_gas) << " kgf, mean brake " << fmt("%.3f", s.mean_brake) << " kgf\n"
      << "wrote " << path.string() << "\n";
}

namespace {

std::optional<std::string> find_config_arg(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::int64_t trace_id = 0;
  double t_end = 0;
  std::string config_path;

  CLI::App app{"Driver identification from pedal-pressure signals", "pedalid"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pedalid 0.1.0");

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config from a previous run; flags override it");
    sub->add_option("--out", cfg.out, "Output directory (default $PEDALID_OUT or .)");
    sub->add_option("--seed", cfg.seed, "Root seed");
  };
  auto dataset = [&](CLI::App* sub) {
    sub->add_option("--dataset", cfg.dataset, "Dataset CSV file(s)");
  };
  auto split = [&](CLI::App* sub) {
    sub->add_option("--train-fraction", cfg.train_fraction);
    sub->add_option("--validation-fraction", cfg.validation_fraction);
    sub->add_option("--test-fraction", cfg.test_fraction);
  };

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  common(gen);
  gen->add_option("--profiles", cfg.profiles, "Driver profile file (INI sections)");
  gen->add_option("--drivers", cfg.drivers, "Number of generated profiles without --profiles");
  gen->add_option("--overlap", cfg.overlap, "Pull generated profiles together, 0..1");
  gen->add_option("--duration", cfg.duration, "Seconds per driver: one value or one per profile")
      ->delimiter(',');
  gen->add_option("--rate", cfg.rate_hz, "Sampling rate in Hz");
  gen->add_option("--trace-seconds", cfg.trace_seconds, "Length of each recorded trace");

  auto* trn = app.add_subcommand("train", "Train a classifier");
  common(trn);
  dataset(trn);
  split(trn);
  trn->add_option("--model", cfg.model, "lstm | resnet | lstm-resnet");
  trn->add_option("--frontend", cfg.frontend, "standard | adfe");
  trn->add_option("--model-id", cfg.model_id, "Identifier carried into reports");
  trn->add_option("--epochs", cfg.epochs);
  trn->add_option("--batch-size", cfg.batch_size);
  trn->add_option("--lr", cfg.learning_rate, "Initial learning rate");
  trn->add_option("--decay-factor", cfg.decay_factor);
  trn->add_option("--decay-period", cfg.decay_period, "Epochs between learning-rate decays");
  trn->add_option("--beta1", cfg.beta1);
  trn->add_option("--beta2", cfg.beta2);
  trn->add_option("--adam-epsilon", cfg.adam_epsilon);
  trn->add_option("--resnet-channels", cfg.resnet_channels)->delimiter(',');
  trn->add_option("--lstm-hidden", cfg.lstm_hidden);
  trn->add_option("--lstm-layers", cfg.lstm_layers);

  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint");
  common(evl);
  dataset(evl);
  split(evl);
  evl->add_option("--checkpoint", cfg.checkpoint);
  evl->add_option("--part", cfg.part, "all | train | validation | test (re-splits with --seed)");

  auto* inf = app.add_subcommand("infer", "Predict the driver of every window");
  common(inf);
  dataset(inf);
  inf->add_option("--checkpoint", cfg.checkpoint);
  auto* inf_trace = inf->add_option("--trace-id", trace_id, "Only this trace");

  auto* plt = app.add_subcommand("plot", "Plot one trace as SVG");
  common(plt);
  dataset(plt);
  auto* plt_trace = plt->add_option("--trace-id", trace_id);
  plt->add_option("--t-start", cfg.t_start, "Seconds");
  auto* plt_end = plt->add_option("--t-end", t_end, "Seconds");

  try {
    if (const char* env = std::getenv(kOutEnv); env && *env) cfg.out = env;
    if (auto path = find_config_arg(args)) {
      const std::string out_before = cfg.out;
      cfg = RunConfig::load(*path);
      if (cfg.out == ".") cfg.out = out_before;
    }
    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
      app.parse(rev);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kOk : kUsage;
    }
    CLI::App* sub = app.get_subcommands().front();
    cfg.command = sub->get_name();
    if (inf_trace->count() || plt_trace->count()) cfg.trace_id = trace_id;
    if (plt_end->count()) cfg.t_end = t_end;

    if (cfg.command == "generate") cmd_generate(cfg, out);
    else if (cfg.command == "train") cmd_train(cfg, out);
    else if (cfg.command == "eval") cmd_eval(cfg, out);
    else if (cfg.command == "infer") cmd_infer(cfg, out);
    else cmd_plot(cfg, out);
    return kOk;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace pedalid::cli
