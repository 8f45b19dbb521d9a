#include "pedalid/cli/run_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pedalid/util/error.hpp"

namespace pedalid::cli {

using nlohmann::json;

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig t;
  t.learning_rate = learning_rate;
  t.batch_size = batch_size;
  t.epochs = epochs;
  t.decay_factor = decay_factor;
  t.decay_period = decay_period;
  t.adam = {beta1, beta2, adam_epsilon};
  t.seed = seed;
  t.architecture = models::parse_architecture(model);
  t.front_end = models::parse_front_end(frontend);
  t.resnet.channels = resnet_channels;
  t.lstm.hidden = lstm_hidden;
  t.lstm.layers = lstm_layers;
  t.model_id = model_id.empty() ? model + "/" + frontend : model_id;
  return t;
}

data::SplitFractions RunConfig::fractions() const {
  return {train_fraction, validation_fraction, test_fraction};
}

#define PEDALID_RUN_CONFIG_FIELDS(X)                                                          \
  X(command) X(dataset) X(profiles) X(checkpoint) X(out) X(seed) X(drivers) X(overlap)         \
  X(duration) X(rate_hz) X(trace_seconds) X(learning_rate) X(batch_size) X(epochs)             \
  X(decay_factor) X(decay_period) X(beta1) X(beta2) X(adam_epsilon) X(model) X(frontend)       \
  X(model_id) X(resnet_channels) X(lstm_hidden) X(lstm_layers) X(train_fraction)               \
  X(validation_fraction) X(test_fraction) X(part) X(t_start)

std::string RunConfig::to_json() const {
  json j;
#define X(f) j[#f] = f;
  PEDALID_RUN_CONFIG_FIELDS(X)
#undef X
  j["trace_id"] = trace_id ? json(*trace_id) : json(nullptr);
  j["t_end"] = t_end ? json(*t_end) : json(nullptr);
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
#define X(f)                   \
  if (key == #f) {             \
    value.get_to(c.f);         \
    continue;                  \
  }
      PEDALID_RUN_CONFIG_FIELDS(X)
#undef X
      if (key == "trace_id") {
        if (value.is_null()) c.trace_id.reset(); else c.trace_id = value.get<std::int64_t>();
        continue;
      }
      if (key == "t_end") {
        if (value.is_null()) c.t_end.reset(); else c.t_end = value.get<double>();
        continue;
      }
    } catch (const json::exception&) {
      throw std::invalid_argument("config key \"" + key + "\" has the wrong type");
    }
    throw std::invalid_argument("unknown config key \"" + key + "\"");
  }
  return c;
}

#undef PEDALID_RUN_CONFIG_FIELDS

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

}  // namespace pedalid::cli
