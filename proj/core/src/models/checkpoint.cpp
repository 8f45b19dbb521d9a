#include "pedalid/models/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pedalid/util/error.hpp"

namespace pedalid::models {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'P', 'E', 'D', 'A', 'L', 'I', 'D', 'C'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written in native order; big-endian hosts need byte swaps");

json spec_to_json(const ModelSpec& s) {
  json adfe = json::array();
  for (const auto& st : s.adfe.stages) {
    adfe.push_back({{"kernel", st.kernel}, {"stride", st.stride}, {"channels", st.channels}});
  }
  return {
      {"architecture", std::string(to_string(s.architecture))},
      {"front_end", std::string(to_string(s.front_end))},
      {"classes", s.classes},
      {"sample_rate_hz", s.sample_rate_hz},
      {"window_seconds", s.window_seconds},
      {"grid_seconds", s.grid_seconds},
      {"resnet",
       {{"kernels", s.resnet.kernels}, {"channels", s.resnet.channels}, {"dropout", s.resnet.dropout}}},
      {"lstm",
       {{"layers", s.lstm.layers},
        {"hidden", s.lstm.hidden},
        {"inter_layer_dropout", s.lstm.inter_layer_dropout},
        {"head_dropout", s.lstm.head_dropout}}},
      {"fusion", {{"width", s.fusion_width}, {"dropout", s.fusion_dropout}}},
      {"adfe", adfe},
  };
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.architecture = parse_architecture(j.at("architecture").get<std::string>());
  s.front_end = parse_front_end(j.at("front_end").get<std::string>());
  s.classes = j.at("classes").get<std::size_t>();
  s.sample_rate_hz = j.at("sample_rate_hz").get<double>();
  s.window_seconds = j.at("window_seconds").get<double>();
  s.grid_seconds = j.at("grid_seconds").get<double>();
  const auto& r = j.at("resnet");
  s.resnet.kernels = r.at("kernels").get<std::vector<std::size_t>>();
  s.resnet.channels = r.at("channels").get<std::vector<std::size_t>>();
  s.resnet.dropout = r.at("dropout").get<double>();
  const auto& l = j.at("lstm");
  s.lstm.layers = l.at("layers").get<std::size_t>();
  s.lstm.hidden = l.at("hidden").get<std::size_t>();
  s.lstm.inter_layer_dropout = l.at("inter_layer_dropout").get<double>();
  s.lstm.head_dropout = l.at("head_dropout").get<double>();
  s.fusion_width = j.at("fusion").at("width").get<std::size_t>();
  s.fusion_dropout = j.at("fusion").at("dropout").get<double>();
  for (const auto& st : j.at("adfe")) {
    s.adfe.stages.push_back({st.at("kernel").get<std::size_t>(), st.at("stride").get<std::size_t>(),
                             st.at("channels").get<std::size_t>()});
  }
  return s;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

Checkpoint Checkpoint::capture(Classifier& model, std::vector<std::int64_t> labels,
                               std::vector<double> train_seconds, std::string model_id) {
  Checkpoint ck;
  ck.spec = model.spec();
  ck.model_id = std::move(model_id);
  ck.labels = std::move(labels);
  ck.train_seconds = std::move(train_seconds);
  auto reg = model.registry();
  for (const auto& p : reg.parameters) {
    auto v = p.tensor.values();
    ck.entries.push_back({p.name, false, p.tensor.shape(), {v.begin(), v.end()}});
  }
  for (const auto& b : reg.buffers) {
    ck.entries.push_back({b.name, true, {b.values->size()}, *b.values});
  }
  return ck;
}

Classifier Checkpoint::restore() const {
  Classifier model(spec, 0);
  auto reg = model.registry();
  const std::size_t expected = reg.parameters.size() + reg.buffers.size();
  if (entries.size() != expected) {
    throw DataError("checkpoint holds " + std::to_string(entries.size()) + " tensors, model needs " +
                    std::to_string(expected));
  }
  std::size_t i = 0;
  for (auto& p : reg.parameters) {
    const auto& e = entries[i++];
    if (e.buffer || e.name != p.name || e.shape != p.tensor.shape()) {
      throw DataError("checkpoint tensor '" + e.name + "' " + ad::shape_to_string(e.shape) +
                      " does not match model parameter '" + p.name + "' " +
                      ad::shape_to_string(p.tensor.shape()));
    }
    std::copy(e.values.begin(), e.values.end(), p.tensor.values().begin());
  }
  for (auto& b : reg.buffers) {
    const auto& e = entries[i++];
    if (!e.buffer || e.name != b.name || e.values.size() != b.values->size()) {
      throw DataError("checkpoint buffer '" + e.name + "' does not match '" + b.name + "'");
    }
    *b.values = e.values;
  }
  return model;
}

std::string Checkpoint::serialize() const {
  json dir = json::array();
  std::size_t offset = 0;
  for (const auto& e : entries) {
    dir.push_back({{"name", e.name},
                   {"kind", e.buffer ? "buffer" : "parameter"},
                   {"shape", e.shape},
                   {"offset", offset}});
    offset += e.values.size();
  }
  json header = {{"format_version", kFormatVersion},
                 {"model_id", model_id},
                 {"spec", spec_to_json(spec)},
                 {"labels", labels},
                 {"train_seconds", train_seconds},
                 {"tensors", dir}};
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset * sizeof(double));
  for (const auto& e : entries) {
    out.append(reinterpret_cast<const char*>(e.values.data()), e.values.size() * sizeof(double));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a pedalid checkpoint (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kFormatVersion) {
    throw DataError("unsupported checkpoint format version " + std::to_string(version));
  }
  const auto hlen = get<std::uint64_t>(bytes, pos);
  if (pos + hlen > bytes.size()) throw DataError("checkpoint header truncated");
  Checkpoint ck;
  try {
    const json header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + hlen));
    pos += hlen;
    ck.spec = spec_from_json(header.at("spec"));
    ck.model_id = header.at("model_id").get<std::string>();
    ck.labels = header.at("labels").get<std::vector<std::int64_t>>();
    ck.train_seconds = header.at("train_seconds").get<std::vector<double>>();
    for (const auto& d : header.at("tensors")) {
      Entry e;
      e.name = d.at("name").get<std::string>();
      e.buffer = d.at("kind").get<std::string>() == "buffer";
      e.shape = d.at("shape").get<ad::Shape>();
      const std::size_t n = ad::shape_numel(e.shape);
      const std::size_t start = pos + d.at("offset").get<std::size_t>() * sizeof(double);
      if (start + n * sizeof(double) > bytes.size()) throw DataError("checkpoint payload truncated");
      e.values.resize(n);
      std::memcpy(e.values.data(), bytes.data() + start, n * sizeof(double));
      ck.entries.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed checkpoint header: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw DataError(std::string("malformed checkpoint header: ") + ex.what());
  }
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint " + path.string());
  const std::string bytes = serialize();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

}  // namespace pedalid::models
