#include "pedalid/models/models.hpp"

#include <stdexcept>

#include "pedalid/util/error.hpp"

namespace pedalid::models {

namespace ops = ad::ops;

BasicBlock::BasicBlock(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                       Rng& rng)
    : conv(nn::Conv1d::same(in_channels, out_channels, kernel, rng)),
      bn(out_channels),
      act(out_channels) {}

Tensor BasicBlock::forward(Tape& tape, const Tensor& x, Mode mode) {
  return act.forward(tape, bn.forward(tape, conv.forward(tape, x), mode));
}

void BasicBlock::collect(const std::string& prefix, Registry& reg) {
  conv.collect(prefix + ".conv", reg);
  bn.collect(prefix + ".bn", reg);
  act.collect(prefix + ".prelu", reg);
}

ResidualBlock::ResidualBlock(std::size_t in_channels, std::size_t out_channels,
                             const std::vector<std::size_t>& kernels, bool output_activation,
                             Rng& rng) {
  std::size_t c = in_channels;
  for (std::size_t k : kernels) {
    blocks.emplace_back(c, out_channels, k, rng);
    c = out_channels;
  }
  if (in_channels != out_channels) {
    projection_ = Projection{nn::Conv1d(in_channels, out_channels, 1, rng), nn::BatchNorm1d(out_channels)};
  }
  if (output_activation) out_act_ = nn::PRelu(out_channels);
}

Tensor ResidualBlock::forward(Tape& tape, const Tensor& x, Mode mode) {
  Tensor h = x;
  for (auto& b : blocks) h = b.forward(tape, h, mode);
  Tensor shortcut = x;
  if (projection_) {
    shortcut = projection_->bn.forward(tape, projection_->conv.forward(tape, x), mode);
  }
  Tensor y = ops::add(tape, h, shortcut);
  return out_act_ ? out_act_->forward(tape, y) : y;
}

void ResidualBlock::collect(const std::string& prefix, Registry& reg) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(prefix + ".block" + std::to_string(i), reg);
  }
  if (projection_) {
    projection_->conv.collect(prefix + ".shortcut.conv", reg);
    projection_->bn.collect(prefix + ".shortcut.bn", reg);
  }
  if (out_act_) out_act_->collect(prefix + ".prelu", reg);
}

ResNet::ResNet(const ResNetConfig& cfg, bool with_head, Rng& rng, std::uint64_t dropout_seed)
    : cfg_(cfg), with_head_(with_head) {
  cfg.validate();
  std::size_t c = cfg.input_channels;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    const bool last = i + 1 == cfg.channels.size();
    blocks.emplace_back(c, cfg.channels[i], cfg.kernels, !last, rng);
    c = cfg.channels[i];
  }
  if (with_head_) {
    if (cfg.classes < 2) throw std::invalid_argument("resnet head needs at least 2 classes");
    dropout_ = nn::Dropout(cfg.dropout, dropout_seed);
    linear_ = nn::Linear(c, cfg.classes, rng);
  }
}

Tensor ResNet::features(Tape& tape, const Tensor& x, Mode mode) {
  if (x.rank() != 3 || x.dim(1) != cfg_.input_channels) {
    throw ShapeError("resnet: expected [B," + std::to_string(cfg_.input_channels) + ",T], got " +
                     ad::shape_to_string(x.shape()));
  }
  Tensor h = x;
  for (auto& b : blocks) h = b.forward(tape, h, mode);
  return ops::global_avg_pool(tape, h);
}

Tensor ResNet::head(Tape& tape, const Tensor& f, Mode mode) {
  if (!with_head_) throw std::logic_error("resnet built without a classification head");
  return ops::log_softmax(tape, linear_.forward(tape, dropout_.forward(tape, f, mode)));
}

Tensor ResNet::forward(Tape& tape, const Tensor& x, Mode mode) {
  return head(tape, features(tape, x, mode), mode);
}

void ResNet::collect(const std::string& prefix, Registry& reg) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(prefix + ".res" + std::to_string(i), reg);
  }
  if (with_head_) linear_.collect(prefix + ".linear", reg);
}

LstmClassifier::LstmClassifier(const LstmClassifierConfig& cfg, bool with_head, Rng& rng,
                               std::uint64_t dropout_seed)
    : cfg_(cfg),
      with_head_(with_head),
      lstm_(cfg.input_channels, cfg.hidden, cfg.layers, cfg.inter_layer_dropout, rng,
            derive_seed(dropout_seed, "inter-layer")) {
  cfg.validate();
  if (with_head_) {
    if (cfg.classes < 2) throw std::invalid_argument("lstm head needs at least 2 classes");
    dropout_ = nn::Dropout(cfg.head_dropout, derive_seed(dropout_seed, "head"));
    linear_ = nn::Linear(cfg.hidden, cfg.classes, rng);
  }
}

Tensor LstmClassifier::features(Tape& tape, const Tensor& x, Mode mode) {
  return lstm_.sequence(tape, x, mode);
}

Tensor LstmClassifier::head(Tape& tape, const Tensor& f, Mode mode) {
  if (!with_head_) throw std::logic_error("lstm built without a classification head");
  return ops::log_softmax(tape, linear_.forward(tape, dropout_.forward(tape, f, mode)));
}

Tensor LstmClassifier::forward(Tape& tape, const Tensor& x, Mode mode) {
  return head(tape, features(tape, x, mode), mode);
}

void LstmClassifier::collect(const std::string& prefix, Registry& reg) {
  lstm_.collect(prefix + ".lstm", reg);
  if (with_head_) linear_.collect(prefix + ".linear", reg);
}

LstmResNet::LstmResNet(const CombinedConfig& cfg, Rng& rng, std::uint64_t dropout_seed)
    : cfg_(cfg),
      resnet_(cfg.resnet, false, rng, derive_seed(dropout_seed, "resnet")),
      lstm_(cfg.lstm, false, rng, derive_seed(dropout_seed, "lstm")),
      fusion_(cfg.fusion_inputs(), cfg.fusion_width, rng),
      fusion_bn_(cfg.fusion_width),
      fusion_act_(cfg.fusion_width),
      dropout_(cfg.fusion_dropout, derive_seed(dropout_seed, "fusion")),
      linear_(cfg.fusion_width, cfg.classes, rng) {
  cfg.validate();
  if (cfg.classes < 2) throw std::invalid_argument("combined model needs at least 2 classes");
}

Tensor LstmResNet::features(Tape& tape, const Tensor& x, Mode mode) {
  Tensor r = resnet_.features(tape, x, mode);
  Tensor l = lstm_.features(tape, x, mode);
  return ops::concat(tape, r, l);
}

Tensor LstmResNet::head(Tape& tape, const Tensor& f, Mode mode) {
  Tensor z = fusion_act_.forward(tape, fusion_bn_.forward(tape, fusion_.forward(tape, f), mode));
  return ops::log_softmax(tape, linear_.forward(tape, dropout_.forward(tape, z, mode)));
}

Tensor LstmResNet::forward(Tape& tape, const Tensor& x, Mode mode) {
  return head(tape, features(tape, x, mode), mode);
}

void LstmResNet::collect(const std::string& prefix, Registry& reg) {
  resnet_.collect(prefix + ".resnet", reg);
  lstm_.collect(prefix + ".lstm", reg);
  fusion_.collect(prefix + ".fusion.conv", reg);
  fusion_bn_.collect(prefix + ".fusion.bn", reg);
  fusion_act_.collect(prefix + ".fusion.prelu", reg);
  linear_.collect(prefix + ".linear", reg);
}

Adfe::Adfe(const AdfeConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  std::size_t c = cfg.input_channels;
  for (const auto& s : cfg.stages) {
    BasicBlock b;
    b.conv = nn::Conv1d(c, s.channels, s.kernel, rng, {s.stride, AdfeConfig::stage_padding(s)});
    b.bn = nn::BatchNorm1d(s.channels);
    b.act = nn::PRelu(s.channels);
    stages.push_back(std::move(b));
    c = s.channels;
  }
}

Tensor Adfe::forward(Tape& tape, const Tensor& x, Mode mode) {
  if (x.rank() != 3 || x.dim(1) != cfg_.input_channels) {
    throw ShapeError("adfe: expected [B," + std::to_string(cfg_.input_channels) + ",T], got " +
                     ad::shape_to_string(x.shape()));
  }
  const std::size_t stride = cfg_.total_stride();
  const std::size_t len = x.dim(2);
  if (len % stride != 0) {
    throw ShapeError("adfe: input length " + std::to_string(len) +
                     " is not a multiple of the total stride " + std::to_string(stride) +
                     "; pad by " + std::to_string(stride - len % stride) + " samples");
  }
  Tensor h = x;
  for (auto& s : stages) h = s.forward(tape, h, mode);
  return h;
}

void Adfe::collect(const std::string& prefix, Registry& reg) {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    stages[i].collect(prefix + ".stage" + std::to_string(i), reg);
  }
}

Classifier::Classifier(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec_.front_end == FrontEnd::adfe && spec_.adfe.stages.empty()) {
    spec_.adfe = AdfeConfig::for_rate(spec_.sample_rate_hz);
  }
  spec_.validate();
  Rng rng = make_rng(seed, "init");
  const std::uint64_t drop = derive_seed(seed, "dropout");
  std::size_t in_channels = 2;
  if (spec_.front_end == FrontEnd::adfe) {
    adfe.emplace(spec_.adfe, rng);
    in_channels = spec_.adfe.output_channels();
  }
  spec_.resnet.input_channels = in_channels;
  spec_.lstm.input_channels = in_channels;
  spec_.resnet.classes = spec_.classes;
  spec_.lstm.classes = spec_.classes;
  switch (spec_.architecture) {
    case Architecture::resnet:
      resnet.emplace(spec_.resnet, true, rng, drop);
      break;
    case Architecture::lstm:
      lstm.emplace(spec_.lstm, true, rng, drop);
      break;
    case Architecture::lstm_resnet:
      combined.emplace(spec_.combined(), rng, drop);
      break;
  }
}

Tensor Classifier::front(Tape& tape, const Tensor& x, Mode mode) {
  if (x.rank() != 3 || x.dim(1) != 2 || x.dim(2) != spec_.input_length()) {
    throw ShapeError("classifier expects [B,2," + std::to_string(spec_.input_length()) +
                     "] input for the " + std::string(to_string(spec_.front_end)) +
                     " front-end, got " + ad::shape_to_string(x.shape()));
  }
  return adfe ? adfe->forward(tape, x, mode) : x;
}

Tensor Classifier::features(Tape& tape, const Tensor& x, Mode mode) {
  Tensor h = front(tape, x, mode);
  if (resnet) return resnet->features(tape, h, mode);
  if (lstm) return lstm->features(tape, h, mode);
  return combined->features(tape, h, mode);
}

Tensor Classifier::head(Tape& tape, const Tensor& f, Mode mode) {
  if (resnet) return resnet->head(tape, f, mode);
  if (lstm) return lstm->head(tape, f, mode);
  return combined->head(tape, f, mode);
}

Tensor Classifier::forward(Tape& tape, const Tensor& x, Mode mode) {
  return head(tape, features(tape, x, mode), mode);
}

Registry Classifier::registry() {
  Registry reg;
  if (adfe) adfe->collect("adfe", reg);
  if (resnet) resnet->collect("resnet", reg);
  if (lstm) lstm->collect("lstm", reg);
  if (combined) combined->collect("lstm_resnet", reg);
  return reg;
}

std::size_t Classifier::parameter_count() { return registry().parameter_count(); }

}  // namespace pedalid::models
