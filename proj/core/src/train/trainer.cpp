#include "pedalid/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "pedalid/autodiff/ops.hpp"
#include "pedalid/data/windowing.hpp"
#include "pedalid/train/metrics.hpp"
#include "pedalid/util/error.hpp"
#include "pedalid/util/random.hpp"

namespace pedalid::train {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(decay_factor > 0)) throw std::invalid_argument("decay factor must be positive");
  if (decay_period == 0) throw std::invalid_argument("decay period must be at least 1 epoch");
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1)) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0)) throw std::invalid_argument("adam epsilon must be positive");
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.learning_rate *
         std::pow(cfg.decay_factor, static_cast<double>(epoch / cfg.decay_period));
}

models::ModelSpec spec_for(const TrainConfig& cfg, std::size_t classes, double rate_hz) {
  models::ModelSpec spec;
  spec.architecture = cfg.architecture;
  spec.front_end = cfg.front_end;
  spec.classes = classes;
  spec.sample_rate_hz = rate_hz;
  spec.resnet = cfg.resnet;
  spec.lstm = cfg.lstm;
  if (cfg.front_end == models::FrontEnd::adfe) spec.adfe = models::AdfeConfig::for_rate(rate_hz);
  return spec;
}

namespace {

struct Batch {
  std::vector<const data::SequenceWindow*> windows;
  std::vector<std::size_t> targets;
};

// Consecutive chunks of `order`; a lone trailing window joins the previous
// batch because batch norm needs two observations per channel.
std::vector<Batch> make_batches(const std::vector<std::size_t>& order,
                                const std::vector<data::SequenceWindow>& windows,
                                const std::vector<std::size_t>& targets, std::size_t batch_size) {
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t end = std::min(order.size(), start + batch_size);
    if (order.size() - end == 1) end = order.size();
    Batch b;
    for (std::size_t i = start; i < end; ++i) {
      b.windows.push_back(&windows[order[i]]);
      b.targets.push_back(targets[order[i]]);
    }
    out.push_back(std::move(b));
    if (end == order.size()) break;
  }
  return out;
}

double batch_loss(models::Classifier& model, ad::Tape& tape, const Batch& b) {
  ad::Tensor x = data::make_batch(b.windows, model.spec());
  ad::Tensor logp = model.forward(tape, x, nn::Mode::train);
  ad::Tensor loss = ad::ops::nll_loss(tape, logp, b.targets);
  if (tape.recording()) tape.backward(loss);
  return loss.item();
}

}  // namespace

TrainResult train(const data::DatasetSplit& split, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (split.train.empty()) throw DataError("training split is empty");

  std::set<std::int64_t> drivers;
  for (const auto& w : split.train) drivers.insert(w.label);
  if (drivers.size() < 2) {
    throw DataError("training data holds " + std::to_string(drivers.size()) +
                    " driver; at least 2 are needed for classification");
  }
  for (const auto& w : split.validation) {
    if (!drivers.count(w.label)) {
      throw DataError("validation driver " + std::to_string(w.label) + " has no training windows");
    }
  }
  const double rate = split.train.front().rate_hz;
  const std::size_t length = split.train.front().length;
  for (const auto& w : split.train) {
    if (w.rate_hz != rate || w.length != length) {
      throw DataError("training windows mix sampling rates or window lengths");
    }
  }

  TrainResult result;
  result.labels.assign(drivers.begin(), drivers.end());
  std::map<std::int64_t, std::size_t> index;
  for (std::size_t k = 0; k < result.labels.size(); ++k) index[result.labels[k]] = k;
  std::vector<std::size_t> targets;
  std::vector<double> seconds(result.labels.size(), 0.0);
  for (const auto& w : split.train) {
    targets.push_back(index[w.label]);
    seconds[index[w.label]] += static_cast<double>(w.length) / w.rate_hz;
  }

  models::ModelSpec spec = spec_for(cfg, result.labels.size(), rate);
  spec.window_seconds = static_cast<double>(length) / rate;
  models::Classifier model(spec, cfg.seed);
  auto reg = model.registry();
  AdamState adam;
  Rng shuffle_rng = make_rng(cfg.seed, "shuffle");
  std::vector<std::size_t> order(split.train.size());

  auto epoch_order = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    return make_batches(order, split.train, targets, cfg.batch_size);
  };

  std::vector<Batch> batches = epoch_order();
  if (cfg.record_initial_loss) {
    // Identical weights, separate batch-norm statistics and dropout streams.
    models::Classifier probe(spec, cfg.seed);
    double total = 0;
    for (const auto& b : batches) {
      ad::Tape tape = ad::Tape::inference();
      total += batch_loss(probe, tape, b) * static_cast<double>(b.targets.size());
    }
    result.initial_loss = total / static_cast<double>(split.train.size());
  }

  std::optional<double> best_score;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0) batches = epoch_order();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_at(epoch, cfg);
    double total = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      for (auto& p : reg.parameters) p.tensor.zero_grad();
      ad::Tape tape;
      const double loss = batch_loss(model, tape, batches[bi]);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi));
      }
      try {
        adam_step(reg.parameters, adam, rec.lr, cfg.adam);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(bi));
      }
      total += loss * static_cast<double>(batches[bi].targets.size());
    }
    rec.train_loss = total / static_cast<double>(split.train.size());

    double score = -rec.train_loss;
    if (!split.validation.empty()) {
      rec.val_accuracy = evaluate(model, split.validation, result.labels).accuracy;
      score = *rec.val_accuracy;
    }
    if (!best_score || score > *best_score) {
      best_score = score;
      result.best_epoch = epoch;
      result.best = models::Checkpoint::capture(model, result.labels, seconds, cfg.model_id);
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.final = models::Checkpoint::capture(model, result.labels, seconds, cfg.model_id);
  if (cfg.epochs == 0) result.best = result.final;
  return result;
}

void write_history(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,lr,train_loss,val_accuracy\n";
  out.precision(17);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',';
    if (r.val_accuracy) out << *r.val_accuracy;
    out << '\n';
  }
}

void save_history(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write history " + path.string());
  write_history(f, history);
}

}  // namespace pedalid::train
