#include "pedalid/train/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "pedalid/data/windowing.hpp"
#include "pedalid/util/error.hpp"

namespace pedalid::train {

std::vector<std::int64_t> MetricsReport::absent_classes() const {
  std::vector<std::int64_t> out;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) out.push_back(labels[k]);
  }
  return out;
}

MetricsReport MetricsReport::from_confusion(std::vector<std::vector<std::size_t>> confusion,
                                            std::vector<std::int64_t> labels) {
  const std::size_t k = labels.size();
  if (confusion.size() != k) throw std::invalid_argument("confusion matrix must be K x K");
  MetricsReport r;
  r.labels = std::move(labels);
  r.counts.assign(k, 0);
  r.pce.assign(k, std::nullopt);
  double pce_sum = 0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (confusion[i].size() != k) throw std::invalid_argument("confusion matrix must be K x K");
    for (std::size_t j = 0; j < k; ++j) r.counts[i] += confusion[i][j];
    r.total += r.counts[i];
    r.correct += confusion[i][i];
    if (r.counts[i] > 0) {
      const double e = static_cast<double>(r.counts[i] - confusion[i][i]) /
                       static_cast<double>(r.counts[i]);
      r.pce[i] = e;
      pce_sum += e;
      ++present;
    }
  }
  r.confusion = std::move(confusion);
  r.accuracy = r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
  r.mpce = present ? pce_sum / static_cast<double>(present) : 0.0;
  return r;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f %%", fraction * 100.0);
  return buf;
}

std::string format_report(const MetricsReport& r) {
  std::ostringstream os;
  const std::string name = r.model_id.empty() ? "model" : r.model_id;
  os << std::left << std::setw(24) << "Classifier" << std::setw(12) << "AC" << "MPCE\n";
  os << std::setw(24) << name << std::setw(12) << format_percent(r.accuracy)
     << format_percent(r.mpce) << "\n\n";

  const bool have_seconds = r.train_seconds.size() == r.labels.size();
  os << std::setw(15) << "Driver";
  for (auto l : r.labels) os << std::right << std::setw(10) << l;
  os << "\n" << std::left << std::setw(15) << "PCE";
  for (const auto& p : r.pce) os << std::right << std::setw(10) << (p ? format_percent(*p) : "n/a");
  if (have_seconds) {
    os << "\n" << std::left << std::setw(15) << "Training Data";
    for (double s : r.train_seconds) os << std::right << std::setw(10) << std::llround(s);
  }
  os << std::left << "\n\n";
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    os << "driver " << r.labels[k] << ": PCE " << (r.pce[k] ? format_percent(*r.pce[k]) : "n/a");
    if (have_seconds) os << " / " << std::llround(r.train_seconds[k]) << " s";
    os << " (" << r.counts[k] << " samples)\n";
  }
  for (auto a : r.absent_classes()) {
    os << "note: driver " << a << " has no test samples and is excluded from MPCE\n";
  }

  os << "\n[metrics]\n";
  os << std::setprecision(17);
  os << "model_id=" << r.model_id << "\n";
  os << "samples=" << r.total << "\ncorrect=" << r.correct << "\n";
  os << "accuracy=" << r.accuracy << "\nmpce=" << r.mpce << "\n";
  os << "classes=" << r.labels.size() << "\n";
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    const std::string p = "class." + std::to_string(k) + ".";
    os << p << "driver=" << r.labels[k] << "\n" << p << "count=" << r.counts[k] << "\n";
    os << p << "pce=";
    if (r.pce[k]) os << *r.pce[k];
    os << "\n";
    if (have_seconds) os << p << "train_seconds=" << r.train_seconds[k] << "\n";
    os << p << "confusion=";
    for (std::size_t j = 0; j < r.confusion[k].size(); ++j) os << (j ? "," : "") << r.confusion[k][j];
    os << "\n";
  }
  return os.str();
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

std::vector<std::vector<double>> predict_proba(models::Classifier& model,
                                               std::span<const data::SequenceWindow> windows) {
  constexpr std::size_t kBatch = 64;
  std::vector<std::vector<double>> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += kBatch) {
    const auto chunk = windows.subspan(start, std::min(kBatch, windows.size() - start));
    ad::Tensor x = data::make_batch(chunk, model.spec());
    ad::Tape tape = ad::Tape::inference();
    ad::Tensor logp = model.forward(tape, x, nn::Mode::eval);
    const std::size_t k = logp.dim(1);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      std::vector<double> p(k);
      for (std::size_t j = 0; j < k; ++j) p[j] = std::exp(logp.values()[b * k + j]);
      out.push_back(std::move(p));
    }
  }
  return out;
}

MetricsReport evaluate(models::Classifier& model, std::span<const data::SequenceWindow> windows,
                       std::span<const std::int64_t> labels) {
  if (windows.empty()) throw DataError("evaluate: no windows to evaluate");
  const std::size_t k = labels.size();
  if (k != model.spec().classes) {
    throw DataError("evaluate: " + std::to_string(k) + " labels for a " +
                    std::to_string(model.spec().classes) + "-class model");
  }
  std::vector<std::size_t> truth;
  truth.reserve(windows.size());
  for (const auto& w : windows) {
    const auto it = std::find(labels.begin(), labels.end(), w.label);
    if (it == labels.end()) {
      throw DataError("evaluate: driver " + std::to_string(w.label) + " is not a model class");
    }
    truth.push_back(static_cast<std::size_t>(it - labels.begin()));
  }
  const auto probs = predict_proba(model, windows);
  std::vector<std::vector<std::size_t>> confusion(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < probs.size(); ++i) ++confusion[truth[i]][argmax(probs[i])];
  return MetricsReport::from_confusion(std::move(confusion), {labels.begin(), labels.end()});
}

MetricsReport evaluate(const models::Checkpoint& checkpoint,
                       std::span<const data::SequenceWindow> windows) {
  models::Classifier model = checkpoint.restore();
  MetricsReport r = evaluate(model, windows, checkpoint.labels);
  r.model_id = checkpoint.model_id;
  r.train_seconds = checkpoint.train_seconds;
  return r;
}

}  // namespace pedalid::train
