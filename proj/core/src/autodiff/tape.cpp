#include "pedalid/autodiff/tape.hpp"

#include <algorithm>

#include "pedalid/util/error.hpp"

namespace pedalid::ad {

Tape Tape::inference() {
  Tape t;
  t.recording_ = false;
  return t;
}

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t && t->defined() && t->requires_grad(); });
}

void Tape::record(std::string_view op, std::vector<std::shared_ptr<TensorNode>> inputs,
                  const Tensor& output, BackwardFn backward) {
  const auto& node = output.node();
  node->requires_grad = true;
  node->tape_index = static_cast<std::ptrdiff_t>(entries_.size());
  entries_.push_back(Entry{op, std::move(inputs), node, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got " +
                     (loss.defined() ? shape_to_string(loss.shape()) : std::string("undefined")));
  }
  for (auto& e : entries_) {
    e.output->ensure_grad();
    std::fill(e.output->grad.begin(), e.output->grad.end(), 0.0);
  }
  const auto& ln = loss.node();
  ln->ensure_grad();
  ln->grad[0] += 1.0;
  if (ln->tape_index < 0) return;
  for (auto i = ln->tape_index; i >= 0; --i) {
    entries_[static_cast<std::size_t>(i)].backward();
  }
}

void Tape::clear() {
  for (auto& e : entries_) e.output->tape_index = -1;
  entries_.clear();
}

}  // namespace pedalid::ad
