#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <string_view>
#include <vector>

#include "pedalid/autodiff/tensor.hpp"

namespace pedalid::ad {

/// Ordered record of differentiable operations for reverse-mode differentiation.
///
/// Operations are appended as they execute, so every entry's inputs precede
/// it. backward() walks the entries once in reverse. A tape and the tensors it
/// records belong to one thread.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  struct Entry {
    std::string_view op;
    std::vector<std::shared_ptr<TensorNode>> inputs;
    std::shared_ptr<TensorNode> output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// A tape that never records; for inference and finite-difference probes.
  static Tape inference();

  bool recording() const noexcept { return recording_; }

  /// True when an op over these inputs must be recorded.
  bool wants(std::initializer_list<const Tensor*> inputs) const;

  /// Appends an entry and marks `output` differentiable. The backward closure
  /// reads output->grad and accumulates into the inputs' grads.
  void record(std::string_view op, std::vector<std::shared_ptr<TensorNode>> inputs,
              const Tensor& output, BackwardFn backward);

  /// Populates gradients of every differentiable leaf reachable from `loss`.
  /// Intermediate gradients are reset first; leaf gradients accumulate.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  void clear();

 private:
  std::vector<Entry> entries_;
  bool recording_ = true;
};

}  // namespace pedalid::ad
