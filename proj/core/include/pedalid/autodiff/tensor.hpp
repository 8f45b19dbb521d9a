#pragma once

#include <cstddef>
#include <memory>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pedalid::ad {

using Shape = std::vector<std::size_t>;

/// 64-byte aligned storage. SIMD kernels peel loops according to the address
/// of their operands, so a fixed alignment keeps results identical from run
/// to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};
using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Storage shared between a Tensor handle and the tape entries that reference it.
struct TensorNode {
  Shape shape;
  Buffer value;
  Buffer grad;  // empty until the node takes part in differentiation
  bool requires_grad = false;
  std::ptrdiff_t tape_index = -1;  // index of the producing tape entry, -1 for leaves

  void ensure_grad();
};

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// A Tensor is a cheap handle; copies alias the same storage. Use clone() for
/// an independent copy. Sequences use the layout [batch, channels, time] and
/// feature vectors [batch, features].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  /// Leaf tensor that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<double> values();
  std::span<const double> values() const;
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  /// Tape entry that produced this tensor; empty for leaves and constants.
  std::optional<std::size_t> node_id() const;

  /// Deep copy of values only; the copy is a constant leaf.
  Tensor clone() const;
  Tensor reshaped(Shape shape) const;  // constant copy with a new shape

  const std::shared_ptr<TensorNode>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<TensorNode> node_;
};

}  // namespace pedalid::ad
